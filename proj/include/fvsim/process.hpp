#pragma once

// Killed-process contract: particle states, domains, diffusion and CTMC
// specifications, and the single-particle numerical steppers.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <variant>

#include "fvsim/random.hpp"

namespace fvsim {

inline constexpr int kMaxDim = 6;

/// Small dense vector with inline storage (no heap allocation).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
/// Small dense matrix with inline storage.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

struct Discrete {
  std::size_t index = 0;
  friend bool operator==(const Discrete&, const Discrete&) = default;
};

struct Continuous {
  Vec position;
  Vec environment;
  friend bool operator==(const Continuous& a, const Continuous& b) {
    return a.position.size() == b.position.size() && a.environment.size() == b.environment.size() &&
           a.position == b.position && a.environment == b.environment;
  }
};

struct Cemetery {
  friend bool operator==(const Cemetery&, const Cemetery&) = default;
};

using ParticleState = std::variant<Discrete, Continuous, Cemetery>;

inline bool is_cemetery(const ParticleState& s) { return std::holds_alternative<Cemetery>(s); }

/// Real-valued function of a live state (test functions, observables).
using StateFunction = std::function<double(const ParticleState&)>;

Continuous make_continuous(std::initializer_list<double> position,
                           std::initializer_list<double> environment = {});

/// Open domain D with the signed Euclidean distance to its boundary.
///
/// `distance_to_boundary` is the exact distance to the boundary for interior
/// points and minus the exact distance for exterior points, so membership is
/// `distance_to_boundary(x) > 0`.
class Domain {
 public:
  struct Interval {
    double lo, hi;
  };
  struct Box {
    Vec lo, hi;
  };
  struct Ball {
    Vec center;
    double radius;
  };
  /// {x : normal . x > offset}, `normal` of unit length.
  struct HalfSpace {
    Vec normal;
    double offset;
  };
  /// R^dim, no boundary.
  struct Whole {
    int dim;
  };
  using Shape = std::variant<Interval, Box, Ball, HalfSpace, Whole>;

  Domain() : shape_(Whole{1}) {}

  static Domain interval(double lo, double hi);
  static Domain box(const Vec& lo, const Vec& hi);
  static Domain ball(const Vec& center, double radius);
  static Domain half_space(const Vec& normal, double offset);
  static Domain whole(int dim);

  const Shape& shape() const { return shape_; }
  int dimension() const;
  bool bounded() const;
  bool has_boundary() const { return !std::holds_alternative<Whole>(shape_); }

  double distance_to_boundary(const Vec& x) const;
  bool contains(const Vec& x) const { return distance_to_boundary(x) > 0.0; }

  /// Unit gradient of the distance function (points into the domain).
  /// Zero for the whole space.
  Vec inward_normal(const Vec& x) const;

  /// Fraction s in (0, 1] at which the straight segment prev -> next first
  /// reaches the boundary. `prev` must be inside and `next` outside or on it.
  double exit_fraction(const Vec& prev, const Vec& next) const;

  /// (lo, hi) of a one-dimensional domain, infinite where unbounded.
  std::optional<std::pair<double, double>> one_dimensional_bounds() const;

  /// Uniform sample of the interior restricted to distance >= min_distance.
  Vec sample_interior(Stream& rng, double min_distance = 0.0) const;
  /// Sample of a boundary point.
  Vec sample_boundary(Stream& rng) const;

 private:
  explicit Domain(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

/// Time-inhomogeneous environment-dependent diffusion with hard and soft
/// killing:
///   de = m(t,e,z) dt + s(t,e,z) dbeta,   dz = eta(t,e,z) dt + sigma(t,e,z) dB,
/// killed on leaving `domain` or at rate kappa(t,e,z).
struct DiffusionSpec {
  using VectorField = std::function<Vec(double, const Vec&, const Vec&)>;
  using MatrixField = std::function<Mat(double, const Vec&, const Vec&)>;
  using ScalarField = std::function<double(double, const Vec&, const Vec&)>;

  int dim_position = 1;
  int dim_env = 0;
  VectorField drift;
  MatrixField diffusion;
  VectorField env_drift;
  MatrixField env_diffusion;
  ScalarField kill_rate;  // empty means kappa == 0
  double kill_rate_max = 0.0;
  Domain domain;

  /// kappa at (t, e, z); throws RateError outside [0, kill_rate_max].
  double kill_rate_at(double t, const Vec& env, const Vec& pos) const;

  /// grad(phi)^T sigma sigma^T grad(phi) at (t, e, z).
  double normal_diffusivity(double t, const Vec& env, const Vec& pos) const;

  bool has_soft_killing() const { return static_cast<bool>(kill_rate); }
};

/// Finite-state killed chain. `generator` is the sub-generator over live
/// states: off-diagonal rates >= 0 and each row sums to -kill_rates[row].
struct CtmcSpec {
  Eigen::MatrixXd generator;
  Eigen::VectorXd kill_rates;

  std::size_t n_states() const { return static_cast<std::size_t>(generator.rows()); }
  double exit_rate(std::size_t state) const { return -generator(state, state); }

  /// Builds the sub-generator from off-diagonal jump rates and kill rates.
  static CtmcSpec from_rates(const Eigen::MatrixXd& jump_rates, const Eigen::VectorXd& kill_rates);

  /// Throws InvalidModel when an invariant is broken.
  void validate(double tolerance = 1e-12) const;
};

// ---------------------------------------------------------------------------
// Steppers

/// Euler-Maruyama update. `noise` holds d' position components followed by
/// d environment components; all coefficients are evaluated at (t, e, z).
Continuous step_diffusion(const Continuous& state, const DiffusionSpec& spec, double t, double dt,
                          const Vec& noise);

struct HardKillOptions {
  bool bridge = false;
  /// Averaged squared diffusion along the boundary normal (sigma-bar^2).
  double normal_variance = 1.0;
};

/// Probability that a Brownian bridge between two interior points of a
/// one-dimensional domain leaves it during a step of length dt.
double bridge_crossing_probability(double prev, double next, double lo, double hi, double dt,
                                   double normal_variance);

/// Kill sub-time in (0, dt] if the step prev -> next kills the particle.
///
/// An endpoint outside (or on) the boundary kills at the linear-interpolation
/// crossing time. With the bridge option on, an interior endpoint kills with
/// the Brownian-bridge crossing probability p when uniform_draw < p, at
/// sub-time dt * uniform_draw / p.
std::optional<double> detect_hard_kill(const Vec& prev, const Vec& next, const Domain& domain,
                                       double dt, const HardKillOptions& options, double uniform_draw);

struct SoftKillStep {
  double accumulator;
  bool killed;
  /// Fraction of the step at which the threshold was reached (1 if not killed).
  double fraction;
};

/// Exponential-threshold hazard integration over one step with constant rate.
SoftKillStep sample_soft_kill(double accumulator, double rate, double rate_max, double dt, double threshold);

struct CtmcStep {
  double holding_time;
  ParticleState next;
};

/// Exact event simulation of one transition of a killed chain.
CtmcStep ctmc_step(std::size_t state, const CtmcSpec& spec, Stream& rng);

}  // namespace fvsim
