#include "fvsim/process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fvsim/errors.hpp"

namespace fvsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vec to_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

double clamp_fraction(double s) {
  if (!(s > 0.0)) return std::numeric_limits<double>::min();
  return std::min(s, 1.0);
}

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw CoefficientError(std::string("non-finite ") + what);
}

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw CoefficientError(std::string("non-finite ") + what);
}

}  // namespace

Continuous make_continuous(std::initializer_list<double> position,
                           std::initializer_list<double> environment) {
  return Continuous{to_vec(position), to_vec(environment)};
}

// ---------------------------------------------------------------------------
// Domain

Domain Domain::interval(double lo, double hi) {
  if (!(lo < hi)) throw InvalidModel("interval requires lo < hi");
  return Domain(Interval{lo, hi});
}

Domain Domain::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.size() == 0 || (hi - lo).minCoeff() <= 0.0)
    throw InvalidModel("box requires lo < hi componentwise");
  return Domain(Box{lo, hi});
}

Domain Domain::ball(const Vec& center, double radius) {
  if (!(radius > 0.0) || center.size() == 0) throw InvalidModel("ball requires a positive radius");
  return Domain(Ball{center, radius});
}

Domain Domain::half_space(const Vec& normal, double offset) {
  if (normal.size() == 0 || std::abs(normal.norm() - 1.0) > 1e-12)
    throw InvalidModel("half-space normal must have unit length");
  return Domain(HalfSpace{normal, offset});
}

Domain Domain::whole(int dim) {
  if (dim <= 0 || dim > kMaxDim) throw InvalidModel("whole space dimension out of range");
  return Domain(Whole{dim});
}

int Domain::dimension() const {
  return std::visit(Overloaded{[](const Interval&) { return 1; },
                               [](const Box& b) { return static_cast<int>(b.lo.size()); },
                               [](const Ball& b) { return static_cast<int>(b.center.size()); },
                               [](const HalfSpace& h) { return static_cast<int>(h.normal.size()); },
                               [](const Whole& w) { return w.dim; }},
                    shape_);
}

bool Domain::bounded() const {
  return std::holds_alternative<Interval>(shape_) || std::holds_alternative<Box>(shape_) ||
         std::holds_alternative<Ball>(shape_);
}

double Domain::distance_to_boundary(const Vec& x) const {
  return std::visit(
      Overloaded{[&](const Interval& iv) { return std::min(x(0) - iv.lo, iv.hi - x(0)); },
                 [&](const Box& b) {
                   const Vec below = b.lo - x;
                   const Vec above = x - b.hi;
                   const Vec excess = below.cwiseMax(above).cwiseMax(0.0);
                   if (excess.squaredNorm() > 0.0) return -excess.norm();
                   return (x - b.lo).cwiseMin(b.hi - x).minCoeff();
                 },
                 [&](const Ball& b) { return b.radius - (x - b.center).norm(); },
                 [&](const HalfSpace& h) { return h.normal.dot(x) - h.offset; },
                 [](const Whole&) { return kInf; }},
      shape_);
}

Vec Domain::inward_normal(const Vec& x) const {
  return std::visit(
      Overloaded{[&](const Interval& iv) {
                   Vec n(1);
                   n(0) = (x(0) - iv.lo <= iv.hi - x(0)) ? 1.0 : -1.0;
                   return n;
                 },
                 [&](const Box& b) {
                   Eigen::Index best = 0;
                   double best_gap = kInf;
                   double sign = 1.0;
                   for (Eigen::Index k = 0; k < x.size(); ++k) {
                     const double lo_gap = x(k) - b.lo(k);
                     const double hi_gap = b.hi(k) - x(k);
                     if (lo_gap < best_gap) best_gap = lo_gap, best = k, sign = 1.0;
                     if (hi_gap < best_gap) best_gap = hi_gap, best = k, sign = -1.0;
                   }
                   Vec n = Vec::Zero(x.size());
                   n(best) = sign;
                   return n;
                 },
                 [&](const Ball& b) {
                   Vec n = b.center - x;
                   const double len = n.norm();
                   if (len == 0.0) {
                     n.setZero();
                     n(0) = 1.0;
                     return n;
                   }
                   return Vec(n / len);
                 },
                 [](const HalfSpace& h) { return h.normal; },
                 [](const Whole& w) { return Vec(Vec::Zero(w.dim)); }},
      shape_);
}

double Domain::exit_fraction(const Vec& prev, const Vec& next) const {
  const Vec step = next - prev;
  const double s = std::visit(
      Overloaded{[&](const Interval& iv) {
                   if (next(0) >= iv.hi) return (iv.hi - prev(0)) / step(0);
                   return (iv.lo - prev(0)) / step(0);
                 },
                 [&](const Box& b) {
                   double first = kInf;
                   for (Eigen::Index k = 0; k < step.size(); ++k) {
                     if (step(k) > 0.0) first = std::min(first, (b.hi(k) - prev(k)) / step(k));
                     if (step(k) < 0.0) first = std::min(first, (b.lo(k) - prev(k)) / step(k));
                   }
                   return first;
                 },
                 [&](const Ball& b) {
                   const Vec p = prev - b.center;
                   const double a = step.squaredNorm();
                   const double half_b = p.dot(step);
                   const double c = p.squaredNorm() - b.radius * b.radius;
                   return (-half_b + std::sqrt(std::max(half_b * half_b - a * c, 0.0))) / a;
                 },
                 [&](const HalfSpace& h) {
                   const double start = h.normal.dot(prev) - h.offset;
                   return start / (start - (h.normal.dot(next) - h.offset));
                 },
                 [](const Whole&) { return 1.0; }},
      shape_);
  return clamp_fraction(s);
}

std::optional<std::pair<double, double>> Domain::one_dimensional_bounds() const {
  if (dimension() != 1) return std::nullopt;
  return std::visit(
      Overloaded{[](const Interval& iv) { return std::pair{iv.lo, iv.hi}; },
                 [](const Box& b) { return std::pair{b.lo(0), b.hi(0)}; },
                 [](const Ball& b) { return std::pair{b.center(0) - b.radius, b.center(0) + b.radius}; },
                 [](const HalfSpace& h) {
                   return h.normal(0) > 0.0 ? std::pair{h.offset, kInf} : std::pair{-kInf, -h.offset};
                 },
                 [](const Whole&) { return std::pair{-kInf, kInf}; }},
      shape_);
}

Vec Domain::sample_interior(Stream& rng, double min_distance) const {
  return std::visit(
      Overloaded{[&](const Interval& iv) {
                   const double lo = iv.lo + min_distance, hi = iv.hi - min_distance;
                   if (!(lo < hi)) throw NotApplicable("min_distance exceeds the interval half-width");
                   Vec v(1);
                   v(0) = lo + (hi - lo) * rng.uniform();
                   return v;
                 },
                 [&](const Box& b) {
                   Vec v(b.lo.size());
                   for (Eigen::Index k = 0; k < v.size(); ++k) {
                     const double lo = b.lo(k) + min_distance, hi = b.hi(k) - min_distance;
                     if (!(lo < hi)) throw NotApplicable("min_distance exceeds the box half-width");
                     v(k) = lo + (hi - lo) * rng.uniform();
                   }
                   return v;
                 },
                 [&](const Ball& b) {
                   const double r = b.radius - min_distance;
                   if (!(r > 0.0)) throw NotApplicable("min_distance exceeds the ball radius");
                   const auto dim = b.center.size();
                   Vec dir(dim);
                   for (Eigen::Index k = 0; k < dim; ++k) dir(k) = rng.normal();
                   dir /= dir.norm();
                   const double radial = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
                   return Vec(b.center + radial * dir);
                 },
                 [](const HalfSpace&) -> Vec { throw NotApplicable("cannot sample an unbounded half-space"); },
                 [](const Whole&) -> Vec { throw NotApplicable("cannot sample the whole space"); }},
      shape_);
}

Vec Domain::sample_boundary(Stream& rng) const {
  return std::visit(
      Overloaded{[&](const Interval& iv) {
                   Vec v(1);
                   v(0) = rng.below(2) == 0 ? iv.lo : iv.hi;
                   return v;
                 },
                 [&](const Box& b) {
                   const auto dim = b.lo.size();
                   Vec v(dim);
                   for (Eigen::Index k = 0; k < dim; ++k) v(k) = b.lo(k) + (b.hi(k) - b.lo(k)) * rng.uniform();
                   const auto face = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(dim)));
                   v(face) = rng.below(2) == 0 ? b.lo(face) : b.hi(face);
                   return v;
                 },
                 [&](const Ball& b) {
                   Vec dir(b.center.size());
                   for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = rng.normal();
                   return Vec(b.center + b.radius * dir / dir.norm());
                 },
                 [](const HalfSpace&) -> Vec { throw NotApplicable("cannot sample an unbounded boundary"); },
                 [](const Whole&) -> Vec { throw NotApplicable("the whole space has no boundary"); }},
      shape_);
}

// ---------------------------------------------------------------------------
// Specs

double DiffusionSpec::kill_rate_at(double t, const Vec& env, const Vec& pos) const {
  if (!kill_rate) return 0.0;
  const double k = kill_rate(t, env, pos);
  if (!std::isfinite(k)) throw CoefficientError("non-finite kill rate");
  if (k < 0.0 || k > kill_rate_max)
    throw RateError("kill rate " + std::to_string(k) + " outside [0, " + std::to_string(kill_rate_max) + "]");
  return k;
}

double DiffusionSpec::normal_diffusivity(double t, const Vec& env, const Vec& pos) const {
  const Vec n = domain.inward_normal(pos);
  const Mat sigma = diffusion(t, env, pos);
  const Vec projected = sigma.transpose() * n;
  return projected.squaredNorm();
}

CtmcSpec CtmcSpec::from_rates(const Eigen::MatrixXd& jump_rates, const Eigen::VectorXd& kill_rates) {
  if (jump_rates.rows() != jump_rates.cols() || jump_rates.rows() != kill_rates.size())
    throw InvalidModel("rate matrix and kill vector sizes disagree");
  CtmcSpec spec{jump_rates, kill_rates};
  spec.generator.diagonal().setZero();
  const Eigen::VectorXd out = spec.generator.rowwise().sum();
  spec.generator.diagonal() = -(out + kill_rates);
  spec.validate();
  return spec;
}

void CtmcSpec::validate(double tolerance) const {
  const auto n = generator.rows();
  if (n == 0 || generator.cols() != n || kill_rates.size() != n)
    throw InvalidModel("generator must be square and match the kill vector");
  if (kill_rates.minCoeff() < 0.0) throw InvalidModel("negative kill rate");
  for (Eigen::Index i = 0; i < n; ++i) {
    double scale = std::abs(generator(i, i)) + 1.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && generator(i, j) < 0.0) throw InvalidModel("negative off-diagonal rate");
    if (std::abs(generator.row(i).sum() + kill_rates(i)) > tolerance * scale)
      throw InvalidModel("generator row " + std::to_string(i) + " does not sum to -kill_rate");
  }
}

// ---------------------------------------------------------------------------
// Steppers

Continuous step_diffusion(const Continuous& state, const DiffusionSpec& spec, double t, double dt,
                          const Vec& noise) {
  const int dp = spec.dim_position;
  const int de = spec.dim_env;
  const double sqdt = std::sqrt(dt);
  Continuous out = state;

  if (spec.drift) {
    const Vec eta = spec.drift(t, state.environment, state.position);
    require_finite(eta, "drift");
    out.position += eta * dt;
  }
  if (spec.diffusion) {
    const Mat sigma = spec.diffusion(t, state.environment, state.position);
    require_finite(sigma, "diffusion");
    out.position += sigma * (sqdt * noise.head(dp));
  }
  if (de > 0) {
    if (spec.env_drift) {
      const Vec m = spec.env_drift(t, state.environment, state.position);
      require_finite(m, "environment drift");
      out.environment += m * dt;
    }
    if (spec.env_diffusion) {
      const Mat s = spec.env_diffusion(t, state.environment, state.position);
      require_finite(s, "environment diffusion");
      out.environment += s * (sqdt * noise.segment(dp, de));
    }
  }
  return out;
}

double bridge_crossing_probability(double prev, double next, double lo, double hi, double dt,
                                   double normal_variance) {
  const double scale = normal_variance * dt;
  const double p_lo = std::isfinite(lo) ? std::exp(-2.0 * (prev - lo) * (next - lo) / scale) : 0.0;
  const double p_hi = std::isfinite(hi) ? std::exp(-2.0 * (hi - prev) * (hi - next) / scale) : 0.0;
  return 1.0 - (1.0 - p_lo) * (1.0 - p_hi);
}

std::optional<double> detect_hard_kill(const Vec& prev, const Vec& next, const Domain& domain,
                                       double dt, const HardKillOptions& options, double uniform_draw) {
  std::optional<std::pair<double, double>> bounds;
  if (options.bridge) {
    bounds = domain.one_dimensional_bounds();
    if (!bounds) throw UnsupportedBridge("bridge correction needs a one-dimensional domain");
  }
  if (!domain.has_boundary()) return std::nullopt;
  if (!domain.contains(next)) return domain.exit_fraction(prev, next) * dt;
  if (!options.bridge) return std::nullopt;

  const double p = bridge_crossing_probability(prev(0), next(0), bounds->first, bounds->second, dt,
                                               options.normal_variance);
  if (uniform_draw < p) return dt * clamp_fraction(uniform_draw / p);
  return std::nullopt;
}

SoftKillStep sample_soft_kill(double accumulator, double rate, double rate_max, double dt, double threshold) {
  if (!(rate >= 0.0) || rate > rate_max)
    throw RateError("kill rate " + std::to_string(rate) + " outside [0, " + std::to_string(rate_max) + "]");
  const double increment = rate * dt;
  const double updated = accumulator + increment;
  if (updated < threshold) return {updated, false, 1.0};
  const double fraction = increment > 0.0 ? (threshold - accumulator) / increment : 0.0;
  return {updated, true, clamp_fraction(fraction)};
}

CtmcStep ctmc_step(std::size_t state, const CtmcSpec& spec, Stream& rng) {
  const double total = spec.exit_rate(state);
  if (!(total > 0.0)) return {std::numeric_limits<double>::infinity(), Discrete{state}};
  const double holding = rng.exponential() / total;

  double target = rng.uniform() * total;
  const auto n = spec.n_states();
  for (std::size_t j = 0; j < n; ++j) {
    if (j == state) continue;
    const double rate = spec.generator(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(j));
    if (target < rate) return {holding, Discrete{j}};
    target -= rate;
  }
  if (spec.kill_rates(static_cast<Eigen::Index>(state)) > 0.0) return {holding, Cemetery{}};
  // Rounding left the draw past every jump rate; fall back to the last positive one.
  for (std::size_t j = n; j-- > 0;)
    if (j != state && spec.generator(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(j)) > 0.0)
      return {holding, Discrete{j}};
  return {holding, Cemetery{}};
}

}  // namespace fvsim
