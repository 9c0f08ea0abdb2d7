#include "fvsim/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <numbers>

#include "fvsim/errors.hpp"

namespace fvsim {

namespace {

constexpr double kPi = std::numbers::pi;

/// Composite Simpson rule on [a, b] with `intervals` (even) sub-intervals.
class Simpson {
 public:
  Simpson(double a, double b, int intervals) : a_(a), h_((b - a) / intervals), n_(intervals) {}

  int size() const { return n_ + 1; }
  double node(int i) const { return a_ + h_ * i; }
  double weight(int i) const {
    if (i == 0 || i == n_) return h_ / 3.0;
    return (i % 2 == 1 ? 4.0 : 2.0) * h_ / 3.0;
  }

 private:
  double a_, h_;
  int n_;
};

/// Number of modes needed so the first neglected one is below 1e-12.
int mode_count(double decay_per_k2, double amplitude) {
  int k = 1;
  while (k < 20000 && 2.0 * amplitude * std::exp(-decay_per_k2 * k * k) >= 1e-12) ++k;
  return k;
}

BmIntervalSolution assemble(double lo, double hi, double sigma, double T,
                            const std::vector<double>& start_coefficients,
                            const std::function<double(double)>& f, int min_points) {
  const double L = hi - lo;
  const double c = kPi * kPi * sigma * sigma * T / (2.0 * L * L);
  const int K = static_cast<int>(start_coefficients.size());

  int intervals = std::max(min_points, 32 * K);
  if (intervals % 2) ++intervals;
  const Simpson rule(lo, hi, intervals);
  std::vector<double> fx(rule.size());
  for (int i = 0; i < rule.size(); ++i) fx[i] = f(rule.node(i));

  BmIntervalSolution out{lo, hi, sigma, T, 0.0, 0.0, 0.0, {}};
  out.modes.resize(K);
  for (int k = 1; k <= K; ++k) {
    const double decay = std::exp(-c * k * k);
    double fk = 0.0;
    double onek = 0.0;
    for (int i = 0; i < rule.size(); ++i) {
      const double s = std::sin(k * kPi * (rule.node(i) - lo) / L) * rule.weight(i);
      fk += fx[i] * s;
      onek += s;
    }
    const double weight = decay * start_coefficients[k - 1];
    out.modes[k - 1] = weight;
    out.unconditioned += (2.0 / L) * weight * fk;
    out.survival += (2.0 / L) * weight * onek;
  }
  out.conditional_expectation = out.unconditioned / out.survival;
  return out;
}

}  // namespace

SubMarkovOperator ctmc_transition(const CtmcSpec& spec, double T) {
  if (T < 0.0) throw InvalidModel("negative horizon");
  return {uniformized_exponential(spec.generator, T), T};
}

Eigen::MatrixXd ctmc_transition_eigen(const CtmcSpec& spec, double T) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(spec.generator);
  if (solver.info() != Eigen::Success) throw EigenError("eigendecomposition failed");
  const Eigen::MatrixXcd V = solver.eigenvectors();
  const Eigen::VectorXcd growth = (solver.eigenvalues() * T).array().exp().matrix();
  return (V * growth.asDiagonal() * V.inverse()).real();
}

double ctmc_unconditioned(const CtmcSpec& spec, const Eigen::VectorXd& initial, double T,
                          const Eigen::VectorXd& f) {
  return initial.dot(ctmc_transition(spec, T).matrix * f);
}

double ctmc_survival(const CtmcSpec& spec, const Eigen::VectorXd& initial, double T) {
  return ctmc_unconditioned(spec, initial, T, Eigen::VectorXd::Ones(spec.generator.rows()));
}

double ctmc_conditional(const CtmcSpec& spec, const Eigen::VectorXd& initial, double T,
                        const Eigen::VectorXd& f) {
  const Eigen::MatrixXd P = ctmc_transition(spec, T).matrix;
  const Eigen::RowVectorXd law = initial.transpose() * P;
  const double mass = law.sum();
  if (!(mass > 0.0)) throw DegenerateConditioning("zero survival mass");
  return law.dot(f) / mass;
}

CtmcQsd ctmc_qsd(const CtmcSpec& spec, double tolerance, long max_iterations) {
  const Eigen::MatrixXd& Q = spec.generator;
  const auto n = Q.rows();
  const double lambda = 2.0 * std::max((-Q.diagonal()).maxCoeff(), 1e-300);
  const Eigen::MatrixXd jump = Eigen::MatrixXd::Identity(n, n) + Q / lambda;

  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (long it = 1; it <= max_iterations; ++it) {
    v = v * jump;
    v /= v.sum();
    if (it % 8 == 0 || it == max_iterations) {
      const Eigen::RowVectorXd vq = v * Q;
      const double theta = -vq.sum();
      const double residual = (vq + theta * v).lpNorm<1>() / lambda;
      if (residual < tolerance) return {v.transpose(), theta, it};
    }
  }
  throw EigenError("power iteration did not converge");
}

double BmIntervalSolution::conditional_density(double y) const {
  const double L = hi - lo;
  double p = 0.0;
  for (std::size_t k = 1; k <= modes.size(); ++k)
    p += modes[k - 1] * std::sin(static_cast<double>(k) * kPi * (y - lo) / L);
  return (2.0 / L) * p / survival;
}

BmIntervalSolution bm_interval_solve(double lo, double hi, double sigma,
                                     const std::function<double(double)>& initial_density, double T,
                                     const std::function<double(double)>& f, int min_quadrature_points) {
  if (!(T > 0.0)) throw InvalidModel("horizon must be positive");
  const double L = hi - lo;
  const int K = mode_count(kPi * kPi * sigma * sigma * T / (2.0 * L * L), 1.0);
  int intervals = std::max(min_quadrature_points, 32 * K);
  if (intervals % 2) ++intervals;
  const Simpson rule(lo, hi, intervals);

  std::vector<double> start(K, 0.0);
  for (int i = 0; i < rule.size(); ++i) {
    const double x = rule.node(i);
    const double m = initial_density(x) * rule.weight(i);
    if (m == 0.0) continue;
    for (int k = 1; k <= K; ++k) start[k - 1] += m * std::sin(k * kPi * (x - lo) / L);
  }
  return assemble(lo, hi, sigma, T, start, f, min_quadrature_points);
}

BmIntervalSolution bm_interval_solve_from_point(double lo, double hi, double sigma, double x0, double T,
                                                const std::function<double(double)>& f,
                                                int min_quadrature_points) {
  if (!(T > 0.0)) throw InvalidModel("horizon must be positive");
  const double L = hi - lo;
  const int K = mode_count(kPi * kPi * sigma * sigma * T / (2.0 * L * L), 1.0);
  std::vector<double> start(K);
  for (int k = 1; k <= K; ++k) start[k - 1] = std::sin(k * kPi * (x0 - lo) / L);
  return assemble(lo, hi, sigma, T, start, f, min_quadrature_points);
}

double bm_interval_qsd_density(double lo, double hi, double y) {
  const double L = hi - lo;
  if (y <= lo || y >= hi) return 0.0;
  return kPi / (2.0 * L) * std::sin(kPi * (y - lo) / L);
}

double bm_interval_qsd_mass(double lo, double hi, double a, double b) {
  const double L = hi - lo;
  a = std::clamp(a, lo, hi);
  b = std::clamp(b, lo, hi);
  return 0.5 * (std::cos(kPi * (a - lo) / L) - std::cos(kPi * (b - lo) / L));
}

}  // namespace fvsim
