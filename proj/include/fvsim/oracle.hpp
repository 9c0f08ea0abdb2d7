#pragma once

// Exact references for small instances: sub-Markov semigroups of killed
// chains, conditional laws, quasi-stationary distributions, and the killed
// Brownian motion on an interval.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fvsim/process.hpp"

namespace fvsim {

/// P_T f(x) = E_x(f(Z_T) 1{T < tau}) as a matrix over live states.
struct SubMarkovOperator {
  Eigen::MatrixXd matrix;
  double horizon = 0.0;
};

/// exp(t * Q) for a sub-generator Q by uniformization.
///
/// The horizon is cut into pieces with lambda * piece <= 32 so the Poisson
/// weights never underflow; each piece is summed until the Poisson tail drops
/// below `tail_tolerance`, bounded without cancellation.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> uniformized_exponential(
    const Eigen::MatrixBase<Derived>& subgenerator, typename Derived::Scalar t,
    typename Derived::Scalar tail_tolerance = 1e-17) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = subgenerator.rows();
  const Matrix identity = Matrix::Identity(n, n);

  const Scalar lambda = (-subgenerator.diagonal()).maxCoeff();
  if (!(lambda > Scalar(0)) || t == Scalar(0)) return identity;

  const auto pieces = std::max<long>(1, static_cast<long>(std::ceil(lambda * t / Scalar(32))));
  const Scalar tau = t / static_cast<Scalar>(pieces);
  const Scalar mean = lambda * tau;
  const Matrix jump = identity + subgenerator / lambda;

  Matrix piece = Matrix::Zero(n, n);
  Matrix power = identity;
  Scalar weight = std::exp(-mean);
  for (long k = 0;; ++k) {
    piece += weight * power;
    weight *= mean / static_cast<Scalar>(k + 1);
    // Geometric bound on the remaining Poisson mass once past the mode.
    const Scalar ratio = mean / static_cast<Scalar>(k + 2);
    if ((ratio < Scalar(1) && weight / (Scalar(1) - ratio) < tail_tolerance) || k > 100000) break;
    power = power * jump;
  }

  Matrix result = piece;
  for (long p = 1; p < pieces; ++p) result = result * piece;
  return result.unaryExpr([](Scalar v) { return v < Scalar(0) && v >= Scalar(-1e-14) ? Scalar(0) : v; });
}

/// Sub-Markov transition operator of the killed chain at time T.
SubMarkovOperator ctmc_transition(const CtmcSpec& spec, double T);

/// Same operator through a dense eigendecomposition V exp(T Lambda) V^-1.
/// Independent of the uniformization route; used to cross-check it.
Eigen::MatrixXd ctmc_transition_eigen(const CtmcSpec& spec, double T);

/// mu0^T P_T f.
double ctmc_unconditioned(const CtmcSpec& spec, const Eigen::VectorXd& initial, double T,
                          const Eigen::VectorXd& f);

/// mu0^T P_T 1.
double ctmc_survival(const CtmcSpec& spec, const Eigen::VectorXd& initial, double T);

/// E_mu0(f(Z_T) | T < tau). Throws DegenerateConditioning on zero survival mass.
double ctmc_conditional(const CtmcSpec& spec, const Eigen::VectorXd& initial, double T,
                        const Eigen::VectorXd& f);

struct CtmcQsd {
  Eigen::VectorXd distribution;
  /// theta with distribution * Q = -theta * distribution.
  double decay_rate = 0.0;
  long iterations = 0;
};

/// Left principal eigenvector of the sub-generator, normalized to a
/// probability vector, by power iteration on I + Q / (2 max exit rate).
/// Throws EigenError after `max_iterations` without reaching `tolerance`.
CtmcQsd ctmc_qsd(const CtmcSpec& spec, double tolerance = 1e-10, long max_iterations = 1000000);

/// Reference values for Brownian motion sigma * B killed outside (lo, hi).
struct BmIntervalSolution {
  double lo = 0.0, hi = 1.0, sigma = 1.0, horizon = 0.0;
  /// E(f(Z_T) 1{T < tau}).
  double unconditioned = 0.0;
  /// P(T < tau).
  double survival = 0.0;
  /// E(f(Z_T) | T < tau).
  double conditional_expectation = 0.0;
  /// Spectral weights exp(-lambda_k T) * <mu0, e_k> for k = 1, 2, ...
  std::vector<double> modes;

  /// Density of Z_T given T < tau.
  double conditional_density(double y) const;
};

/// Dirichlet spectral series with composite Simpson quadrature.
BmIntervalSolution bm_interval_solve(double lo, double hi, double sigma,
                                     const std::function<double(double)>& initial_density, double T,
                                     const std::function<double(double)>& f, int min_quadrature_points = 512);

/// Same with a point-mass start at x0.
BmIntervalSolution bm_interval_solve_from_point(double lo, double hi, double sigma, double x0, double T,
                                                const std::function<double(double)>& f,
                                                int min_quadrature_points = 512);

/// Quasi-stationary density of killed Brownian motion on (lo, hi).
double bm_interval_qsd_density(double lo, double hi, double y);

/// Integral of the quasi-stationary density over [a, b] within (lo, hi).
double bm_interval_qsd_mass(double lo, double hi, double a, double b);

}  // namespace fvsim
