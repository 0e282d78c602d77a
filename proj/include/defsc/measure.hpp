#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <variant>
#include <vector>

#include "defsc/gauss_jacobi.hpp"
#include "defsc/rng.hpp"
#include "json.hpp"

namespace defsc {

using complex = std::complex<double>;

/// Density Z^-1 (1+v)^alpha (1-v)^beta d(v) on [-1, 1].
struct JacobiMeasure {
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> d_coeffs;  // constant term first
  double z_norm = 1.0;
  /// -mean; recorded so callers can recentre, never applied to the support.
  double shift = 0.0;

  double d(double v) const;
};

struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

struct AtomicMeasure {
  std::vector<Atom> atoms;  // strictly increasing locations, weights sum to 1
};

/// Kernel integrals  int dmu(v) / (lambda v - tau)^n  for n = 1..4.
using KernelMoments = std::array<complex, 4>;

/// A probability law on [-1, 1]: a Jacobi density or a finite atomic mixture.
/// Immutable and cheap to copy (shared representation).
class Measure {
 public:
  static Measure make_jacobi(double alpha, double beta, std::vector<double> d_coeffs);
  static Measure make_atomic(std::vector<Atom> atoms);
  static Measure uniform() { return make_jacobi(0.0, 0.0, {1.0}); }
  static Measure dirac(double location) { return make_atomic({{location, 1.0}}); }

  bool is_jacobi() const;
  bool is_atomic() const { return !is_jacobi(); }
  /// Throws NoDensity for atomic measures.
  const JacobiMeasure& jacobi() const;
  const AtomicMeasure& atomic() const;

  double support_min() const;
  double support_max() const;
  double mean() const { return mean_; }
  /// True for mirror-symmetric laws (alpha == beta and even d, or symmetric atoms).
  bool is_symmetric() const;

  double density(double v) const;
  /// Cumulative distribution function; exact for atoms, spline-based for Jacobi.
  double cdf(double v) const;

  /// Gauss-Jacobi rule for the bare weight with d(v)/Z folded into the weights.
  QuadratureRule quadrature_nodes(std::size_t n) const;

  /// int dmu(v) / (lambda v - tau)^n, n in 1..4, absolute error <= 1e-12.
  complex integrate_kernel(double lambda, complex tau, int n) const;
  /// All four powers at once; same accuracy contract.
  KernelMoments kernel_moments(double lambda, complex tau) const;

  /// int dmu(v) / (1 - v)^power (upper) or / (1 + v)^power (lower). Exact
  /// for Jacobi measures; throws NonIntegrable when the exponent is too small.
  double endpoint_inverse_moment(bool upper, int power) const;

  /// i.i.d. draws; deterministic given the stream state.
  std::vector<double> sample(RngStream& rng, std::size_t count) const;

  nlohmann::json to_json() const;
  static Measure from_json(const nlohmann::json& j);

  struct CdfTable;

 private:
  Measure() = default;

  std::shared_ptr<const std::variant<JacobiMeasure, AtomicMeasure>> rep_;
  std::shared_ptr<const CdfTable> cdf_;
  double mean_ = 0.0;
};

}  // namespace defsc
