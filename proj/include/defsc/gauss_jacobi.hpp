#pragma once

#include <cstddef>
#include <vector>

namespace defsc {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss rule on [-1, 1] for the weight (1+v)^alpha (1-v)^beta.
///
/// Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of the
/// orthonormal recurrence (Golub-Welsch). Weights are the Christoffel numbers
/// 1 / sum_k p_k(x)^2 evaluated with the same recurrence, which is equivalent
/// to the squared first eigenvector components but costs O(n^2).
QuadratureRule gauss_jacobi(std::size_t n, double alpha, double beta);

/// Same rule, memoised process-wide. Safe to call concurrently; the returned
/// reference stays valid for the lifetime of the process.
const QuadratureRule& cached_gauss_jacobi(std::size_t n, double alpha, double beta);

inline const QuadratureRule& cached_gauss_legendre(std::size_t n) {
  return cached_gauss_jacobi(n, 0.0, 0.0);
}

/// Total mass of the Jacobi weight: 2^(a+b+1) B(a+1, b+1).
double jacobi_weight_mass(double alpha, double beta);

}  // namespace defsc
