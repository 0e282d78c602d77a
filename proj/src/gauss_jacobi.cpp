#include "defsc/gauss_jacobi.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "defsc/error.hpp"

namespace defsc {

double jacobi_weight_mass(double alpha, double beta) {
  return std::exp((alpha + beta + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                  std::lgamma(beta + 1.0) - std::lgamma(alpha + beta + 2.0));
}

namespace {

// Recurrence for the weight (1-x)^a (1+x)^b, i.e. the classical P^(a,b).
struct Recurrence {
  std::vector<double> diag;     // alpha_k, k = 0..n-1
  std::vector<double> offdiag;  // sqrt(beta_k), k = 1..n-1 stored at k-1
};

Recurrence jacobi_recurrence(std::size_t n, double a, double b) {
  Recurrence r;
  r.diag.resize(n);
  r.offdiag.resize(n > 0 ? n - 1 : 0);
  const double ab = a + b;
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double s = 2.0 * kk + ab;
    if (k == 0) {
      r.diag[k] = (b - a) / (ab + 2.0);
    } else {
      r.diag[k] = (b * b - a * a) / (s * (s + 2.0));
    }
  }
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double s = 2.0 * kk + ab;
    double beta_k;
    if (k == 1) {
      beta_k = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    } else {
      beta_k = 4.0 * kk * (kk + a) * (kk + b) * (kk + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    r.offdiag[k - 1] = std::sqrt(beta_k);
  }
  return r;
}

}  // namespace

QuadratureRule gauss_jacobi(std::size_t n, double alpha, double beta) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "quadrature needs at least one node");
  if (!(alpha > -1.0) || !(beta > -1.0)) {
    throw Error(ErrorCode::NonIntegrable, "Jacobi exponents must exceed -1");
  }
  // (1+v)^alpha (1-v)^beta is P^(a,b) with a = beta, b = alpha.
  const Recurrence rec = jacobi_recurrence(n + 1, beta, alpha);
  const double mass = jacobi_weight_mass(alpha, beta);

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (n == 1) {
    rule.nodes[0] = rec.diag[0];
    rule.weights[0] = mass;
    return rule;
  }

  const Eigen::VectorXd d =
      Eigen::Map<const Eigen::VectorXd>(rec.diag.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd e =
      Eigen::Map<const Eigen::VectorXd>(rec.offdiag.data(), static_cast<Eigen::Index>(n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenFailure, "Golub-Welsch tridiagonal eigenproblem failed");
  }

  // One or two Newton steps on p_n polish the QR eigenvalues; the Christoffel
  // sum is evaluated at the polished node.
  auto evaluate = [&](double x, double& pn, double& dpn, double& sum) {
    double p_prev = 0.0, dp_prev = 0.0;
    double p = 1.0 / std::sqrt(mass), dp = 0.0;
    sum = p * p;
    for (std::size_t k = 0; k < n; ++k) {
      const double off_prev = k == 0 ? 0.0 : rec.offdiag[k - 1];
      const double p_next = ((x - rec.diag[k]) * p - off_prev * p_prev) / rec.offdiag[k];
      const double dp_next = (p + (x - rec.diag[k]) * dp - off_prev * dp_prev) / rec.offdiag[k];
      p_prev = p;
      dp_prev = dp;
      p = p_next;
      dp = dp_next;
      if (k + 1 < n) sum += p * p;
    }
    pn = p;
    dpn = dp;
  };

  for (std::size_t j = 0; j < n; ++j) {
    double x = solver.eigenvalues()[static_cast<Eigen::Index>(j)];
    double pn = 0.0, dpn = 0.0, sum = 0.0;
    for (int it = 0; it < 2; ++it) {
      evaluate(x, pn, dpn, sum);
      if (dpn == 0.0) break;
      const double step = pn / dpn;
      if (!(std::abs(step) < 1e-8)) break;
      x -= step;
    }
    evaluate(x, pn, dpn, sum);
    rule.nodes[j] = x;
    rule.weights[j] = 1.0 / sum;
  }
  return rule;
}

const QuadratureRule& cached_gauss_jacobi(std::size_t n, double alpha, double beta) {
  using Key = std::tuple<std::size_t, double, double>;
  static std::mutex mutex;
  static std::map<Key, std::unique_ptr<QuadratureRule>> cache;

  const Key key{n, alpha, beta};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return *it->second;
  }
  auto rule = std::make_unique<QuadratureRule>(gauss_jacobi(n, alpha, beta));
  std::lock_guard lock(mutex);
  auto [it, inserted] = cache.emplace(key, std::move(rule));
  return *it->second;
}

}  // namespace defsc
