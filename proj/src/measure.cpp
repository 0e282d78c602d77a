#include "defsc/measure.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <string>

#include "defsc/error.hpp"

namespace defsc {

struct Measure::CdfTable {
  std::vector<double> x;      // Chebyshev grid on [-1, 1]
  std::vector<double> f;      // CDF values, f.front() = 0, f.back() = 1
  std::vector<double> slope;  // monotonicity-limited Hermite slopes

  double eval(std::size_t j, double t) const {
    const double h = x[j + 1] - x[j];
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f[j] + (t3 - 2 * t2 + t) * h * slope[j] +
           (-2 * t3 + 3 * t2) * f[j + 1] + (t3 - t2) * h * slope[j + 1];
  }

  double eval_derivative(std::size_t j, double t) const {
    const double h = x[j + 1] - x[j];
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * f[j] + (3 * t2 - 4 * t + 1) * h * slope[j] +
            (-6 * t2 + 6 * t) * f[j + 1] + (3 * t2 - 2 * t) * h * slope[j + 1]) /
           h;
  }

  double cdf(double v) const {
    if (v <= x.front()) return 0.0;
    if (v >= x.back()) return 1.0;
    const auto it = std::upper_bound(x.begin(), x.end(), v);
    const std::size_t j = static_cast<std::size_t>(it - x.begin()) - 1;
    return eval(j, (v - x[j]) / (x[j + 1] - x[j]));
  }

  double inverse(double u) const {
    if (u <= 0.0) return x.front();
    if (u >= 1.0) return x.back();
    auto it = std::upper_bound(f.begin(), f.end(), u);
    std::size_t j = static_cast<std::size_t>(it - f.begin());
    j = std::clamp<std::size_t>(j, 1, f.size() - 1) - 1;
    // The Hermite piece is monotone on [0, 1]; safeguarded Newton.
    double lo = 0.0, hi = 1.0;
    double t = f[j + 1] > f[j] ? (u - f[j]) / (f[j + 1] - f[j]) : 0.5;
    for (int it_count = 0; it_count < 100; ++it_count) {
      const double g = eval(j, t) - u;
      if (g > 0) hi = t; else lo = t;
      if (hi - lo < 1e-16) break;
      const double dg = eval_derivative(j, t) * (x[j + 1] - x[j]);
      double next = dg > 0 ? t - g / dg : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-16) {
        t = next;
        break;
      }
      t = next;
    }
    return x[j] + t * (x[j + 1] - x[j]);
  }
};

namespace {

constexpr std::array<std::size_t, 5> kEscalationLevels{64, 128, 256, 512, 1024};
constexpr double kKernelAbsTol = 1e-14;
constexpr double kKernelRelTol = 1e-14;
constexpr std::size_t kMaxAdaptivePanels = 20000;
constexpr std::size_t kCdfGridIntervals = 4096;
constexpr std::size_t kPositivityGrid = 2001;

double horner(const std::vector<double>& c, double v) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * v + *it;
  return acc;
}

// Nodes needed by the full-interval rule so that every d(v) * v^k moment up
// to degree deg(d) + extra is exact.
std::size_t exact_nodes(const std::vector<double>& d, std::size_t extra_degree) {
  return (d.size() - 1 + extra_degree) / 2 + 2;
}

struct Kernel {
  double lambda;
  complex tau;
};

// Kernel powers together with the integrals of their moduli; the latter set
// the scale at which rounding makes further refinement pointless.
struct PanelSum {
  KernelMoments value{};
  std::array<double, 4> magnitude{};

  void add(complex denom, double w) {
    const complex k = 1.0 / denom;
    const double ak = std::abs(k);
    complex kp = k;
    double akp = ak;
    for (std::size_t i = 0; i < 4; ++i) {
      value[i] += w * kp;
      magnitude[i] += std::abs(w) * akp;
      kp *= k;
      akp *= ak;
    }
  }

  PanelSum& operator+=(const PanelSum& o) {
    for (std::size_t i = 0; i < 4; ++i) {
      value[i] += o.value[i];
      magnitude[i] += o.magnitude[i];
    }
    return *this;
  }
};

// Gauss panel on [a, b]. Panels touching an endpoint carry that endpoint's
// singular factor in the rule; interior panels see a smooth density.
// lambda v - tau is formed from the nearer panel end so that a pole sitting on
// a split point keeps its full relative precision.
PanelSum panel(const JacobiMeasure& m, const Kernel& ker, double a, double b, std::size_t n) {
  PanelSum acc;
  const bool left = a <= -1.0;
  const bool right = b >= 1.0;
  const double inv_z = 1.0 / m.z_norm;
  const double half = 0.5 * (b - a);
  const complex from_a(ker.lambda * a - ker.tau.real(), -ker.tau.imag());
  const complex from_b(ker.lambda * b - ker.tau.real(), -ker.tau.imag());
  auto denom = [&](double x) {
    return x <= 0.0 ? from_a + ker.lambda * half * (1.0 + x) : from_b - ker.lambda * half * (1.0 - x);
  };
  auto node = [&](double x) { return x <= 0.0 ? a + half * (1.0 + x) : b - half * (1.0 - x); };

  if (left && right) {
    const auto& r = cached_gauss_jacobi(n, m.alpha, m.beta);
    for (std::size_t j = 0; j < r.size(); ++j) {
      acc.add(denom(r.nodes[j]), r.weights[j] * m.d(r.nodes[j]) * inv_z);
    }
  } else if (left) {
    const auto& r = cached_gauss_jacobi(n, m.alpha, 0.0);
    const double scale = std::pow(half, m.alpha + 1.0) * inv_z;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double v = node(r.nodes[j]);
      acc.add(denom(r.nodes[j]), r.weights[j] * scale * std::pow(1.0 - v, m.beta) * m.d(v));
    }
  } else if (right) {
    const auto& r = cached_gauss_jacobi(n, 0.0, m.beta);
    const double scale = std::pow(half, m.beta + 1.0) * inv_z;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double v = node(r.nodes[j]);
      acc.add(denom(r.nodes[j]), r.weights[j] * scale * std::pow(1.0 + v, m.alpha) * m.d(v));
    }
  } else {
    const auto& r = cached_gauss_legendre(n);
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double v = node(r.nodes[j]);
      const double dens =
          std::pow(1.0 + v, m.alpha) * std::pow(1.0 - v, m.beta) * m.d(v) * inv_z;
      acc.add(denom(r.nodes[j]), r.weights[j] * half * dens);
    }
  }
  return acc;
}

double tolerance(double magnitude) {
  return std::max(kKernelAbsTol, kKernelRelTol * magnitude);
}

struct PanelEstimate {
  double a, b;
  PanelSum sum;
  std::array<double, 4> error;
  double priority;
};

KernelMoments adaptive_kernel(const JacobiMeasure& m, const Kernel& ker) {
  const double pole = ker.tau.real() / ker.lambda;
  std::array<double, 4> error_total{};
  PanelSum total;

  auto estimate = [&](double a, double b) {
    const PanelSum coarse = panel(m, ker, a, b, 16);
    PanelEstimate p{a, b, panel(m, ker, a, b, 32), {}, 0.0};
    for (std::size_t i = 0; i < 4; ++i) {
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * p.sum.magnitude[i];
      p.error[i] = std::max(std::abs(p.sum.value[i] - coarse.value[i]) - noise, 0.0);
      p.priority = std::max(p.priority, p.error[i] / tolerance(p.sum.magnitude[i] + total.magnitude[i]));
    }
    return p;
  };
  auto cmp = [](const PanelEstimate& x, const PanelEstimate& y) { return x.priority < y.priority; };
  std::priority_queue<PanelEstimate, std::vector<PanelEstimate>, decltype(cmp)> heap(cmp);
  auto push = [&](PanelEstimate p) {
    total += p.sum;
    for (std::size_t i = 0; i < 4; ++i) error_total[i] += p.error[i];
    heap.push(std::move(p));
  };
  auto converged = [&] {
    for (std::size_t i = 0; i < 4; ++i) {
      if (error_total[i] > tolerance(total.magnitude[i])) return false;
    }
    return true;
  };

  push(estimate(-1.0, 1.0));
  std::size_t panels = 1;
  while (!converged() && panels < kMaxAdaptivePanels) {
    const PanelEstimate p = heap.top();
    const double width = p.b - p.a;
    if (width < 1e-15 * std::max(1.0, std::abs(p.a))) break;
    heap.pop();
    for (std::size_t i = 0; i < 4; ++i) {
      total.value[i] -= p.sum.value[i];
      total.magnitude[i] -= p.sum.magnitude[i];
      error_total[i] -= p.error[i];
    }
    double split = 0.5 * (p.a + p.b);
    if (pole > p.a + 0.01 * width && pole < p.b - 0.01 * width) split = pole;
    push(estimate(p.a, split));
    push(estimate(split, p.b));
    ++panels;
  }
  // Re-sum from the leaves so the subtractions above leave no residue.
  KernelMoments result{};
  while (!heap.empty()) {
    for (std::size_t i = 0; i < 4; ++i) result[i] += heap.top().sum.value[i];
    heap.pop();
  }
  return result;
}

// Bernstein-ellipse parameter of the pole seen from [-1, 1].
double bernstein_rho(complex p) {
  const complex s = std::sqrt(p - 1.0) * std::sqrt(p + 1.0);
  return std::max(std::abs(p + s), std::abs(p - s));
}

KernelMoments jacobi_kernel(const JacobiMeasure& m, double lambda, complex tau) {
  const Kernel ker{lambda, tau};
  const complex p = tau / lambda;
  const double rho = bernstein_rho(p);
  // Gauss error decays like rho^(-2n); ask for ~1e-17 relative.
  const double needed = rho > 1.0 ? 39.2 / (2.0 * std::log(rho)) : std::numeric_limits<double>::infinity();

  if (needed <= static_cast<double>(kEscalationLevels.back())) {
    std::size_t level = 0;
    while (level + 1 < kEscalationLevels.size() &&
           static_cast<double>(kEscalationLevels[level]) < needed) {
      ++level;
    }
    PanelSum prev = panel(m, ker, -1.0, 1.0, kEscalationLevels[level]);
    for (std::size_t next = level + 1; next < kEscalationLevels.size(); ++next) {
      PanelSum cur = panel(m, ker, -1.0, 1.0, kEscalationLevels[next]);
      bool ok = true;
      for (std::size_t i = 0; i < 4; ++i) {
        ok = ok && std::abs(cur.value[i] - prev.value[i]) <= tolerance(cur.magnitude[i]);
      }
      if (ok) return cur.value;
      prev = cur;
    }
  }
  return adaptive_kernel(m, ker);
}

void check_d_positive(const std::vector<double>& d) {
  for (std::size_t i = 0; i < kPositivityGrid; ++i) {
    const double v = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(kPositivityGrid - 1);
    if (!(horner(d, v) > 0.0)) {
      throw Error(ErrorCode::NonPositiveDensity,
                  "d(v) <= 0 at v = " + std::to_string(v));
    }
  }
}

std::shared_ptr<const Measure::CdfTable> build_cdf(const JacobiMeasure& m) {
  auto table = std::make_shared<Measure::CdfTable>();
  const std::size_t n = kCdfGridIntervals;
  table->x.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    table->x[j] = -std::cos(M_PI * static_cast<double>(j) / static_cast<double>(n));
  }
  table->x.front() = -1.0;
  table->x.back() = 1.0;

  // Cell masses with the same endpoint-aware panels as the kernel integrator.
  const Kernel unit{0.0, complex(-1.0, 0.0)};  // 1/(0 - (-1)) = 1
  table->f.assign(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double mass = panel(m, unit, table->x[j], table->x[j + 1], 16).value[0].real();
    table->f[j + 1] = table->f[j] + std::max(mass, 0.0);
  }
  const double total = table->f.back();
  for (auto& v : table->f) v /= total;
  table->f.back() = 1.0;

  table->slope.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double v = table->x[j];
    const double dens = std::pow(1.0 + v, m.alpha) * std::pow(1.0 - v, m.beta) * m.d(v) /
                        (m.z_norm * total);
    table->slope[j] = std::isfinite(dens) ? dens : std::numeric_limits<double>::infinity();
  }
  // Fritsch-Carlson limiter keeps every Hermite piece monotone.
  for (std::size_t j = 0; j < n; ++j) {
    const double h = table->x[j + 1] - table->x[j];
    const double delta = (table->f[j + 1] - table->f[j]) / h;
    if (delta <= 0.0) {
      table->slope[j] = 0.0;
      table->slope[j + 1] = 0.0;
      continue;
    }
    double a = table->slope[j] / delta;
    double b = table->slope[j + 1] / delta;
    if (!std::isfinite(a)) a = 3.0;
    if (!std::isfinite(b)) b = 3.0;
    const double r2 = a * a + b * b;
    if (r2 > 9.0) {
      const double t = 3.0 / std::sqrt(r2);
      a *= t;
      b *= t;
    }
    table->slope[j] = a * delta;
    table->slope[j + 1] = b * delta;
  }
  return table;
}

void warn_if_uncentered(double mean) {
  if (std::abs(mean) > 1e-10) {
    spdlog::warn("measure is not centered (mean = {}); using it as-is", mean);
  }
}

}  // namespace

double JacobiMeasure::d(double v) const { return horner(d_coeffs, v); }

Measure Measure::make_jacobi(double alpha, double beta, std::vector<double> d_coeffs) {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidArgument, "Jacobi exponents must be finite");
  }
  if (!(alpha > -1.0) || !(beta > -1.0)) {
    throw Error(ErrorCode::NonIntegrable,
                "Jacobi exponents must exceed -1 (alpha = " + std::to_string(alpha) +
                    ", beta = " + std::to_string(beta) + ")");
  }
  if (d_coeffs.empty()) throw Error(ErrorCode::InvalidArgument, "d(v) needs at least one coefficient");
  for (double c : d_coeffs) {
    if (!std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "d(v) coefficients must be finite");
  }
  check_d_positive(d_coeffs);

  JacobiMeasure jm;
  jm.alpha = alpha;
  jm.beta = beta;
  jm.d_coeffs = std::move(d_coeffs);

  const auto& rule = cached_gauss_jacobi(exact_nodes(jm.d_coeffs, 1), alpha, beta);
  double z = 0.0, first = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double dv = rule.weights[j] * jm.d(rule.nodes[j]);
    z += dv;
    first += dv * rule.nodes[j];
  }
  jm.z_norm = z;
  const double mean = first / z;
  jm.shift = -mean;

  Measure m;
  m.cdf_ = build_cdf(jm);
  m.rep_ = std::make_shared<const std::variant<JacobiMeasure, AtomicMeasure>>(std::move(jm));
  m.mean_ = mean;
  warn_if_uncentered(mean);
  return m;
}

Measure Measure::make_atomic(std::vector<Atom> atoms) {
  if (atoms.empty()) throw Error(ErrorCode::InvalidArgument, "atomic measure needs at least one atom");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    if (!(a.location >= -1.0 && a.location <= 1.0)) {
      throw Error(ErrorCode::SupportViolation, "atom location outside [-1, 1]");
    }
    if (!(a.weight > 0.0)) throw Error(ErrorCode::InvalidArgument, "atom weights must be positive");
    if (i > 0 && !(a.location > atoms[i - 1].location)) {
      throw Error(ErrorCode::InvalidArgument, "atom locations must be strictly increasing");
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "atom weights must sum to 1");
  }
  double mean = 0.0;
  for (const auto& a : atoms) mean += a.weight * a.location;

  Measure m;
  m.rep_ = std::make_shared<const std::variant<JacobiMeasure, AtomicMeasure>>(
      AtomicMeasure{std::move(atoms)});
  m.mean_ = mean;
  warn_if_uncentered(mean);
  return m;
}

bool Measure::is_jacobi() const { return std::holds_alternative<JacobiMeasure>(*rep_); }

const JacobiMeasure& Measure::jacobi() const {
  if (!is_jacobi()) throw Error(ErrorCode::NoDensity, "atomic measure has no density");
  return std::get<JacobiMeasure>(*rep_);
}

const AtomicMeasure& Measure::atomic() const {
  if (is_jacobi()) throw Error(ErrorCode::InvalidArgument, "measure is not atomic");
  return std::get<AtomicMeasure>(*rep_);
}

double Measure::support_min() const {
  return is_jacobi() ? -1.0 : atomic().atoms.front().location;
}

double Measure::support_max() const {
  return is_jacobi() ? 1.0 : atomic().atoms.back().location;
}

bool Measure::is_symmetric() const {
  if (is_jacobi()) {
    const auto& jm = jacobi();
    if (jm.alpha != jm.beta) return false;
    for (std::size_t k = 1; k < jm.d_coeffs.size(); k += 2) {
      if (jm.d_coeffs[k] != 0.0) return false;
    }
    return true;
  }
  const auto& atoms = atomic().atoms;
  for (std::size_t i = 0, j = atoms.size() - 1; i <= j; ++i, --j) {
    if (std::abs(atoms[i].location + atoms[j].location) > 1e-15 ||
        std::abs(atoms[i].weight - atoms[j].weight) > 1e-15) {
      return false;
    }
    if (j == 0) break;
  }
  return true;
}

double Measure::density(double v) const {
  const auto& jm = jacobi();
  if (v < -1.0 || v > 1.0) return 0.0;
  return std::pow(1.0 + v, jm.alpha) * std::pow(1.0 - v, jm.beta) * jm.d(v) / jm.z_norm;
}

double Measure::cdf(double v) const {
  if (is_jacobi()) return cdf_->cdf(v);
  double acc = 0.0;
  for (const auto& a : atomic().atoms) {
    if (a.location <= v) acc += a.weight;
  }
  return std::min(acc, 1.0);
}

QuadratureRule Measure::quadrature_nodes(std::size_t n) const {
  const auto& jm = jacobi();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "quadrature needs at least one node");
  QuadratureRule rule = cached_gauss_jacobi(n, jm.alpha, jm.beta);
  for (std::size_t j = 0; j < rule.size(); ++j) {
    rule.weights[j] *= jm.d(rule.nodes[j]) / jm.z_norm;
  }
  return rule;
}

KernelMoments Measure::kernel_moments(double lambda, complex tau) const {
  if (!std::isfinite(lambda) || !std::isfinite(tau.real()) || !std::isfinite(tau.imag())) {
    throw Error(ErrorCode::InvalidArgument, "kernel arguments must be finite");
  }
  if (is_atomic()) {
    KernelMoments acc{};
    for (const auto& a : atomic().atoms) {
      const complex denom = lambda * a.location - tau;
      if (std::abs(denom) < 1e-14) {
        throw Error(ErrorCode::PoleOnSupport, "kernel pole within 1e-14 of an atom");
      }
      const complex k = 1.0 / denom;
      complex kp = k;
      for (auto& v : acc) {
        v += a.weight * kp;
        kp *= k;
      }
    }
    return acc;
  }

  if (lambda == 0.0) {
    if (tau == complex(0.0, 0.0)) throw Error(ErrorCode::PoleOnSupport, "tau = 0 with lambda = 0");
    const complex k = -1.0 / tau;
    return {k, k * k, k * k * k, k * k * k * k};
  }
  if (tau.imag() == 0.0 && std::abs(tau.real()) <= std::abs(lambda)) {
    throw Error(ErrorCode::PoleOnSupport, "real tau inside lambda * [-1, 1]");
  }
  return jacobi_kernel(jacobi(), lambda, tau);
}

complex Measure::integrate_kernel(double lambda, complex tau, int n) const {
  if (n < 1 || n > 4) throw Error(ErrorCode::InvalidArgument, "kernel power must be in 1..4");
  return kernel_moments(lambda, tau)[static_cast<std::size_t>(n - 1)];
}

double Measure::endpoint_inverse_moment(bool upper, int power) const {
  if (power < 0) throw Error(ErrorCode::InvalidArgument, "power must be non-negative");
  if (is_atomic()) {
    double acc = 0.0;
    for (const auto& a : atomic().atoms) {
      const double base = upper ? 1.0 - a.location : 1.0 + a.location;
      if (base == 0.0 && power > 0) {
        throw Error(ErrorCode::NonIntegrable, "atom at the endpoint");
      }
      acc += a.weight / std::pow(base, power);
    }
    return acc;
  }
  const auto& jm = jacobi();
  const double a = upper ? jm.alpha : jm.alpha - power;
  const double b = upper ? jm.beta - power : jm.beta;
  if (!(a > -1.0) || !(b > -1.0)) {
    throw Error(ErrorCode::NonIntegrable, "inverse endpoint moment diverges");
  }
  const auto& rule = cached_gauss_jacobi(exact_nodes(jm.d_coeffs, 0), a, b);
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) acc += rule.weights[j] * jm.d(rule.nodes[j]);
  return acc / jm.z_norm;
}

std::vector<double> Measure::sample(RngStream& rng, std::size_t count) const {
  std::vector<double> out(count);
  if (is_jacobi()) {
    for (auto& v : out) v = cdf_->inverse(rng.uniform());
    return out;
  }
  const auto& atoms = atomic().atoms;
  std::vector<double> cumulative(atoms.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    acc += atoms[k].weight;
    cumulative[k] = acc;
  }
  for (auto& v : out) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                                atoms.size() - 1);
    v = atoms[k].location;
  }
  return out;
}

nlohmann::json Measure::to_json() const {
  if (is_jacobi()) {
    const auto& jm = jacobi();
    return {{"kind", "jacobi"}, {"alpha", jm.alpha}, {"beta", jm.beta}, {"d", jm.d_coeffs}};
  }
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : atomic().atoms) atoms.push_back({a.location, a.weight});
  return {{"kind", "atomic"}, {"atoms", atoms}};
}

Measure Measure::from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, "measure: " + what); };
  if (!j.is_object()) fail("expected an object");
  if (!j.contains("kind") || !j["kind"].is_string()) fail("missing \"kind\"");
  const std::string kind = j["kind"];
  try {
    if (kind == "jacobi") {
      for (const auto& [key, value] : j.items()) {
        if (key != "kind" && key != "alpha" && key != "beta" && key != "d") fail("unknown field \"" + key + "\"");
      }
      std::vector<double> d = j.contains("d") ? j.at("d").get<std::vector<double>>()
                                              : std::vector<double>{1.0};
      return make_jacobi(j.at("alpha").get<double>(), j.at("beta").get<double>(), std::move(d));
    }
    if (kind == "atomic") {
      for (const auto& [key, value] : j.items()) {
        if (key != "kind" && key != "atoms") fail("unknown field \"" + key + "\"");
      }
      std::vector<Atom> atoms;
      for (const auto& a : j.at("atoms")) {
        if (!a.is_array() || a.size() != 2) fail("atoms must be [location, weight] pairs");
        atoms.push_back({a[0].get<double>(), a[1].get<double>()});
      }
      return make_atomic(std::move(atoms));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  fail("unknown kind \"" + kind + "\"");
  return uniform();  // unreachable
}

}  // namespace defsc
