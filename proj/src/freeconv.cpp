#include "defsc/freeconv.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>

#include "defsc/error.hpp"

namespace defsc {

std::string_view to_string(EdgeClass c) {
  switch (c) {
    case EdgeClass::SquareRootBoth: return "SquareRootBoth";
    case EdgeClass::SquareRootLowerOnly: return "SquareRootLowerOnly";
    case EdgeClass::SquareRootUpperOnly: return "SquareRootUpperOnly";
    case EdgeClass::PowerBoth: return "PowerBoth";
  }
  return "?";
}

namespace {

constexpr double kLadderTop = 2.0;
constexpr double kLadderRatio = 0.25;
constexpr int kFixedPointBudget = 200;
constexpr int kNewtonBudget = 50;
constexpr double kDamping = 0.5;
constexpr double kSwitchToNewton = 1e-6;
constexpr double kResidualGoal = 1e-13;
constexpr double kResidualAccept = 1e-12;
constexpr int kMaxSubdivision = 12;

void check_inputs(double lambda, SpectralPoint p) {
  if (!std::isfinite(lambda) || !std::isfinite(p.e) || !std::isfinite(p.eta)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite spectral parameter");
  }
  if (lambda < 0.0) throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0");
  if (!(p.eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "eta must be > 0");
}

struct Iterate {
  complex m;
  double residual;
};

// One rung: damped fixed point while it keeps contracting, then safeguarded Newton.
Iterate solve_rung(const Measure& mu, double lambda, complex z, complex m) {
  auto moments = [&](complex mm) { return mu.kernel_moments(lambda, z + mm); };

  KernelMoments k = moments(m);
  double res = std::abs(m - k[0]);
  for (int it = 0; it < kFixedPointBudget && res > kSwitchToNewton; ++it) {
    const complex next = (1.0 - kDamping) * m + kDamping * k[0];
    const KernelMoments kn = moments(next);
    const double rn = std::abs(next - kn[0]);
    if (!(rn < 0.9 * res)) break;
    m = next;
    k = kn;
    res = rn;
  }

  for (int it = 0; it < kNewtonBudget && res > kResidualGoal; ++it) {
    const complex phi = m - k[0];
    const complex dphi = 1.0 - k[1];
    if (dphi == complex(0.0, 0.0)) break;
    complex step = -phi / dphi;
    bool improved = false;
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      const complex trial = m + step;
      if (trial.imag() <= 0.0) continue;
      KernelMoments kt;
      try {
        kt = moments(trial);
      } catch (const Error&) {
        continue;
      }
      const double rt = std::abs(trial - kt[0]);
      if (rt < res) {
        m = trial;
        k = kt;
        res = rt;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return {m, res};
}

complex initial_guess(complex z) { return -1.0 / z; }

// Walks from eta_from (value m_from) to eta_to, halving the log-gap on failure.
Iterate descend(const Measure& mu, double lambda, double e, double eta_from, complex m_from,
                double eta_to, int depth) {
  Iterate r{m_from, std::numeric_limits<double>::infinity()};
  try {
    r = solve_rung(mu, lambda, complex(e, eta_to), m_from);
  } catch (const Error&) {
  }
  if (r.residual <= kResidualAccept && r.m.imag() > 0.0) return r;
  if (depth >= kMaxSubdivision) {
    throw NoConvergenceError("m_fc continuation failed at E = " + std::to_string(e) +
                                 ", eta = " + std::to_string(eta_to),
                             r.m, r.residual);
  }
  const double eta_mid = std::sqrt(eta_from * eta_to);
  const Iterate mid = descend(mu, lambda, e, eta_from, m_from, eta_mid, depth + 1);
  return descend(mu, lambda, e, eta_mid, mid.m, eta_to, depth + 1);
}

using Lookup = std::function<std::optional<complex>(double e, double eta)>;
using Store = std::function<void(double e, double eta, complex m)>;

complex continuation(const Measure& mu, double lambda, SpectralPoint p, const Lookup& lookup,
                     const Store& store) {
  if (auto hit = lookup(p.e, p.eta)) return *hit;

  std::vector<double> rungs;
  for (double eta = kLadderTop; eta > p.eta; eta *= kLadderRatio) rungs.push_back(eta);
  rungs.push_back(p.eta);

  // Resume from the lowest rung already known.
  std::size_t start = 0;
  complex m = initial_guess(complex(p.e, rungs.front()));
  double eta_prev = rungs.front();
  bool have_prev = false;
  for (std::size_t k = rungs.size(); k-- > 0;) {
    if (auto hit = lookup(p.e, rungs[k])) {
      m = *hit;
      eta_prev = rungs[k];
      start = k + 1;
      have_prev = true;
      break;
    }
  }
  for (std::size_t k = start; k < rungs.size(); ++k) {
    Iterate r;
    if (!have_prev) {
      r = solve_rung(mu, lambda, complex(p.e, rungs[k]), m);
      if (!(r.residual <= kResidualAccept && r.m.imag() > 0.0)) {
        throw NoConvergenceError("m_fc failed on the top rung", r.m, r.residual);
      }
      have_prev = true;
    } else {
      r = descend(mu, lambda, p.e, eta_prev, m, rungs[k], 0);
    }
    m = r.m;
    eta_prev = rungs[k];
    store(p.e, rungs[k], m);
  }
  return m;
}

double kernel_h(const Measure& mu, double lambda, double tau) {
  return mu.kernel_moments(lambda, complex(tau, 0.0))[1].real();
}

double kernel_f(const Measure& mu, double lambda, double tau) {
  return tau - mu.kernel_moments(lambda, complex(tau, 0.0))[0].real();
}

// Root of H(tau) = 1 on (lo, hi); H decreases away from the support.
double bisect_h(const Measure& mu, double lambda, double near, double far) {
  double a = near, b = far;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    if (kernel_h(mu, lambda, mid) > 1.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  if (!(kernel_h(mu, lambda, far) < 1.0)) {
    throw NoConvergenceError("endpoint bisection bracket does not contain H = 1", complex(a, 0), 0.0);
  }
  return 0.5 * (a + b);
}

struct Edge {
  double l, tau, exponent;
  bool square_root;
  std::optional<double> threshold;
};

Edge upper_edge(const Measure& mu, double lambda) {
  const double top = lambda * mu.support_max();
  Edge edge{0.0, 0.0, 0.5, true, std::nullopt};
  if (mu.is_jacobi() && lambda > 0.0) {
    const double beta = mu.jacobi().beta;
    if (beta > 1.0) {
      edge.threshold = std::sqrt(mu.endpoint_inverse_moment(true, 2));
      edge.square_root = lambda < *edge.threshold;
    }
    if (!edge.square_root) {
      edge.exponent = beta;
      edge.tau = top;
      edge.l = lambda + mu.endpoint_inverse_moment(true, 1) / lambda;
      return edge;
    }
  }
  edge.tau = bisect_h(mu, lambda, top + 1e-12, top + 50.0);
  edge.l = kernel_f(mu, lambda, edge.tau);
  return edge;
}

Edge lower_edge(const Measure& mu, double lambda) {
  const double bottom = lambda * mu.support_min();
  Edge edge{0.0, 0.0, 0.5, true, std::nullopt};
  if (mu.is_jacobi() && lambda > 0.0) {
    const double alpha = mu.jacobi().alpha;
    if (alpha > 1.0) {
      edge.threshold = std::sqrt(mu.endpoint_inverse_moment(false, 2));
      edge.square_root = lambda < *edge.threshold;
    }
    if (!edge.square_root) {
      edge.exponent = alpha;
      edge.tau = bottom;
      edge.l = -lambda - mu.endpoint_inverse_moment(false, 1) / lambda;
      return edge;
    }
  }
  edge.tau = bisect_h(mu, lambda, bottom - 1e-12, bottom - 50.0);
  edge.l = kernel_f(mu, lambda, edge.tau);
  return edge;
}

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

}  // namespace

double mfc_residual(const Measure& mu, double lambda, SpectralPoint point, complex m) {
  return std::abs(m - mu.kernel_moments(lambda, point.z() + m)[0]);
}

complex solve_mfc(const Measure& mu, double lambda, SpectralPoint point,
                  std::optional<complex> warm_start) {
  check_inputs(lambda, point);
  if (warm_start && warm_start->imag() > 0.0) {
    try {
      const Iterate r = solve_rung(mu, lambda, point.z(), *warm_start);
      if (r.residual <= kResidualAccept && r.m.imag() > 0.0) return r.m;
    } catch (const Error&) {
    }
  }
  return continuation(
      mu, lambda, point, [](double, double) -> std::optional<complex> { return std::nullopt; },
      [](double, double, complex) {});
}

SupportInfo support_endpoints(const Measure& mu, double lambda) {
  if (!std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be finite");
  if (lambda < 0.0) throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0");
  if (mu.is_atomic() && lambda > 1.0) {
    throw Error(ErrorCode::MultiIntervalUnsupported,
                "atomic measures are only supported for lambda <= 1 (single-interval support)");
  }
  const Edge up = upper_edge(mu, lambda);
  Edge low;
  if (mu.is_symmetric()) {
    low = up;
    low.l = -up.l;
    low.tau = -up.tau;
  } else {
    low = lower_edge(mu, lambda);
  }

  SupportInfo s;
  s.l1 = low.l;
  s.l2 = up.l;
  s.tau1 = low.tau;
  s.tau2 = up.tau;
  s.lower_exponent = low.exponent;
  s.upper_exponent = up.exponent;
  s.lambda1 = low.threshold;
  s.lambda2 = up.threshold;
  if (low.square_root && up.square_root) {
    s.edge_class = EdgeClass::SquareRootBoth;
  } else if (low.square_root) {
    s.edge_class = EdgeClass::SquareRootLowerOnly;
  } else if (up.square_root) {
    s.edge_class = EdgeClass::SquareRootUpperOnly;
  } else {
    s.edge_class = EdgeClass::PowerBoth;
  }
  for (const auto& t : {s.lambda1, s.lambda2}) {
    if (t && std::abs(lambda - *t) <= 1e-3 * *t) s.near_threshold = true;
  }
  if (s.near_threshold) {
    spdlog::warn("lambda = {} is within 1e-3 of an edge threshold; edge class may be unreliable",
                 lambda);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Integrated density: adaptive Simpson in t with E = L -+ t^2 on each half.

namespace {

struct SimpsonPanel {
  double t0, t1;
  std::array<double, 5> f;  // samples at t0 + k (t1 - t0) / 4
  double cum0;              // integral up to t0
  double mass;              // Boole value on the panel
};

double boole(const std::array<double, 5>& f, double h) {
  return h / 90.0 * (7 * f[0] + 32 * f[1] + 12 * f[2] + 32 * f[3] + 7 * f[4]);
}

// Integral over [0, s] (s in [0, 1], unit panel) of the quartic through f.
double quartic_partial(const std::array<double, 5>& f, double s) {
  // Newton divided differences on nodes 0, 1/4, 1/2, 3/4, 1.
  std::array<double, 5> c = f;
  const std::array<double, 5> x{0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t j = 1; j < 5; ++j) {
    for (std::size_t i = 4; i >= j; --i) c[i] = (c[i] - c[i - 1]) / (x[i] - x[i - j]);
  }
  // Expand the Newton form into monomials.
  std::array<double, 5> poly{};
  std::array<double, 5> basis{1.0, 0, 0, 0, 0};
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t k = 0; k < 5; ++k) poly[k] += c[j] * basis[k];
    if (j < 4) {
      std::array<double, 5> next{};
      for (std::size_t k = 0; k < 5; ++k) {
        if (k + 1 < 5) next[k + 1] += basis[k];
        next[k] -= x[j] * basis[k];
      }
      basis = next;
    }
  }
  double acc = 0.0, sp = s;
  for (std::size_t k = 0; k < 5; ++k, sp *= s) acc += poly[k] * sp / static_cast<double>(k + 1);
  return acc;
}

struct HalfTable {
  std::vector<SimpsonPanel> panels;
  double total = 0.0;
  double t_max = 0.0;

  double cumulative(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= t_max) return total;
    auto it = std::upper_bound(panels.begin(), panels.end(), t,
                               [](double v, const SimpsonPanel& p) { return v < p.t1; });
    if (it == panels.end()) return total;
    const double h = it->t1 - it->t0;
    const double part = h * quartic_partial(it->f, (t - it->t0) / h);
    return it->cum0 + std::clamp(part, 0.0, it->mass);
  }
};

class SimpsonBuilder {
 public:
  explicit SimpsonBuilder(std::function<double(double)> f) : f_(std::move(f)) {}

  void run(double a, double b, double tol) {
    std::array<double, 5> s{};
    for (int k = 0; k < 5; ++k) s[k] = f_(a + 0.25 * k * (b - a));
    refine(a, b, s, tol, 0);
  }

  HalfTable finish(double t_max) {
    std::sort(panels_.begin(), panels_.end(),
              [](const SimpsonPanel& x, const SimpsonPanel& y) { return x.t0 < y.t0; });
    HalfTable h;
    double cum = 0.0;
    for (auto& p : panels_) {
      p.cum0 = cum;
      cum += p.mass;
    }
    h.panels = std::move(panels_);
    h.total = cum;
    h.t_max = t_max;
    return h;
  }

 private:
  void refine(double a, double b, const std::array<double, 5>& s, double tol, int depth) {
    const double h = b - a;
    const double whole = h / 6.0 * (s[0] + 4 * s[2] + s[4]);
    const double halves = h / 12.0 * (s[0] + 4 * s[1] + 2 * s[2] + 4 * s[3] + s[4]);
    if (std::abs(halves - whole) <= 15.0 * tol || depth >= 40) {
      panels_.push_back({a, b, s, 0.0, std::max(0.0, boole(s, h))});
      return;
    }
    const double m = 0.5 * (a + b);
    std::array<double, 5> left{s[0], f_(a + 0.125 * h), s[1], f_(a + 0.375 * h), s[2]};
    std::array<double, 5> right{s[2], f_(m + 0.125 * h), s[3], f_(m + 0.375 * h), s[4]};
    refine(a, m, left, 0.5 * tol, depth + 1);
    refine(m, b, right, 0.5 * tol, depth + 1);
  }

  std::function<double(double)> f_;
  std::vector<SimpsonPanel> panels_;
};

constexpr double kIdsTolerance = 1e-8;
constexpr double kEdgeZone = 1e-3;
constexpr int kInitialPanels = 8;

}  // namespace

struct FreeConvolution::IdsTable {
  double l1 = 0.0, l2 = 0.0, mid = 0.0;
  HalfTable lower, upper;  // lower: E = l1 + t^2, upper: E = l2 - t^2
  double total = 1.0;

  double n(double e) const {
    if (e <= l1) return 0.0;
    if (e >= l2) return 1.0;
    double v;
    if (e <= mid) {
      v = lower.cumulative(std::sqrt(e - l1)) / total;
    } else {
      v = 1.0 - upper.cumulative(std::sqrt(l2 - e)) / total;
    }
    return std::clamp(v, 0.0, 1.0);
  }
};

namespace {

HalfTable build_half(const std::function<double(double)>& density_at_t, double t_max) {
  SimpsonBuilder builder(density_at_t);
  const double t_edge = std::sqrt(kEdgeZone);
  double start = 0.0;
  if (t_max > t_edge) {
    builder.run(0.0, t_edge, kIdsTolerance * t_edge / t_max);
    start = t_edge;
  }
  const double width = (t_max - start) / kInitialPanels;
  for (int k = 0; k < kInitialPanels; ++k) {
    const double a = start + k * width;
    const double b = k + 1 == kInitialPanels ? t_max : a + width;
    builder.run(a, b, kIdsTolerance * width / t_max);
  }
  return builder.finish(t_max);
}

}  // namespace

FreeConvolution::FreeConvolution(Measure mu, double lambda)
    : mu_(std::move(mu)),
      lambda_(lambda),
      support_(support_endpoints(mu_, lambda)),
      cache_(std::make_shared<Cache>()),
      ids_(std::make_shared<LazyIds>()) {}

complex FreeConvolution::mfc(SpectralPoint p) const {
  check_inputs(lambda_, p);
  auto lookup = [this](double e, double eta) -> std::optional<complex> {
    std::shared_lock lock(cache_->mutex);
    auto it = cache_->values.find({bits(e), bits(eta)});
    if (it == cache_->values.end()) return std::nullopt;
    return it->second;
  };
  auto store = [this](double e, double eta, complex m) {
    const double res = mfc_residual(mu_, lambda_, {e, eta}, m);
    if (!(res <= 1e-11)) {
      throw NoConvergenceError("cache insert with residual above 1e-11", m, res);
    }
    std::unique_lock lock(cache_->mutex);
    cache_->values.emplace(std::make_pair(bits(e), bits(eta)), m);
  };
  return continuation(mu_, lambda_, p, lookup, store);
}

double FreeConvolution::density(double e) const {
  const double delta = 10.0 * kEtaFloor;
  if (e < support_.l1 - delta || e > support_.l2 + delta) return 0.0;
  return std::max(0.0, mfc({e, kEtaFloor}).imag() / M_PI);
}

const FreeConvolution::IdsTable& FreeConvolution::ids() const {
  std::call_once(ids_->once, [this] {
    auto table = std::make_unique<IdsTable>();
    table->l1 = support_.l1;
    table->l2 = support_.l2;
    const bool symmetric = mu_.is_symmetric();
    table->mid = symmetric ? 0.0 : 0.5 * (support_.l1 + support_.l2);
    const double l1 = table->l1, l2 = table->l2, mid = table->mid;
    table->upper = build_half(
        [&](double t) { return t == 0.0 ? 0.0 : 2.0 * t * density(l2 - t * t); }, std::sqrt(l2 - mid));
    if (symmetric) {
      table->lower = table->upper;
    } else {
      table->lower = build_half(
          [&](double t) { return t == 0.0 ? 0.0 : 2.0 * t * density(l1 + t * t); },
          std::sqrt(mid - l1));
    }
    table->total = table->lower.total + table->upper.total;
    if (std::abs(table->total - 1.0) > 1e-4) {
      spdlog::warn("integrated density mass is {} before normalisation", table->total);
    }
    ids_->table = std::move(table);
  });
  return *ids_->table;
}

double FreeConvolution::integrated_density(double e) const { return ids().n(e); }

std::vector<double> FreeConvolution::classical_locations(std::size_t n) const {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "N must be >= 1");
  const IdsTable& t = ids();
  std::vector<double> gamma(n);
  for (std::size_t a = 1; a < n; ++a) {
    const double target = static_cast<double>(a) / static_cast<double>(n);
    double lo = t.l1, hi = t.l2;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (t.n(mid) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    gamma[a - 1] = 0.5 * (lo + hi);
  }
  gamma[n - 1] = support_.l2;
  return gamma;
}

KernelMoments FreeConvolution::r_moments(SpectralPoint p) const {
  const complex m = mfc(p);
  return mu_.kernel_moments(lambda_, p.z() + m);
}

complex FreeConvolution::r_moment(SpectralPoint p, int n) const {
  if (n < 1 || n > 4) throw Error(ErrorCode::InvalidArgument, "R_n needs n in 1..4");
  return r_moments(p)[static_cast<std::size_t>(n - 1)];
}

double FreeConvolution::stability_alpha(SpectralPoint p) const {
  return std::abs(1.0 - r_moment(p, 2));
}

double FreeConvolution::kappa(double e) const {
  return std::min(std::abs(e - support_.l1), std::abs(e - support_.l2));
}

EdgeFit FreeConvolution::edge_exponent_fit(bool upper, double kappa_min, double kappa_max,
                                           std::size_t points) const {
  if (!(kappa_min >= 10.0 * kEtaFloor && kappa_min < kappa_max &&
        kappa_max <= 0.1 * (support_.l2 - support_.l1) && points >= 8)) {
    throw Error(ErrorCode::InvalidArgument, "edge fit needs 10*eta_floor <= kappa_min < kappa_max <= "
                                            "(L2-L1)/10 and at least 8 points");
  }
  std::vector<double> x(points), y(points);
  const double step = std::log(kappa_max / kappa_min) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double k = kappa_min * std::exp(step * static_cast<double>(i));
    const double rho = density(upper ? support_.l2 - k : support_.l1 + k);
    if (!(rho >= 1e-12)) {
      throw Error(ErrorCode::DegenerateFit, "density below 1e-12 at kappa = " + std::to_string(k));
    }
    x[i] = std::log(k);
    y[i] = std::log(rho);
  }
  const double n = static_cast<double>(points);
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < points; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < points; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  EdgeFit fit;
  fit.slope = sxy / sxx;
  fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

std::vector<ProfileRow> FreeConvolution::im_mfc_profile_check(
    const std::vector<SpectralPoint>& grid) const {
  std::vector<ProfileRow> rows;
  rows.reserve(grid.size());
  for (const auto& p : grid) {
    ProfileRow r;
    r.point = p;
    r.im_mfc = mfc(p).imag();
    r.kappa = kappa(p.e);
    r.inside = p.e >= support_.l1 && p.e <= support_.l2;
    const double s = std::sqrt(r.kappa + p.eta);
    r.ratio = r.inside ? r.im_mfc / s : r.im_mfc * s / p.eta;
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json FreeConvolution::to_json(const std::vector<SpectralPoint>& grid) const {
  nlohmann::json out;
  out["lambda"] = lambda_;
  out["measure"] = mu_.to_json();
  out["l1"] = support_.l1;
  out["l2"] = support_.l2;
  out["tau1"] = support_.tau1;
  out["tau2"] = support_.tau2;
  out["edge_class"] = std::string(to_string(support_.edge_class));
  out["lower_exponent"] = support_.lower_exponent;
  out["upper_exponent"] = support_.upper_exponent;
  out["near_threshold"] = support_.near_threshold;
  if (support_.lambda1) out["lambda1"] = *support_.lambda1;
  if (support_.lambda2) out["lambda2"] = *support_.lambda2;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : grid) {
    const complex m = mfc(p);
    rows.push_back({{"e", p.e}, {"eta", p.eta}, {"re", m.real()}, {"im", m.imag()},
                    {"residual", mfc_residual(mu_, lambda_, p, m)}});
  }
  out["grid"] = std::move(rows);
  return out;
}

}  // namespace defsc
