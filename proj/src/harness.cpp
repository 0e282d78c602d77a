#include "defsc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstring>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

#include "defsc/error.hpp"
#include "defsc/fluctuation.hpp"
#include "defsc/rng.hpp"

#ifndef DEFSC_GIT_DESCRIBE
#define DEFSC_GIT_DESCRIBE "unknown"
#endif

namespace defsc {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

void only_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      config_error(where + ": unknown field \"" + item.key() + "\"");
  }
}

std::uint64_t bits(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  return b;
}

double log_factor(std::size_t n, const Calibration& cal) {
  return cal.c_cal * std::pow(std::log(static_cast<double>(n)), cal.log_power);
}

bool needs_grid(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::LocalLaw:
    case ExperimentKind::OffDiagonalLaw:
    case ExperimentKind::ZetaDecomposition:
    case ExperimentKind::FreeConvOnly:
    case ExperimentKind::DensityOfStates:
    case ExperimentKind::IntegratedDOS:
      return true;
    default:
      return false;
  }
}

bool samples_matrices(ExperimentKind k) {
  return k != ExperimentKind::EdgeExponent && k != ExperimentKind::FreeConvOnly;
}

bool needs_vectors(ExperimentKind k) {
  return k == ExperimentKind::OffDiagonalLaw || k == ExperimentKind::Delocalization;
}

bool has_envelope(ExperimentKind k) { return samples_matrices(k); }

std::string_view reference_name(EnergyReference r) {
  switch (r) {
    case EnergyReference::Absolute: return "absolute";
    case EnergyReference::Lower: return "l1";
    case EnergyReference::Upper: return "l2";
    case EnergyReference::Centre: return "center";
  }
  return "absolute";
}

EnergyReference reference_from(const std::string& s) {
  if (s == "absolute") return EnergyReference::Absolute;
  if (s == "l1") return EnergyReference::Lower;
  if (s == "l2") return EnergyReference::Upper;
  if (s == "center") return EnergyReference::Centre;
  config_error("z_grid.energy_reference must be absolute, l1, l2 or center");
}

std::vector<double> number_list(const json& j, const std::string& where) {
  if (!j.is_array()) config_error(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) config_error(where + ": expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string git_describe() { return DEFSC_GIT_DESCRIBE; }

const std::vector<KindInfo>& experiment_kinds() {
  static const std::vector<KindInfo> kinds = {
      {ExperimentKind::LocalLaw, "|m - m_fc| at each z",
       "strong local law for the averaged resolvent"},
      {ExperimentKind::OffDiagonalLaw, "max_{i!=j} |G_ij| and max_i |G_ii - g_i|",
       "strong local law for individual resolvent entries"},
      {ExperimentKind::Delocalization, "max_{alpha,i} |u_alpha(i)|", "complete eigenvector delocalization"},
      {ExperimentKind::Rigidity, "|mu_alpha - gamma_alpha| per bulk index", "rigidity of eigenvalues"},
      {ExperimentKind::DensityOfStates, "|n(E1,E2) - n_fc(E1,E2)| per window", "local density of states"},
      {ExperimentKind::Spacing, "| |mu_i - mu_j| - |i-j| / (N rho_fc) |", "rigidity of eigenvalue spacings"},
      {ExperimentKind::IntegratedDOS, "|n(E) - n_fc(E)|", "integrated density of states"},
      {ExperimentKind::OperatorNorm, "mu_N - L2", "operator norm estimate"},
      {ExperimentKind::ZetaDecomposition, "|m - m_fc - zeta0|", "potential-driven fluctuation decomposition"},
      {ExperimentKind::EdgeExponent, "log-log slope of rho_fc near an endpoint",
       "square-root versus power-law edge behaviour"},
      {ExperimentKind::FreeConvOnly, "m_fc and its residual on a grid",
       "Pastur relation and support endpoints"},
  };
  return kinds;
}

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::LocalLaw: return "LocalLaw";
    case ExperimentKind::OffDiagonalLaw: return "OffDiagonalLaw";
    case ExperimentKind::Delocalization: return "Delocalization";
    case ExperimentKind::Rigidity: return "Rigidity";
    case ExperimentKind::DensityOfStates: return "DensityOfStates";
    case ExperimentKind::Spacing: return "Spacing";
    case ExperimentKind::IntegratedDOS: return "IntegratedDOS";
    case ExperimentKind::OperatorNorm: return "OperatorNorm";
    case ExperimentKind::ZetaDecomposition: return "ZetaDecomposition";
    case ExperimentKind::EdgeExponent: return "EdgeExponent";
    case ExperimentKind::FreeConvOnly: return "FreeConvOnly";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (const auto& info : experiment_kinds())
    if (to_string(info.kind) == s) return info.kind;
  throw Error(ErrorCode::UnknownKind, "unknown experiment kind '" + std::string(s) + "'");
}

std::vector<std::string> value_columns(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::LocalLaw: return {"raw", "corrected", "im_mfc", "kappa", "bound", "ratio"};
    case ExperimentKind::OffDiagonalLaw: return {"max_offdiag", "max_diag_dev", "bound", "ratio"};
    case ExperimentKind::Delocalization: return {"max_component", "sqrt_n_max", "bound", "ratio"};
    case ExperimentKind::Rigidity: return {"mu", "gamma", "dev", "bound", "ratio"};
    case ExperimentKind::DensityOfStates: return {"width", "count", "n_fc", "dev", "bound", "ratio"};
    case ExperimentKind::Spacing: return {"j", "gap", "predicted", "dev", "bound", "ratio"};
    case ExperimentKind::IntegratedDOS: return {"count", "n_fc", "dev", "bound", "ratio"};
    case ExperimentKind::OperatorNorm: return {"max_eig", "norm", "l2", "excess", "bound", "ratio"};
    case ExperimentKind::ZetaDecomposition:
      return {"raw", "corrected", "zeta0_abs", "zeta_tilde_abs", "zeta_gap", "branch", "bound", "ratio"};
    case ExperimentKind::EdgeExponent: return {"slope", "r2", "expected", "l1", "l2"};
    case ExperimentKind::FreeConvOnly: return {"re", "im", "residual", "l1", "l2"};
  }
  return {};
}

double predicted_bound(ExperimentKind kind, const BoundParams& p, const Calibration& cal) {
  if (p.n == 0) throw Error(ErrorCode::InvalidArgument, "bound needs N >= 1");
  const double n = static_cast<double>(p.n);
  const double lam = p.lambda;
  const double c = log_factor(p.n, cal);
  switch (kind) {
    case ExperimentKind::LocalLaw: {
      if (!(p.eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "LocalLaw bound needs eta > 0");
      const double potential = std::min(std::sqrt(lam) * std::pow(n, -0.25), lam / (std::sqrt(p.kappa + p.eta) * std::sqrt(n)));
      return c * (potential + 1.0 / (n * p.eta));
    }
    case ExperimentKind::OffDiagonalLaw:
      if (!(p.eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "OffDiagonalLaw bound needs eta > 0");
      return c * (std::sqrt(std::max(p.im_mfc, 0.0) / (n * p.eta)) + 1.0 / (n * p.eta));
    case ExperimentKind::Delocalization: return c / std::sqrt(n);
    case ExperimentKind::Rigidity: {
      const std::size_t a = std::min(p.alpha_index, p.n - std::min(p.alpha_index, p.n));
      const double ah = std::max<double>(1.0, static_cast<double>(a));
      const double small = ah <= std::log(n) ? 1.0 : 0.0;
      return c * (std::pow(n, -2.0 / 3.0) * (std::pow(ah, -1.0 / 3.0) + small) +
                  lam * lam * std::pow(n, -1.0 / 3.0) * std::pow(ah, -2.0 / 3.0) + lam / std::sqrt(n));
    }
    case ExperimentKind::DensityOfStates: {
      const double w = p.e2 - p.e1;
      if (!(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "DOS bound needs e1 < e2");
      return c * (1.0 / n + lam * w / (std::sqrt(p.kappa + w) * std::sqrt(n)));
    }
    case ExperimentKind::Spacing: return c / n;
    case ExperimentKind::IntegratedDOS: return c * (1.0 / n + lam / std::sqrt(n));
    case ExperimentKind::OperatorNorm: return c * (lam / std::sqrt(n) + std::pow(n, -2.0 / 3.0));
    case ExperimentKind::ZetaDecomposition:
      if (!(p.eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "ZetaDecomposition bound needs eta > 0");
      return c / (n * p.eta);
    case ExperimentKind::EdgeExponent:
    case ExperimentKind::FreeConvOnly:
      break;
  }
  throw Error(ErrorCode::UnknownKind, "no envelope for kind " + std::string(to_string(kind)));
}

std::vector<double> ZGridSpec::resolve_energies(const SupportInfo& s) const {
  double ref = 0.0;
  switch (reference) {
    case EnergyReference::Absolute: ref = 0.0; break;
    case EnergyReference::Lower: ref = s.l1; break;
    case EnergyReference::Upper: ref = s.l2; break;
    case EnergyReference::Centre: ref = 0.5 * (s.l1 + s.l2); break;
  }
  if (explicit_points()) {
    std::vector<double> out;
    for (const auto& p : points)
      if (std::find(out.begin(), out.end(), p.e) == out.end()) out.push_back(p.e);
    return out;
  }
  std::vector<double> out;
  for (double e : energies) out.push_back(ref + e);
  return out;
}

std::vector<SpectralPoint> ZGridSpec::resolve(const SupportInfo& support, std::size_t n) const {
  if (explicit_points()) return points;
  std::vector<double> eta_list = etas;
  if (eta_list.empty()) {
    double lo;
    if (ladder.min) {
      lo = *ladder.min;
    } else {
      if (n == 0) config_error("z_grid: eta ladder relative to 1/N needs a matrix size");
      lo = ladder.min_times_inverse_n / static_cast<double>(n);
    }
    if (!(lo > 0.0) || lo > ladder.max) config_error("z_grid: eta ladder needs 0 < min <= max");
    for (double eta = ladder.max; eta > lo * (1.0 + 1e-12); eta /= ladder.ratio) eta_list.push_back(eta);
    eta_list.push_back(lo);
  }
  std::sort(eta_list.begin(), eta_list.end(), std::greater<>());
  std::vector<SpectralPoint> out;
  for (double e : resolve_energies(support))
    for (double eta : eta_list) out.push_back({e, eta});
  return out;
}

ZGridSpec ZGridSpec::from_json(const json& j, bool allow_n_relative) {
  ZGridSpec g;
  auto parse_point = [](const json& p) {
    only_keys(p, {"e", "eta"}, "z_grid point");
    SpectralPoint sp{p.at("e").get<double>(), p.at("eta").get<double>()};
    if (!(sp.eta > 0.0) || !std::isfinite(sp.e)) config_error("z_grid point needs finite e and eta > 0");
    return sp;
  };
  if (j.is_array()) {
    for (const auto& p : j) g.points.push_back(parse_point(p));
    if (g.points.empty()) config_error("z_grid: empty point list");
    return g;
  }
  only_keys(j, {"points", "energies", "energy_reference", "eta"}, "z_grid");
  if (j.contains("points")) {
    if (j.contains("energies") || j.contains("eta") || j.contains("energy_reference"))
      config_error("z_grid: points cannot be combined with energies or eta");
    for (const auto& p : j.at("points")) g.points.push_back(parse_point(p));
    if (g.points.empty()) config_error("z_grid: empty point list");
    return g;
  }
  if (!j.contains("energies")) config_error("z_grid: needs points or energies");
  const auto& en = j.at("energies");
  if (en.is_array()) {
    g.energies = number_list(en, "z_grid.energies");
  } else {
    only_keys(en, {"min", "max", "count"}, "z_grid.energies");
    const double lo = en.at("min").get<double>(), hi = en.at("max").get<double>();
    const auto count = en.at("count").get<std::size_t>();
    if (count == 0 || hi < lo || (count == 1 && hi != lo)) config_error("z_grid.energies: inconsistent range");
    for (std::size_t k = 0; k < count; ++k)
      g.energies.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
  }
  if (g.energies.empty()) config_error("z_grid: no energies");
  for (double e : g.energies)
    if (!std::isfinite(e)) config_error("z_grid: energies must be finite");
  if (j.contains("energy_reference")) g.reference = reference_from(j.at("energy_reference").get<std::string>());

  if (j.contains("eta")) {
    const auto& eta = j.at("eta");
    if (eta.is_array()) {
      g.etas = number_list(eta, "z_grid.eta");
      if (g.etas.empty()) config_error("z_grid.eta: empty list");
      for (double x : g.etas)
        if (!(x > 0.0)) config_error("z_grid.eta: values must be positive");
    } else {
      only_keys(eta, {"max", "min", "min_times_inverse_n", "ratio"}, "z_grid.eta");
      if (eta.contains("min") && eta.contains("min_times_inverse_n"))
        config_error("z_grid.eta: give min or min_times_inverse_n, not both");
      if (eta.contains("max")) g.ladder.max = eta.at("max").get<double>();
      if (eta.contains("min")) g.ladder.min = eta.at("min").get<double>();
      if (eta.contains("min_times_inverse_n")) g.ladder.min_times_inverse_n = eta.at("min_times_inverse_n").get<double>();
      if (eta.contains("ratio")) g.ladder.ratio = eta.at("ratio").get<double>();
      if (!(g.ladder.ratio > 1.0)) config_error("z_grid.eta.ratio must exceed 1");
      if (!(g.ladder.max > 0.0)) config_error("z_grid.eta.max must be positive");
      if (g.ladder.min && !(*g.ladder.min > 0.0 && *g.ladder.min <= g.ladder.max))
        config_error("z_grid.eta: needs 0 < min <= max");
      if (!(g.ladder.min_times_inverse_n > 0.0)) config_error("z_grid.eta.min_times_inverse_n must be positive");
    }
  }
  if (!allow_n_relative && g.etas.empty() && !g.ladder.min)
    config_error("z_grid: eta relative to 1/N is not available here");
  return g;
}

json ZGridSpec::to_json() const {
  if (explicit_points()) {
    json pts = json::array();
    for (const auto& p : points) pts.push_back({{"e", p.e}, {"eta", p.eta}});
    return {{"points", pts}};
  }
  json j = {{"energies", energies}, {"energy_reference", reference_name(reference)}};
  if (!etas.empty()) {
    j["eta"] = etas;
  } else {
    json l = {{"max", ladder.max}, {"ratio", ladder.ratio}};
    if (ladder.min) {
      l["min"] = *ladder.min;
    } else {
      l["min_times_inverse_n"] = ladder.min_times_inverse_n;
    }
    j["eta"] = l;
  }
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  try {
    ExperimentSpec s;
    only_keys(j,
              {"kind", "ensemble", "seed", "trials", "z_grid", "window_widths", "indices", "spacing", "edge",
               "quantiles", "output_dir", "tolerances"},
              "spec");
    if (!j.contains("kind")) config_error("spec: missing \"kind\"");
    try {
      s.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    } catch (const Error& e) {
      config_error(e.what());
    }

    if (!j.contains("ensemble")) config_error("spec: missing \"ensemble\"");
    const auto& en = j.at("ensemble");
    only_keys(en, {"n", "lambda", "measure", "matrix_kind", "entry_law"}, "ensemble");
    if (en.contains("n")) {
      for (const auto& x : en.at("n")) {
        const auto n = x.get<std::int64_t>();
        if (n < 1) config_error("ensemble.n: sizes must be >= 1");
        s.n_list.push_back(static_cast<std::size_t>(n));
      }
    }
    if (samples_matrices(s.kind) && s.n_list.empty()) config_error("ensemble.n: needs at least one size");
    if (!en.contains("lambda")) config_error("ensemble: missing \"lambda\"");
    s.lambda_list = number_list(en.at("lambda"), "ensemble.lambda");
    if (s.lambda_list.empty()) config_error("ensemble.lambda: needs at least one value");
    for (double l : s.lambda_list)
      if (!(l >= 0.0) || !std::isfinite(l)) config_error("ensemble.lambda: values must be finite and >= 0");
    if (en.contains("measure")) s.mu = Measure::from_json(en.at("measure"));
    if (en.contains("matrix_kind")) s.matrix_kind = matrix_kind_from_string(en.at("matrix_kind").get<std::string>());
    if (en.contains("entry_law")) s.entry_law = entry_law_from_string(en.at("entry_law").get<std::string>());

    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("trials")) {
      const auto t = j.at("trials").get<std::int64_t>();
      if (t < 1) config_error("trials must be >= 1");
      s.trials = static_cast<std::size_t>(t);
    }

    if (j.contains("z_grid")) {
      s.z_grid = ZGridSpec::from_json(j.at("z_grid"), samples_matrices(s.kind));
    } else if (needs_grid(s.kind)) {
      config_error("spec: kind " + std::string(to_string(s.kind)) + " needs a z_grid");
    }

    if (j.contains("window_widths")) {
      s.window_widths = number_list(j.at("window_widths"), "window_widths");
      if (s.window_widths.empty()) config_error("window_widths: empty");
      for (double w : s.window_widths)
        if (!(w > 0.0)) config_error("window_widths: values must be positive");
    }
    if (j.contains("indices")) {
      const auto& ix = j.at("indices");
      only_keys(ix, {"min_fraction", "max_fraction", "stride"}, "indices");
      if (ix.contains("min_fraction")) s.indices.min_fraction = ix.at("min_fraction").get<double>();
      if (ix.contains("max_fraction")) s.indices.max_fraction = ix.at("max_fraction").get<double>();
      if (ix.contains("stride")) s.indices.stride = ix.at("stride").get<std::size_t>();
      if (!(0.0 <= s.indices.min_fraction && s.indices.min_fraction < s.indices.max_fraction &&
            s.indices.max_fraction <= 1.0) || s.indices.stride == 0)
        config_error("indices: need 0 <= min_fraction < max_fraction <= 1 and stride >= 1");
    }
    if (j.contains("spacing")) {
      const auto& sp = j.at("spacing");
      only_keys(sp, {"min_gap", "max_gap", "stride"}, "spacing");
      if (sp.contains("min_gap")) s.spacing.min_gap = sp.at("min_gap").get<std::size_t>();
      if (sp.contains("max_gap")) s.spacing.max_gap = sp.at("max_gap").get<std::size_t>();
      if (sp.contains("stride")) s.spacing.stride = sp.at("stride").get<std::size_t>();
      if (s.spacing.min_gap == 0 || s.spacing.stride == 0 || (s.spacing.max_gap && *s.spacing.max_gap < s.spacing.min_gap))
        config_error("spacing: need 1 <= min_gap <= max_gap and stride >= 1");
    }
    if (j.contains("edge")) {
      const auto& ed = j.at("edge");
      only_keys(ed, {"upper", "kappa_min", "kappa_max", "points"}, "edge");
      if (ed.contains("upper")) s.edge.upper = ed.at("upper").get<bool>();
      if (ed.contains("kappa_min")) s.edge.kappa_min = ed.at("kappa_min").get<double>();
      if (ed.contains("kappa_max")) s.edge.kappa_max = ed.at("kappa_max").get<double>();
      if (ed.contains("points")) s.edge.points = ed.at("points").get<std::size_t>();
      if (!(s.edge.kappa_min > 0.0 && s.edge.kappa_min < s.edge.kappa_max)) config_error("edge: need 0 < kappa_min < kappa_max");
    }
    if (j.contains("quantiles")) {
      s.quantiles = number_list(j.at("quantiles"), "quantiles");
      for (double q : s.quantiles)
        if (!(q >= 0.0 && q <= 1.0)) config_error("quantiles: values must lie in [0, 1]");
    }
    if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      only_keys(t, {"c_cal", "log_power", "ratio_q95_max", "min_row_success"}, "tolerances");
      if (t.contains("c_cal")) s.tolerances.calibration.c_cal = t.at("c_cal").get<double>();
      if (t.contains("log_power")) s.tolerances.calibration.log_power = t.at("log_power").get<double>();
      if (t.contains("ratio_q95_max")) s.tolerances.ratio_q95_max = t.at("ratio_q95_max").get<double>();
      if (t.contains("min_row_success")) s.tolerances.min_row_success = t.at("min_row_success").get<double>();
      if (!(s.tolerances.calibration.c_cal > 0.0)) config_error("tolerances.c_cal must be positive");
    }
    return s;
  } catch (const json::exception& e) {
    config_error(std::string("spec: ") + e.what());
  }
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open spec file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error("spec file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentSpec::to_json() const {
  json en = {{"lambda", lambda_list},
             {"measure", mu.to_json()},
             {"matrix_kind", defsc::to_string(matrix_kind)},
             {"entry_law", defsc::to_string(entry_law)}};
  if (!n_list.empty()) en["n"] = n_list;
  json j = {{"kind", defsc::to_string(kind)},
            {"ensemble", en},
            {"seed", seed},
            {"trials", trials},
            {"window_widths", window_widths},
            {"indices", {{"min_fraction", indices.min_fraction}, {"max_fraction", indices.max_fraction}, {"stride", indices.stride}}},
            {"edge", {{"upper", edge.upper}, {"kappa_min", edge.kappa_min}, {"kappa_max", edge.kappa_max}, {"points", edge.points}}},
            {"quantiles", quantiles},
            {"tolerances",
             {{"c_cal", tolerances.calibration.c_cal},
              {"log_power", tolerances.calibration.log_power},
              {"ratio_q95_max", tolerances.ratio_q95_max},
              {"min_row_success", tolerances.min_row_success}}}};
  json sp = {{"min_gap", spacing.min_gap}, {"stride", spacing.stride}};
  if (spacing.max_gap) sp["max_gap"] = *spacing.max_gap;
  j["spacing"] = sp;
  if (z_grid.explicit_points() || !z_grid.energies.empty()) j["z_grid"] = z_grid.to_json();
  if (!output_dir.empty()) j["output_dir"] = output_dir;
  return j;
}

std::uint64_t cell_seed(std::uint64_t master, std::size_t n) {
  return splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(n));
}

double quantile(std::vector<double> x, double p) {
  if (x.empty()) return kNaN;
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::vector<Aggregate> aggregate_rows(const std::vector<Row>& rows, const std::vector<std::string>& columns,
                                      const std::vector<double>& quantiles) {
  using Key = std::tuple<std::size_t, std::uint64_t, std::uint64_t, std::uint64_t, std::int64_t>;
  std::map<Key, std::size_t> slot;
  std::vector<std::vector<const Row*>> cells;
  for (const auto& r : rows) {
    const Key k{r.n, bits(r.lambda), bits(r.e), bits(r.eta), r.index};
    auto [it, inserted] = slot.emplace(k, cells.size());
    if (inserted) cells.emplace_back();
    cells[it->second].push_back(&r);
  }
  std::vector<Aggregate> out;
  out.reserve(cells.size() * columns.size());
  for (const auto& cell : cells) {
    const Row& first = *cell.front();
    std::size_t failed = 0;
    for (const Row* r : cell) failed += !r->ok();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::vector<double> x;
      for (const Row* r : cell)
        if (r->ok() && c < r->values.size() && std::isfinite(r->values[c])) x.push_back(r->values[c]);
      Aggregate a;
      a.n = first.n;
      a.lambda = first.lambda;
      a.e = first.e;
      a.eta = first.eta;
      a.index = first.index;
      a.statistic = columns[c];
      a.count = x.size();
      a.failed = failed;
      a.median = quantile(x, 0.5);
      a.q05 = quantile(x, 0.05);
      a.q95 = quantile(x, 0.95);
      for (double q : quantiles) a.extra.push_back(quantile(x, q));
      out.push_back(std::move(a));
    }
  }
  return out;
}

int Report::column(std::string_view name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return static_cast<int>(k);
  return -1;
}

std::vector<double> Report::values(std::string_view statistic) const {
  const int c = column(statistic);
  if (c < 0) throw Error(ErrorCode::InvalidArgument, "no statistic named " + std::string(statistic));
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.ok()) out.push_back(r.values[static_cast<std::size_t>(c)]);
  return out;
}

std::shared_ptr<const SpectralData> SpectrumCache::get_or_compute(const EnsembleConfig& config) {
  const std::string key = config.to_json().dump();
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  auto data = std::make_shared<const SpectralData>(sample_spectrum(config, false));
  std::lock_guard lock(mutex_);
  return entries_.emplace(key, std::move(data)).first->second;
}

namespace {

struct Cell {
  std::size_t n = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::shared_ptr<const FreeConvolution> sol;
  std::string sol_error;
  std::vector<SpectralPoint> grid;
  std::vector<double> energies;
  std::vector<double> gamma;
};

struct TrialContext {
  const ExperimentSpec& spec;
  const Cell& cell;
  std::uint64_t trial;
  std::size_t width;

  Row row(double e = kNaN, double eta = kNaN, std::int64_t index = -1) const {
    Row r;
    r.seed = cell.seed;
    r.trial = trial;
    r.n = cell.n;
    r.lambda = cell.lambda;
    r.e = e;
    r.eta = eta;
    r.index = index;
    return r;
  }

  Row failed(Row r, const std::string& status) const {
    r.status = status;
    r.values.assign(width, kNaN);
    return r;
  }

  double bound(ExperimentKind kind, BoundParams p) const {
    p.n = cell.n;
    p.lambda = cell.lambda;
    return predicted_bound(kind, p, spec.tolerances.calibration);
  }
};

template <class F>
void guarded(std::vector<Row>& out, const TrialContext& ctx, Row base, F&& f) {
  try {
    base.values = f();
    out.push_back(std::move(base));
  } catch (const Error& e) {
    out.push_back(ctx.failed(std::move(base), std::string(to_string(e.code()))));
  }
}

std::vector<std::size_t> bulk_indices(const ExperimentSpec& spec, std::size_t n) {
  const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.indices.min_fraction * n)));
  const auto hi = std::min<std::size_t>(n, static_cast<std::size_t>(std::floor(spec.indices.max_fraction * n)));
  std::vector<std::size_t> out;
  for (std::size_t a = lo; a <= hi; a += spec.indices.stride) out.push_back(a);
  return out;
}

std::vector<std::size_t> spacing_gaps(const SpacingSpec& s, std::size_t n) {
  const auto root = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t hi = std::max(s.min_gap, s.max_gap.value_or(root));
  std::vector<std::size_t> gaps{s.min_gap, (s.min_gap + hi) / 2, hi};
  gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
  return gaps;
}

std::vector<Row> run_trial(const TrialContext& ctx, SpectrumCache* cache) {
  const auto& spec = ctx.spec;
  const auto& cell = ctx.cell;
  const std::size_t n = cell.n;
  std::vector<Row> out;
  if (!cell.sol) {
    out.push_back(ctx.failed(ctx.row(), cell.sol_error));
    return out;
  }
  const FreeConvolution& sol = *cell.sol;

  EnsembleConfig config;
  config.n_size = n;
  config.lambda = cell.lambda;
  config.mu = spec.mu;
  config.kind = spec.matrix_kind;
  config.entry_law = spec.entry_law;
  config.seed = cell.seed;
  config.trial_index = ctx.trial;

  std::shared_ptr<const SpectralData> data;
  try {
    if (needs_vectors(spec.kind)) {
      data = std::make_shared<const SpectralData>(sample_spectrum(config, true));
    } else if (cache) {
      data = cache->get_or_compute(config);
    } else {
      data = std::make_shared<const SpectralData>(sample_spectrum(config, false));
    }
  } catch (const Error& e) {
    out.push_back(ctx.failed(ctx.row(), std::string(to_string(e.code()))));
    return out;
  }
  const auto& ev = data->eigenvalues;
  const double nd = static_cast<double>(n);

  switch (spec.kind) {
    case ExperimentKind::LocalLaw:
    case ExperimentKind::ZetaDecomposition: {
      ZetaHistory history;
      double last_e = kNaN;
      for (const auto& p : cell.grid) {
        if (bits(p.e) != bits(last_e)) history = {};
        last_e = p.e;
        guarded(out, ctx, ctx.row(p.e, p.eta), [&]() -> std::vector<double> {
          const complex diff = empirical_stieltjes(*data, p) - sol.mfc(p);
          const auto terms = fluctuation_terms(data->potential, sol, p, &history);
          const double raw = std::abs(diff);
          const double corrected = std::abs(diff - terms.zeta0);
          const double kappa = sol.kappa(p.e);
          if (spec.kind == ExperimentKind::LocalLaw) {
            const double b = ctx.bound(ExperimentKind::LocalLaw, {.kappa = kappa, .eta = p.eta});
            return {raw, corrected, sol.mfc(p).imag(), kappa, b, raw / b};
          }
          const double b = ctx.bound(ExperimentKind::ZetaDecomposition, {.eta = p.eta});
          return {raw,
                  corrected,
                  std::abs(terms.zeta0),
                  std::abs(terms.zeta_tilde),
                  std::abs(terms.zeta0 - terms.zeta_tilde),
                  static_cast<double>(terms.branch_flag),
                  b,
                  corrected / b};
        });
      }
      break;
    }
    case ExperimentKind::OffDiagonalLaw: {
      const auto& u = *data->eigenvectors;
      for (const auto& p : cell.grid) {
        guarded(out, ctx, ctx.row(p.e, p.eta), [&]() -> std::vector<double> {
          const complex m = sol.mfc(p);
          Eigen::VectorXcd inv(static_cast<Eigen::Index>(n));
          for (std::size_t a = 0; a < n; ++a) inv(a) = 1.0 / (ev[a] - p.z());
          const Eigen::MatrixXcd g = (u * inv.asDiagonal()) * u.adjoint();
          double off = 0.0, diag = 0.0;
          for (Eigen::Index j = 0; j < g.cols(); ++j) {
            for (Eigen::Index i = 0; i < g.rows(); ++i) {
              if (i == j) {
                const complex gi = 1.0 / (cell.lambda * data->potential[i] - p.z() - m);
                diag = std::max(diag, std::abs(g(i, i) - gi));
              } else {
                off = std::max(off, std::abs(g(i, j)));
              }
            }
          }
          const double b = ctx.bound(ExperimentKind::OffDiagonalLaw, {.eta = p.eta, .im_mfc = m.imag()});
          return {off, diag, b, std::max(off, diag) / b};
        });
      }
      break;
    }
    case ExperimentKind::Delocalization: {
      guarded(out, ctx, ctx.row(), [&]() -> std::vector<double> {
        const double s = delocalization_stat(*data);
        const double b = ctx.bound(ExperimentKind::Delocalization, {});
        return {s, std::sqrt(nd) * s, b, s / b};
      });
      break;
    }
    case ExperimentKind::Rigidity: {
      for (std::size_t a : bulk_indices(spec, n)) {
        guarded(out, ctx, ctx.row(kNaN, kNaN, static_cast<std::int64_t>(a)), [&]() -> std::vector<double> {
          const double mu = ev[a - 1];
          const double gamma = cell.gamma[a - 1];
          const double dev = std::abs(mu - gamma);
          const double b = ctx.bound(ExperimentKind::Rigidity, {.alpha_index = a});
          return {mu, gamma, dev, b, dev / b};
        });
      }
      break;
    }
    case ExperimentKind::Spacing: {
      const auto bulk = bulk_indices(spec, n);
      if (bulk.empty()) break;
      const std::size_t last = bulk.back();
      const auto gaps = spacing_gaps(spec.spacing, n);
      for (std::size_t i = bulk.front(); i <= last; i += spec.spacing.stride) {
        for (std::size_t d : gaps) {
          const std::size_t j = i + d;
          if (j > last) continue;
          guarded(out, ctx, ctx.row(kNaN, kNaN, static_cast<std::int64_t>(i)), [&]() -> std::vector<double> {
            const double gap = std::abs(ev[j - 1] - ev[i - 1]);
            const double rho = sol.density(ev[i - 1]);
            if (!(rho > 0.0)) throw Error(ErrorCode::NoDensity, "rho_fc vanishes at an eigenvalue");
            const double predicted = static_cast<double>(d) / (nd * rho);
            const double dev = std::abs(gap - predicted);
            const double b = ctx.bound(ExperimentKind::Spacing, {});
            return {static_cast<double>(j), gap, predicted, dev, b, dev / b};
          });
        }
      }
      break;
    }
    case ExperimentKind::DensityOfStates: {
      std::int64_t window = 0;
      for (double c : cell.energies) {
        for (double w : spec.window_widths) {
          guarded(out, ctx, ctx.row(c, kNaN, window++), [&]() -> std::vector<double> {
            const double e1 = c - 0.5 * w, e2 = c + 0.5 * w;
            const double count = counting(*data, e1, e2);
            const double nfc = sol.integrated_density(e2) - sol.integrated_density(e1);
            const double dev = std::abs(count - nfc);
            const double b = ctx.bound(ExperimentKind::DensityOfStates, {.kappa = sol.kappa(c), .e1 = e1, .e2 = e2});
            return {w, count, nfc, dev, b, dev / b};
          });
        }
      }
      break;
    }
    case ExperimentKind::IntegratedDOS: {
      for (double e : cell.energies) {
        guarded(out, ctx, ctx.row(e), [&]() -> std::vector<double> {
          const double count = counting(*data, -std::numeric_limits<double>::infinity(), e);
          const double nfc = sol.integrated_density(e);
          const double dev = std::abs(count - nfc);
          const double b = ctx.bound(ExperimentKind::IntegratedDOS, {});
          return {count, nfc, dev, b, dev / b};
        });
      }
      break;
    }
    case ExperimentKind::OperatorNorm: {
      guarded(out, ctx, ctx.row(), [&]() -> std::vector<double> {
        const double top = ev.back();
        const double excess = top - sol.l2();
        const double b = ctx.bound(ExperimentKind::OperatorNorm, {});
        return {top, operator_norm(*data), sol.l2(), excess, b, std::max(excess, 0.0) / b};
      });
      break;
    }
    case ExperimentKind::EdgeExponent:
    case ExperimentKind::FreeConvOnly:
      break;
  }
  return out;
}

std::vector<Row> run_deterministic(const ExperimentSpec& spec, const Cell& cell, std::size_t width) {
  std::vector<Row> out;
  TrialContext ctx{spec, cell, 0, width};
  if (!cell.sol) {
    out.push_back(ctx.failed(ctx.row(), cell.sol_error));
    return out;
  }
  const FreeConvolution& sol = *cell.sol;
  if (spec.kind == ExperimentKind::EdgeExponent) {
    const std::int64_t edge = spec.edge.upper ? 1 : 0;
    guarded(out, ctx, ctx.row(kNaN, kNaN, edge), [&]() -> std::vector<double> {
      const auto fit = sol.edge_exponent_fit(spec.edge.upper, spec.edge.kappa_min, spec.edge.kappa_max, spec.edge.points);
      const auto& s = sol.support();
      return {fit.slope, fit.r2, spec.edge.upper ? s.upper_exponent : s.lower_exponent, s.l1, s.l2};
    });
    return out;
  }
  for (const auto& p : cell.grid) {
    guarded(out, ctx, ctx.row(p.e, p.eta), [&]() -> std::vector<double> {
      const complex m = sol.mfc(p);
      return {m.real(), m.imag(), mfc_residual(sol.measure(), sol.lambda(), p, m), sol.l1(), sol.l2()};
    });
  }
  return out;
}

}  // namespace

Report run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  pin_blas_threads();
  Report report;
  report.spec = spec;
  report.columns = value_columns(spec.kind);
  report.threads = std::max<std::size_t>(1, options.threads);
  const std::size_t width = report.columns.size();

  std::map<std::uint64_t, std::shared_ptr<const FreeConvolution>> solutions;
  std::map<std::uint64_t, std::string> solution_errors;
  for (double lambda : spec.lambda_list) {
    try {
      solutions[bits(lambda)] = std::make_shared<const FreeConvolution>(spec.mu, lambda);
    } catch (const Error& e) {
      solution_errors[bits(lambda)] = std::string(to_string(e.code()));
      spdlog::warn("lambda = {}: {}", lambda, e.what());
    }
  }

  const bool sampled = samples_matrices(spec.kind);
  const std::vector<std::size_t> sizes = sampled ? spec.n_list : std::vector<std::size_t>{0};
  std::vector<Cell> cells;
  for (std::size_t n : sizes) {
    for (double lambda : spec.lambda_list) {
      Cell c;
      c.n = n;
      c.lambda = lambda;
      c.seed = sampled ? cell_seed(spec.seed, n) : spec.seed;
      auto it = solutions.find(bits(lambda));
      if (it != solutions.end()) {
        c.sol = it->second;
        if (needs_grid(spec.kind)) {
          c.grid = spec.z_grid.resolve(c.sol->support(), n);
          c.energies = spec.z_grid.resolve_energies(c.sol->support());
        }
        if (spec.kind == ExperimentKind::Rigidity) {
          try {
            c.gamma = c.sol->classical_locations(n);
          } catch (const Error& e) {
            c.sol.reset();
            c.sol_error = std::string(to_string(e.code()));
          }
        }
      } else {
        c.sol_error = solution_errors[bits(lambda)];
      }
      for (const auto& p : c.grid) {
        if (n > 0 && (p.eta * static_cast<double>(n) < 1.0 || p.eta > 3.0)) {
          report.flags.push_back("N = " + std::to_string(n) + ": eta = " + format_double(p.eta) +
                                 " lies outside [1/N, 3]");
        }
      }
      cells.push_back(std::move(c));
    }
  }

  struct Task {
    std::size_t cell;
    std::uint64_t trial;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::size_t trials = sampled ? spec.trials : 1;
    for (std::uint64_t t = 0; t < trials; ++t) tasks.push_back({c, t});
  }

  std::vector<std::vector<Row>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const auto& task = tasks[k];
      const Cell& cell = cells[task.cell];
      if (!sampled) {
        results[k] = run_deterministic(spec, cell, width);
        continue;
      }
      TrialContext ctx{spec, cell, task.trial, width};
      try {
        results[k] = run_trial(ctx, options.cache);
      } catch (const Error& e) {
        results[k] = {ctx.failed(ctx.row(), std::string(to_string(e.code())))};
      }
    }
  };
  const std::size_t nthreads = std::min(report.threads, std::max<std::size_t>(1, tasks.size()));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(worker);
  }

  for (auto& r : results)
    for (auto& row : r) report.rows.push_back(std::move(row));

  report.aggregates = aggregate_rows(report.rows, report.columns, spec.quantiles);
  std::size_t ok = 0;
  for (const auto& r : report.rows) ok += r.ok();
  report.row_success = report.rows.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(report.rows.size());
  report.rows_pass = report.row_success >= spec.tolerances.min_row_success;
  if (has_envelope(spec.kind)) {
    report.ratio_q95 = quantile(report.values("ratio"), 0.95);
    report.envelope_pass = report.ratio_q95 <= spec.tolerances.ratio_q95_max;
  } else {
    report.ratio_q95 = kNaN;
    report.envelope_pass = true;
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

ScalingFit scaling_fit(const Report& report, ScalingAxis axis, std::string_view statistic) {
  const int c = report.column(statistic);
  if (c < 0) throw Error(ErrorCode::InvalidArgument, "no statistic named " + std::string(statistic));
  std::map<double, std::vector<double>> groups;
  for (const auto& r : report.rows) {
    if (!r.ok()) continue;
    const double x = axis == ScalingAxis::N ? static_cast<double>(r.n) : r.eta;
    const double y = r.values[static_cast<std::size_t>(c)];
    if (std::isfinite(x) && std::isfinite(y)) groups[x].push_back(y);
  }
  if (groups.size() < 3) throw Error(ErrorCode::InsufficientPoints, "scaling fit needs at least 3 distinct x values");
  std::vector<double> lx, ly;
  for (auto& [x, ys] : groups) {
    const double med = quantile(ys, 0.5);
    if (!(x > 0.0) || !(med > 0.0)) throw Error(ErrorCode::InvalidArgument, "scaling fit needs positive values");
    lx.push_back(std::log(x));
    ly.push_back(std::log(med));
  }
  const double k = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

std::string rows_csv(const Report& report) {
  std::ostringstream os;
  os << "seed,trial,n,lambda,e,eta,index,status";
  for (const auto& c : report.columns) os << ',' << c;
  os << '\n';
  for (const auto& r : report.rows) {
    os << r.seed << ',' << r.trial << ',' << r.n << ',' << format_double(r.lambda) << ',' << format_double(r.e)
       << ',' << format_double(r.eta) << ',';
    if (r.index >= 0) os << r.index;
    os << ',' << r.status;
    for (double v : r.values) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

std::string aggregates_csv(const Report& report) {
  std::ostringstream os;
  os << "n,lambda,e,eta,index,statistic,count,failed,median,q05,q95";
  for (double q : report.spec.quantiles) os << ",q" << format_double(q);
  os << '\n';
  for (const auto& a : report.aggregates) {
    os << a.n << ',' << format_double(a.lambda) << ',' << format_double(a.e) << ',' << format_double(a.eta) << ',';
    if (a.index >= 0) os << a.index;
    os << ',' << a.statistic << ',' << a.count << ',' << a.failed << ',' << format_double(a.median) << ','
       << format_double(a.q05) << ',' << format_double(a.q95);
    for (double q : a.extra) os << ',' << format_double(q);
    os << '\n';
  }
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

json num(double x) { return std::isnan(x) ? json(nullptr) : json(x); }

double from_num(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json report_json(const Report& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json values = json::array();
    for (double v : r.values) values.push_back(num(v));
    rows.push_back({r.seed, r.trial, r.n, r.lambda, num(r.e), num(r.eta), r.index, r.status, values});
  }
  json aggs = json::array();
  for (const auto& a : report.aggregates) {
    json extra = json::array();
    for (double q : a.extra) extra.push_back(num(q));
    aggs.push_back({{"n", a.n},
                    {"lambda", a.lambda},
                    {"e", num(a.e)},
                    {"eta", num(a.eta)},
                    {"index", a.index},
                    {"statistic", a.statistic},
                    {"count", a.count},
                    {"failed", a.failed},
                    {"median", num(a.median)},
                    {"q05", num(a.q05)},
                    {"q95", num(a.q95)},
                    {"quantiles", extra}});
  }
  return {{"spec", report.spec.to_json()},
          {"columns", report.columns},
          {"row_fields", {"seed", "trial", "n", "lambda", "e", "eta", "index", "status", "values"}},
          {"rows", rows},
          {"aggregates", aggs},
          {"flags", report.flags},
          {"acceptance",
           {{"row_success", report.row_success},
            {"rows_pass", report.rows_pass},
            {"ratio_q95", num(report.ratio_q95)},
            {"envelope_pass", report.envelope_pass}}},
          {"provenance",
           {{"seed", report.spec.seed},
            {"git_describe", git_describe()},
            {"threads", report.threads},
            {"wall_clock_seconds", report.wall_clock_seconds}}}};
}

}  // namespace

void emit_report(const Report& report, const std::filesystem::path& dir, ReportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "rows.csv", rows_csv(report));
  write_file(dir / "aggregates.csv", aggregates_csv(report));
  json files = {"rows.csv", "aggregates.csv"};
  if (format == ReportFormat::Json) {
    write_file(dir / "report.json", report_json(report).dump() + "\n");
    files.push_back("report.json");
  }
  const json manifest = {{"spec", report.spec.to_json()},
                         {"git_describe", git_describe()},
                         {"seed", report.spec.seed},
                         {"threads", report.threads},
                         {"wall_clock_seconds", report.wall_clock_seconds},
                         {"row_success", report.row_success},
                         {"files", files}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Report read_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + (dir / "report.json").string());
  try {
    const json j = json::parse(in);
    Report r;
    r.spec = ExperimentSpec::from_json(j.at("spec"));
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& x : j.at("rows")) {
      Row row;
      row.seed = x.at(0).get<std::uint64_t>();
      row.trial = x.at(1).get<std::uint64_t>();
      row.n = x.at(2).get<std::size_t>();
      row.lambda = x.at(3).get<double>();
      row.e = from_num(x.at(4));
      row.eta = from_num(x.at(5));
      row.index = x.at(6).get<std::int64_t>();
      row.status = x.at(7).get<std::string>();
      for (const auto& v : x.at(8)) row.values.push_back(from_num(v));
      r.rows.push_back(std::move(row));
    }
    for (const auto& x : j.at("aggregates")) {
      Aggregate a;
      a.n = x.at("n").get<std::size_t>();
      a.lambda = x.at("lambda").get<double>();
      a.e = from_num(x.at("e"));
      a.eta = from_num(x.at("eta"));
      a.index = x.at("index").get<std::int64_t>();
      a.statistic = x.at("statistic").get<std::string>();
      a.count = x.at("count").get<std::size_t>();
      a.failed = x.at("failed").get<std::size_t>();
      a.median = from_num(x.at("median"));
      a.q05 = from_num(x.at("q05"));
      a.q95 = from_num(x.at("q95"));
      for (const auto& q : x.at("quantiles")) a.extra.push_back(from_num(q));
      r.aggregates.push_back(std::move(a));
    }
    r.flags = j.at("flags").get<std::vector<std::string>>();
    const auto& acc = j.at("acceptance");
    r.row_success = acc.at("row_success").get<double>();
    r.rows_pass = acc.at("rows_pass").get<bool>();
    r.ratio_q95 = from_num(acc.at("ratio_q95"));
    r.envelope_pass = acc.at("envelope_pass").get<bool>();
    const auto& prov = j.at("provenance");
    r.threads = prov.at("threads").get<std::size_t>();
    r.wall_clock_seconds = prov.at("wall_clock_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed report.json: " + std::string(e.what()));
  }
}

}  // namespace defsc
