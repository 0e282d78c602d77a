#include "defsc/fluctuation.hpp"

#include <cmath>

#include "defsc/error.hpp"

namespace defsc {

namespace {

struct Moments {
  complex m;
  KernelMoments big_r;
  std::array<complex, 3> small_r;
};

Moments moments(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "potential is empty");
  Moments out;
  out.m = sol.mfc(point);
  out.big_r = sol.r_moments(point);
  const complex tau = point.z() + out.m;
  const double lambda = sol.lambda();
  // Summing per-term deviations keeps r_n exactly zero when every v_i sits on one atom.
  std::array<complex, 3> dev{};
  for (double x : v) {
    const complex denom = lambda * x - tau;
    if (std::abs(denom) < 1e-14) throw Error(ErrorCode::PoleOnSupport, "lambda v_i - z - m_fc vanishes");
    const complex k = 1.0 / denom;
    complex kp = k;
    for (std::size_t n = 0; n < 3; ++n) {
      dev[n] += kp - out.big_r[n];
      kp *= k;
    }
  }
  for (std::size_t n = 0; n < 3; ++n) out.small_r[n] = dev[n] / static_cast<double>(v.size());
  return out;
}

complex tilde_from(const Moments& mo) {
  const complex denom = 1.0 - mo.big_r[1];
  if (std::abs(denom) <= 1e-10) throw Error(ErrorCode::EdgeDegeneracy, "|1 - R_2| <= 1e-10");
  return mo.small_r[0] / denom;
}

QuadraticRoot zeta_from(const Moments& mo, ZetaHistory* history) {
  const complex a = 1.0 - mo.big_r[1] - mo.small_r[1];
  const complex b = mo.big_r[2] + mo.small_r[2];
  return solve_zeta_quadratic(a, b, mo.small_r[0], history);
}

}  // namespace

std::string_view to_string(BranchFlag flag) {
  switch (flag) {
    case BranchFlag::Linear: return "Linear";
    case BranchFlag::QuadraticMinus: return "QuadraticMinus";
    case BranchFlag::QuadraticPlus: return "QuadraticPlus";
  }
  return "?";
}

complex empirical_r(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point, int n) {
  if (n < 1 || n > 3) throw Error(ErrorCode::InvalidArgument, "r_n needs n in 1..3");
  return moments(v, sol, point).small_r[static_cast<std::size_t>(n - 1)];
}

complex zeta_tilde(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point) {
  return tilde_from(moments(v, sol, point));
}

QuadraticRoot solve_zeta_quadratic(complex a, complex b, complex r1, ZetaHistory* history) {
  if (std::abs(a) < 1e-14 && std::abs(b) < 1e-14)
    throw Error(ErrorCode::InvalidArgument, "both quadratic coefficients vanish");

  QuadraticRoot out{0.0, BranchFlag::Linear};
  if (std::abs(b) < 1e-10) {
    if (std::abs(a) < 1e-14) throw Error(ErrorCode::InvalidArgument, "linear coefficient vanishes");
    out.value = r1 / a;
  } else {
    const complex s = std::sqrt(a * a - 4.0 * b * r1);
    const bool plus = std::abs(a + s) >= std::abs(a - s);
    const complex q = plus ? a + s : a - s;
    if (q == complex(0.0)) {
      out.value = 0.0;
      out.flag = BranchFlag::QuadraticMinus;
    } else {
      const complex big = q / (2.0 * b);
      const complex small = 2.0 * r1 / q;
      const BranchFlag small_flag = plus ? BranchFlag::QuadraticMinus : BranchFlag::QuadraticPlus;
      const BranchFlag big_flag = plus ? BranchFlag::QuadraticPlus : BranchFlag::QuadraticMinus;
      const double gap = std::abs(big) - std::abs(small);
      const bool ambiguous = gap < 1e-10 * std::abs(big);
      bool take_small = true;
      if (history && history->last) {
        take_small = std::abs(small - *history->last) <= std::abs(big - *history->last);
      } else if (ambiguous) {
        throw Error(ErrorCode::BranchAmbiguity, "roots have equal modulus and there is no continuation history");
      }
      out.value = take_small ? small : big;
      out.flag = take_small ? small_flag : big_flag;

      const complex f = b * out.value * out.value - a * out.value + r1;
      const complex fp = 2.0 * b * out.value - a;
      if (fp != complex(0.0)) {
        const complex polished = out.value - f / fp;
        const complex fpol = b * polished * polished - a * polished + r1;
        if (std::abs(fpol) < std::abs(f)) out.value = polished;
      }
    }
  }
  if (history) history->last = out.value;
  return out;
}

QuadraticRoot zeta0(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point,
                    ZetaHistory* history) {
  return zeta_from(moments(v, sol, point), history);
}

FluctuationTerms fluctuation_terms(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point,
                                   ZetaHistory* history) {
  const auto mo = moments(v, sol, point);
  FluctuationTerms t;
  t.point = point;
  t.r1 = mo.small_r[0];
  t.r2 = mo.small_r[1];
  t.r3 = mo.small_r[2];
  t.zeta_tilde = tilde_from(mo);
  const auto root = zeta_from(mo, history);
  t.zeta0 = root.value;
  t.branch_flag = root.flag;
  return t;
}

std::vector<FluctuationTerms> zeta0_ladder(const std::vector<double>& v, const FreeConvolution& sol, double e,
                                           double eta_target, double ratio) {
  if (!(eta_target > 0.0) || !(ratio > 1.0)) throw Error(ErrorCode::InvalidArgument, "bad ladder parameters");
  std::vector<double> etas;
  for (double eta = 2.0; eta > eta_target; eta /= ratio) etas.push_back(eta);
  etas.push_back(eta_target);

  ZetaHistory history;
  std::vector<FluctuationTerms> out;
  out.reserve(etas.size());
  for (double eta : etas) {
    const auto mo = moments(v, sol, {e, eta});
    FluctuationTerms t;
    t.point = {e, eta};
    t.r1 = mo.small_r[0];
    t.r2 = mo.small_r[1];
    t.r3 = mo.small_r[2];
    const complex denom = 1.0 - mo.big_r[1];
    t.zeta_tilde = std::abs(denom) > 1e-10 ? mo.small_r[0] / denom : complex(NAN, NAN);
    const auto root = zeta_from(mo, &history);
    t.zeta0 = root.value;
    t.branch_flag = root.flag;
    out.push_back(t);
  }
  return out;
}

DecompositionResidual decomposition_residual(const SpectralData& data, const FreeConvolution& sol,
                                             SpectralPoint point, ZetaHistory* history) {
  if (data.config && data.config->lambda != sol.lambda())
    throw Error(ErrorCode::InvalidArgument, "spectrum and solution disagree on lambda");
  const complex diff = empirical_stieltjes(data, point) - sol.mfc(point);
  complex z0 = 0.0;
  if (sol.lambda() != 0.0 || !data.potential.empty()) {
    if (data.potential.size() != data.size())
      throw Error(ErrorCode::DimensionMismatch, "spectrum carries no matching potential");
    z0 = zeta0(data.potential, sol, point, history).value;
  }
  return {std::abs(diff), std::abs(diff - z0)};
}

}  // namespace defsc
