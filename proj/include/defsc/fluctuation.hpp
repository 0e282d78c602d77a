#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "defsc/freeconv.hpp"
#include "defsc/rmt.hpp"

namespace defsc {

enum class BranchFlag { Linear, QuadraticMinus, QuadraticPlus };

std::string_view to_string(BranchFlag flag);

struct FluctuationTerms {
  complex r1 = 0.0;
  complex r2 = 0.0;
  complex r3 = 0.0;
  complex zeta_tilde = 0.0;
  complex zeta0 = 0.0;
  SpectralPoint point;
  BranchFlag branch_flag = BranchFlag::Linear;
};

/// Caller-owned continuation state for one (E, trial) ladder. Once it holds a
/// value, zeta0 follows the root nearest to it instead of the smaller one.
struct ZetaHistory {
  std::optional<complex> last;
};

/// N^-1 sum_i (lambda v_i - z - m_fc)^-n - R_n(z), n = 1..3.
complex empirical_r(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point, int n);

/// r_1 / (1 - R_2)
complex zeta_tilde(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point);

struct QuadraticRoot {
  complex value;
  BranchFlag flag;
};

/// Root of b zeta^2 - a zeta + r1 = 0 (linear when |b| < 1e-10).
QuadraticRoot solve_zeta_quadratic(complex a, complex b, complex r1, ZetaHistory* history = nullptr);

QuadraticRoot zeta0(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point,
                    ZetaHistory* history = nullptr);

/// All terms at once; shares the kernel moments between r_n, zeta0 and zeta_tilde.
FluctuationTerms fluctuation_terms(const std::vector<double>& v, const FreeConvolution& sol, SpectralPoint point,
                                   ZetaHistory* history = nullptr);

/// zeta0 followed from eta = 2 down to eta_target in steps of 1/ratio; the last entry is at eta_target.
std::vector<FluctuationTerms> zeta0_ladder(const std::vector<double>& v, const FreeConvolution& sol, double e,
                                           double eta_target, double ratio = 1.1);

struct DecompositionResidual {
  double raw = 0.0;
  double corrected = 0.0;
};

/// |m - m_fc| and |m - m_fc - zeta0| for one sampled spectrum.
DecompositionResidual decomposition_residual(const SpectralData& data, const FreeConvolution& sol,
                                             SpectralPoint point, ZetaHistory* history = nullptr);

}  // namespace defsc
