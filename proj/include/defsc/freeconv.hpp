#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "defsc/measure.hpp"
#include "json.hpp"

namespace defsc {

struct SpectralPoint {
  double e = 0.0;
  double eta = 1.0;

  complex z() const { return {e, eta}; }
};

enum class EdgeClass {
  SquareRootBoth,
  SquareRootLowerOnly,
  SquareRootUpperOnly,
  PowerBoth,
};

std::string_view to_string(EdgeClass c);

struct SupportInfo {
  double l1 = 0.0;
  double l2 = 0.0;
  // Real preimages: F(tau1) = l1, F(tau2) = l2. On a power edge the preimage
  // is the end of lambda * supp(mu) itself.
  double tau1 = 0.0;
  double tau2 = 0.0;
  EdgeClass edge_class = EdgeClass::SquareRootBoth;
  double lower_exponent = 0.5;
  double upper_exponent = 0.5;
  // Only for Jacobi measures whose endpoint exponent exceeds 1.
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  // lambda within relative 1e-3 of lambda1 or lambda2: the classifier may be off.
  bool near_threshold = false;
};

constexpr double kEtaFloor = 1e-7;

/// Solution of m = int dmu(v) / (lambda v - z - m) with Im m > 0.
/// Continuation from eta = 2 down a geometric ladder unless a warm start is given.
complex solve_mfc(const Measure& mu, double lambda, SpectralPoint point,
                  std::optional<complex> warm_start = std::nullopt);

/// |m - int dmu / (lambda v - z - m)|
double mfc_residual(const Measure& mu, double lambda, SpectralPoint point, complex m);

SupportInfo support_endpoints(const Measure& mu, double lambda);

struct EdgeFit {
  double slope = 0.0;
  double r2 = 0.0;
};

struct ProfileRow {
  SpectralPoint point;
  double im_mfc = 0.0;
  double kappa = 0.0;
  bool inside = false;
  double ratio = 0.0;
};

/// Everything derived from the pair (mu, lambda). Construction computes the
/// support; the integrated density table is built on first use. Safe for
/// concurrent use after construction.
class FreeConvolution {
 public:
  FreeConvolution(Measure mu, double lambda);

  const Measure& measure() const { return mu_; }
  double lambda() const { return lambda_; }
  const SupportInfo& support() const { return support_; }
  double l1() const { return support_.l1; }
  double l2() const { return support_.l2; }
  double eta_floor() const { return kEtaFloor; }

  complex mfc(SpectralPoint point) const;
  double density(double e) const;
  double integrated_density(double e) const;
  std::vector<double> classical_locations(std::size_t n) const;

  /// R_n = int dmu / (lambda v - z - m_fc)^n, n = 1..4.
  complex r_moment(SpectralPoint point, int n) const;
  KernelMoments r_moments(SpectralPoint point) const;
  double stability_alpha(SpectralPoint point) const;
  double kappa(double e) const;

  EdgeFit edge_exponent_fit(bool upper, double kappa_min, double kappa_max, std::size_t points) const;
  std::vector<ProfileRow> im_mfc_profile_check(const std::vector<SpectralPoint>& grid) const;

  nlohmann::json to_json(const std::vector<SpectralPoint>& grid) const;

  struct IdsTable;

 private:
  const IdsTable& ids() const;

  Measure mu_;
  double lambda_;
  SupportInfo support_;

  struct Cache {
    std::shared_mutex mutex;
    std::map<std::pair<std::uint64_t, std::uint64_t>, complex> values;
  };
  std::shared_ptr<Cache> cache_;
  struct LazyIds {
    std::once_flag once;
    std::unique_ptr<const IdsTable> table;
  };
  std::shared_ptr<LazyIds> ids_;
};

}  // namespace defsc
