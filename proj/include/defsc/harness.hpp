#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "defsc/freeconv.hpp"
#include "defsc/measure.hpp"
#include "defsc/rmt.hpp"
#include "json.hpp"

namespace defsc {

enum class ExperimentKind {
  LocalLaw,
  OffDiagonalLaw,
  Delocalization,
  Rigidity,
  DensityOfStates,
  Spacing,
  IntegratedDOS,
  OperatorNorm,
  ZetaDecomposition,
  EdgeExponent,
  FreeConvOnly,
};

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view s);

struct KindInfo {
  ExperimentKind kind;
  std::string_view statistic;
  std::string_view anchor;
};

const std::vector<KindInfo>& experiment_kinds();

/// Value columns emitted per row, after the fixed key columns.
std::vector<std::string> value_columns(ExperimentKind kind);

struct Calibration {
  double c_cal = 1.0;
  double log_power = 3.0;
};

struct BoundParams {
  std::size_t n = 0;
  double lambda = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  std::size_t alpha_index = 0;
  double e1 = 0.0;
  double e2 = 0.0;
  double im_mfc = 0.0;
};

/// Envelope for the kind with every log factor replaced by c_cal * (log N)^p.
double predicted_bound(ExperimentKind kind, const BoundParams& params, const Calibration& cal = {});

enum class EnergyReference { Absolute, Lower, Upper, Centre };

struct EtaLadder {
  double max = 2.0;
  std::optional<double> min;
  double min_times_inverse_n = 10.0;
  double ratio = 1.2;
};

struct ZGridSpec {
  std::vector<SpectralPoint> points;  // explicit points; takes precedence
  std::vector<double> energies;
  EnergyReference reference = EnergyReference::Absolute;
  std::vector<double> etas;  // explicit list; otherwise the ladder
  EtaLadder ladder;

  bool explicit_points() const { return !points.empty(); }
  /// Resolved points for one cell, energies outer and eta descending inner.
  std::vector<SpectralPoint> resolve(const SupportInfo& support, std::size_t n) const;
  std::vector<double> resolve_energies(const SupportInfo& support) const;
  static ZGridSpec from_json(const nlohmann::json& j, bool allow_n_relative = true);
  nlohmann::json to_json() const;
};

struct IndexSpec {
  double min_fraction = 0.1;
  double max_fraction = 0.9;
  std::size_t stride = 1;
};

struct SpacingSpec {
  std::size_t min_gap = 32;
  std::optional<std::size_t> max_gap;  // sqrt(N) when absent, never below min_gap
  std::size_t stride = 10;
};

struct EdgeSpec {
  bool upper = true;
  double kappa_min = 1e-4;
  double kappa_max = 1e-2;
  std::size_t points = 20;
};

struct Tolerances {
  Calibration calibration;
  double ratio_q95_max = 1.0;
  double min_row_success = 0.99;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::LocalLaw;
  std::vector<std::size_t> n_list;
  std::vector<double> lambda_list;
  Measure mu = Measure::uniform();
  MatrixKind matrix_kind = MatrixKind::ComplexHermitian;
  EntryLaw entry_law = EntryLaw::Gaussian;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  ZGridSpec z_grid;
  std::vector<double> window_widths{0.05, 0.1, 0.2};
  IndexSpec indices;
  SpacingSpec spacing;
  EdgeSpec edge;
  std::vector<double> quantiles{0.05, 0.5, 0.95};
  std::string output_dir;
  Tolerances tolerances;

  /// Strict: unknown fields, wrong types and inconsistent grids raise ConfigError.
  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Seed stored on rows of one N; trials then index substreams of it.
std::uint64_t cell_seed(std::uint64_t master, std::size_t n);

struct Row {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  std::size_t n = 0;
  double lambda = 0.0;
  double e = 0.0;    // NaN when the statistic has no energy
  double eta = 0.0;  // NaN when the statistic has no eta
  std::int64_t index = -1;
  std::string status = "ok";
  std::vector<double> values;

  bool ok() const { return status == "ok"; }
};

struct Aggregate {
  std::size_t n = 0;
  double lambda = 0.0;
  double e = 0.0;
  double eta = 0.0;
  std::int64_t index = -1;
  std::string statistic;
  std::size_t count = 0;
  std::size_t failed = 0;
  double median = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  std::vector<double> extra;  // one per ExperimentSpec::quantiles entry
};

struct Report {
  ExperimentSpec spec;
  std::vector<std::string> columns;
  std::vector<Row> rows;
  std::vector<Aggregate> aggregates;
  std::vector<std::string> flags;
  double row_success = 1.0;
  double ratio_q95 = 0.0;  // NaN for kinds without an envelope
  bool rows_pass = true;
  bool envelope_pass = true;
  double wall_clock_seconds = 0.0;
  std::size_t threads = 1;

  int column(std::string_view name) const;
  /// Values of one statistic over ok rows, in row order.
  std::vector<double> values(std::string_view statistic) const;
};

/// Type-7 (linear interpolation) sample quantile; x need not be sorted.
double quantile(std::vector<double> x, double p);

std::vector<Aggregate> aggregate_rows(const std::vector<Row>& rows, const std::vector<std::string>& columns,
                                      const std::vector<double>& quantiles);

/// Eigenvalue-only spectra shared between experiments in one process.
class SpectrumCache {
 public:
  std::shared_ptr<const SpectralData> get_or_compute(const EnsembleConfig& config);

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const SpectralData>> entries_;
};

struct RunOptions {
  std::size_t threads = 1;
  SpectrumCache* cache = nullptr;
};

Report run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

enum class ScalingAxis { N, Eta };

/// Least squares of log(median statistic) on log x, one point per distinct x.
ScalingFit scaling_fit(const Report& report, ScalingAxis axis, std::string_view statistic);

enum class ReportFormat { Csv, Json };

/// Always writes rows.csv, aggregates.csv and manifest.json; Json adds report.json.
void emit_report(const Report& report, const std::filesystem::path& dir, ReportFormat format);

/// Reads report.json back; aggregates and rows are bit-exact.
Report read_report(const std::filesystem::path& dir);

std::string rows_csv(const Report& report);
std::string aggregates_csv(const Report& report);

std::string git_describe();

/// Shortest round-trip decimal; empty for NaN.
std::string format_double(double x);

}  // namespace defsc
