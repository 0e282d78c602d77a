#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "defsc/error.hpp"
#include "defsc/freeconv.hpp"
#include "defsc/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOther = 1;

using nlohmann::json;
using defsc::ErrorCode;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw defsc::Error(ErrorCode::ConfigError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw defsc::Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

std::size_t thread_count(std::optional<std::size_t> flag) {
  if (flag) {
    if (*flag == 0) throw defsc::Error(ErrorCode::ConfigError, "--threads must be at least 1");
    return *flag;
  }
  if (const char* env = std::getenv("DEFSC_THREADS"); env && *env) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(env, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != std::string(env).size() || v == 0)
      throw defsc::Error(ErrorCode::ConfigError, "DEFSC_THREADS must be a positive integer");
    return v;
  }
  return 1;
}

int fcsolve(const std::string& measure_path, double lambda, const std::string& grid_path, const std::string& out) {
  defsc::Measure mu = [&] {
    try {
      return defsc::Measure::from_json(read_json(measure_path));
    } catch (const json::exception& e) {
      throw defsc::Error(ErrorCode::ConfigError, measure_path + ": " + e.what());
    }
  }();
  defsc::ZGridSpec grid;
  try {
    grid = defsc::ZGridSpec::from_json(read_json(grid_path), false);
  } catch (const json::exception& e) {
    throw defsc::Error(ErrorCode::ConfigError, grid_path + ": " + e.what());
  }
  const defsc::FreeConvolution sol(std::move(mu), lambda);
  const auto points = grid.resolve(sol.support(), 0);
  std::ofstream os(out);
  if (!os) throw defsc::Error(ErrorCode::IoError, "cannot write " + out);
  os << sol.to_json(points).dump(2) << '\n';
  spdlog::info("support [{}, {}], {} grid points written to {}", sol.l1(), sol.l2(), points.size(), out);
  return 0;
}

int run(const std::string& spec_path, const std::string& out, std::optional<std::size_t> threads,
        std::optional<std::uint64_t> seed, const std::string& format) {
  auto spec = defsc::ExperimentSpec::load(spec_path);
  if (seed) spec.seed = *seed;
  if (!out.empty()) spec.output_dir = out;
  if (spec.output_dir.empty()) throw defsc::Error(ErrorCode::ConfigError, "no output directory: pass --out or set output_dir");
  defsc::RunOptions options;
  options.threads = thread_count(threads);
  const auto report = defsc::run_experiment(spec, options);
  defsc::emit_report(report, spec.output_dir, format == "csv" ? defsc::ReportFormat::Csv : defsc::ReportFormat::Json);
  for (const auto& f : report.flags) spdlog::warn("{}", f);
  spdlog::info("{} rows, success {:.4f}, ratio q95 {}, {:.2f}s on {} thread(s)", report.rows.size(), report.row_success,
               defsc::format_double(report.ratio_q95), report.wall_clock_seconds, report.threads);
  if (!report.envelope_pass) spdlog::warn("ratio q95 exceeds {}", spec.tolerances.ratio_q95_max);
  if (!report.rows_pass) {
    spdlog::error("row success {:.4f} is below {}", report.row_success, spec.tolerances.min_row_success);
    return kExitNumerical;
  }
  return 0;
}

int list_kinds() {
  for (const auto& info : defsc::experiment_kinds())
    std::cout << defsc::to_string(info.kind) << '\t' << info.statistic << '\t' << info.anchor << '\n';
  return 0;
}

int report(const std::string& dir, const std::string& format) {
  const std::filesystem::path in(dir);
  if (format == "json") {
    std::ifstream f(in / "report.json");
    if (!f) throw defsc::Error(ErrorCode::IoError, "no report.json in " + dir);
    std::cout << f.rdbuf();
    return 0;
  }
  if (std::filesystem::exists(in / "report.json")) {
    std::cout << defsc::aggregates_csv(defsc::read_report(in));
    return 0;
  }
  std::ifstream f(in / "aggregates.csv");
  if (!f) throw defsc::Error(ErrorCode::IoError, "no report in " + dir);
  std::cout << f.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformed Wigner matrices: free convolution and local law experiments"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string measure_path, grid_path, sol_out;
  double lambda = 0.0;
  auto* fc = app.add_subcommand("fcsolve", "Solve the Pastur relation on a grid");
  fc->add_option("--measure", measure_path, "Measure JSON")->required();
  fc->add_option("--lambda", lambda, "Coupling lambda >= 0")->required();
  fc->add_option("--grid", grid_path, "Grid JSON (z_grid format with absolute eta)")->required();
  fc->add_option("--out", sol_out, "Output JSON")->required();

  std::string spec_path, out_dir, run_format = "json";
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  auto* rn = app.add_subcommand("run", "Run an experiment spec");
  rn->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  rn->add_option("--out", out_dir, "Output directory");
  rn->add_option("--threads", threads, "Worker threads (overrides DEFSC_THREADS)");
  rn->add_option("--seed", seed, "Master seed (overrides the spec)");
  rn->add_option("--format", run_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* lk = app.add_subcommand("list-kinds", "List experiment kinds");

  std::string report_dir, report_format = "csv";
  auto* rp = app.add_subcommand("report", "Print the aggregates of a finished run");
  rp->add_option("--in", report_dir, "Run directory")->required();
  rp->add_option("--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("defsc"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*fc) return fcsolve(measure_path, lambda, grid_path, sol_out);
    if (*rn) return run(spec_path, out_dir, threads, seed, run_format);
    if (*lk) return list_kinds();
    if (*rp) return report(report_dir, report_format);
  } catch (const defsc::Error& e) {
    spdlog::error("{}", e.what());
    switch (e.code()) {
      case ErrorCode::ConfigError:
      case ErrorCode::UnknownKind:
        return kExitConfig;
      case ErrorCode::IoError:
        return kExitOther;
      default:
        return kExitNumerical;
    }
  }
  return kExitOther;
}
