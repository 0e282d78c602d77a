#include "defsc/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "expect_error.hpp"

using namespace defsc;
using nlohmann::json;

namespace {

const Calibration kBare{1.0, 0.0};

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("defsc_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

json local_law_spec() {
  return {{"kind", "LocalLaw"},
          {"ensemble", {{"n", {60}}, {"lambda", {0.5}}}},
          {"seed", 11},
          {"trials", 3},
          {"z_grid", {{"energies", {0.0, 0.4}}, {"eta", {0.5, 0.2}}}}};
}

}  // namespace

TEST_CASE("bound formulas with bare log factor") {
  SUBCASE("local law crossover") {
    const std::size_t n = 10000;
    const double lambda = 0.5;
    const double cross = lambda / std::sqrt(double(n));  // kappa + eta where both branches agree
    const double eta = 0.001;
    const double tail = 1.0 / (n * eta);
    const double at = predicted_bound(ExperimentKind::LocalLaw, {.n = n, .lambda = lambda, .kappa = cross - eta, .eta = eta}, kBare);
    CHECK(at == doctest::Approx(std::sqrt(lambda) * std::pow(double(n), -0.25) + tail).epsilon(1e-12));
    const double near = predicted_bound(ExperimentKind::LocalLaw, {.n = n, .lambda = lambda, .kappa = 0.0, .eta = eta}, kBare);
    CHECK(near == doctest::Approx(at).epsilon(1e-12));
    const double far = predicted_bound(ExperimentKind::LocalLaw, {.n = n, .lambda = lambda, .kappa = 1.0 - eta, .eta = eta}, kBare);
    CHECK(far == doctest::Approx(lambda / std::sqrt(double(n)) + tail).epsilon(1e-12));
    CHECK(far < near);
  }

  SUBCASE("lambda zero leaves the resolvent term") {
    const double b = predicted_bound(ExperimentKind::LocalLaw, {.n = 100, .lambda = 0.0, .kappa = 0.3, .eta = 0.1}, kBare);
    CHECK(b == doctest::Approx(0.1));
  }

  SUBCASE("log factor") {
    const Calibration cal{2.0, 3.0};
    const double base = predicted_bound(ExperimentKind::Delocalization, {.n = 400}, kBare);
    CHECK(base == doctest::Approx(0.05));
    CHECK(predicted_bound(ExperimentKind::Delocalization, {.n = 400}, cal) ==
          doctest::Approx(2.0 * std::pow(std::log(400.0), 3.0) * base));
  }

  SUBCASE("rigidity") {
    const std::size_t n = 1000;
    const double nn = double(n);
    // alpha_hat = 500 exceeds log N, so no small-index term.
    const double mid = predicted_bound(ExperimentKind::Rigidity, {.n = n, .lambda = 0.0, .alpha_index = 500}, kBare);
    CHECK(mid == doctest::Approx(std::pow(nn, -2.0 / 3.0) * std::pow(500.0, -1.0 / 3.0)));
    const double edge = predicted_bound(ExperimentKind::Rigidity, {.n = n, .lambda = 0.0, .alpha_index = 2}, kBare);
    CHECK(edge == doctest::Approx(std::pow(nn, -2.0 / 3.0) * (std::pow(2.0, -1.0 / 3.0) + 1.0)));
    const double top = predicted_bound(ExperimentKind::Rigidity, {.n = n, .lambda = 0.0, .alpha_index = 998}, kBare);
    CHECK(top == doctest::Approx(edge));
    const double with = predicted_bound(ExperimentKind::Rigidity, {.n = n, .lambda = 1.0, .alpha_index = 500}, kBare);
    CHECK(with == doctest::Approx(mid + std::pow(nn, -1.0 / 3.0) * std::pow(500.0, -2.0 / 3.0) + 1.0 / std::sqrt(nn)));
  }

  SUBCASE("density of states") {
    const double b = predicted_bound(ExperimentKind::DensityOfStates,
                                     {.n = 100, .lambda = 1.0, .kappa = 0.21, .e1 = 0.0, .e2 = 0.04}, kBare);
    CHECK(b == doctest::Approx(0.01 + 0.04 / (0.5 * 10.0)));
    CHECK(code_of([] { predicted_bound(ExperimentKind::DensityOfStates, {.n = 10, .e1 = 1.0, .e2 = 1.0}); }) ==
          ErrorCode::InvalidArgument);
  }

  SUBCASE("other kinds") {
    CHECK(predicted_bound(ExperimentKind::Spacing, {.n = 50}, kBare) == doctest::Approx(0.02));
    CHECK(predicted_bound(ExperimentKind::IntegratedDOS, {.n = 100, .lambda = 1.0}, kBare) == doctest::Approx(0.11));
    CHECK(predicted_bound(ExperimentKind::OperatorNorm, {.n = 1000, .lambda = 0.0}, kBare) == doctest::Approx(0.01));
    CHECK(predicted_bound(ExperimentKind::ZetaDecomposition, {.n = 100, .eta = 0.1}, kBare) == doctest::Approx(0.1));
    CHECK(predicted_bound(ExperimentKind::OffDiagonalLaw, {.n = 100, .eta = 0.25, .im_mfc = 1.0}, kBare) ==
          doctest::Approx(0.2 + 0.04));
  }

  SUBCASE("errors") {
    CHECK(code_of([] { predicted_bound(ExperimentKind::EdgeExponent, {.n = 10}); }) == ErrorCode::UnknownKind);
    CHECK(code_of([] { predicted_bound(ExperimentKind::FreeConvOnly, {.n = 10}); }) == ErrorCode::UnknownKind);
    CHECK(code_of([] { predicted_bound(ExperimentKind::LocalLaw, {.n = 10, .eta = 0.0}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { predicted_bound(ExperimentKind::Delocalization, {.n = 0}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("kind registry") {
  CHECK(experiment_kinds().size() == 11);
  for (const auto& info : experiment_kinds()) {
    CHECK(experiment_kind_from_string(to_string(info.kind)) == info.kind);
    CHECK(!info.statistic.empty());
    CHECK(!info.anchor.empty());
    CHECK(!value_columns(info.kind).empty());
  }
  CHECK(code_of([] { experiment_kind_from_string("Nope"); }) == ErrorCode::UnknownKind);
}

TEST_CASE("quantile") {
  CHECK(quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.5);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.95) == doctest::Approx(4.8));
  CHECK(quantile({7.0}, 0.05) == 7.0);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("strict spec parsing") {
  const auto good = local_law_spec();
  const auto spec = ExperimentSpec::from_json(good);
  CHECK(spec.kind == ExperimentKind::LocalLaw);
  CHECK(spec.trials == 3);
  CHECK(ExperimentSpec::from_json(spec.to_json()).to_json() == spec.to_json());

  auto expect_config = [](json j) { CHECK(code_of([&] { ExperimentSpec::from_json(j); }) == ErrorCode::ConfigError); };
  auto j = good;
  j["colour"] = "red";
  expect_config(j);
  j = good;
  j["ensemble"]["size"] = 3;
  expect_config(j);
  j = good;
  j["kind"] = "NotAKind";
  expect_config(j);
  j = good;
  j["trials"] = "many";
  expect_config(j);
  j = good;
  j["trials"] = 0;
  expect_config(j);
  j = good;
  j.erase("z_grid");
  expect_config(j);
  j = good;
  j["z_grid"]["eta"] = {0.1, -0.2};
  expect_config(j);
  j = good;
  j["z_grid"]["points"] = json::array({{{"e", 0.0}, {"eta", 0.1}}});
  expect_config(j);
  j = good;
  j["z_grid"]["eta"] = {{"max", 1.0}, {"ratio", 0.9}};
  expect_config(j);
  j = good;
  j["ensemble"]["lambda"] = {-1.0};
  expect_config(j);
  j = good;
  j["ensemble"]["measure"] = {{"kind", "jacobi"}, {"alpha", 0.0}, {"beta", 0.0}, {"d", {1.0}}, {"extra", 1}};
  expect_config(j);
  j = good;
  j["tolerances"]["c_cal"] = 0.0;
  expect_config(j);

  // n-relative eta needs N, which FreeConvOnly does not have
  expect_config({{"kind", "FreeConvOnly"}, {"ensemble", {{"lambda", {1.0}}}}, {"z_grid", {{"energies", {0.0}}}}});
  CHECK_NOTHROW(ExperimentSpec::from_json(
      {{"kind", "FreeConvOnly"}, {"ensemble", {{"lambda", {1.0}}}}, {"z_grid", {{"energies", {0.0}}, {"eta", {0.1}}}}}));

  const auto path = scratch("load") / "spec.json";
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << "{ not json";
  CHECK(code_of([&] { ExperimentSpec::load(path); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { ExperimentSpec::load(path.parent_path() / "missing.json"); }) == ErrorCode::ConfigError);
}

TEST_CASE("grid resolution") {
  SupportInfo s;
  s.l1 = -2.5;
  s.l2 = 2.5;
  auto g = ZGridSpec::from_json({{"energies", {{"min", -0.1}, {"max", 0.1}, {"count", 3}}}, {"energy_reference", "l2"}});
  const auto pts = g.resolve(s, 100);
  // eta ladder 2, 2/1.2, ... down to 10/N = 0.1
  const std::size_t steps = static_cast<std::size_t>(std::ceil(std::log(20.0) / std::log(1.2)));
  REQUIRE(pts.size() == 3 * (steps + 1));
  CHECK(pts.front().e == doctest::Approx(2.4));
  CHECK(pts.front().eta == 2.0);
  CHECK(pts[steps].eta == doctest::Approx(0.1));
  for (std::size_t k = 1; k <= steps; ++k) CHECK(pts[k].eta < pts[k - 1].eta);
  CHECK(pts.back().e == doctest::Approx(2.6));

  auto c = ZGridSpec::from_json({{"energies", {0.0}}, {"energy_reference", "center"}, {"eta", {0.1, 0.3}}});
  const auto cp = c.resolve(s, 0);
  REQUIRE(cp.size() == 2);
  CHECK(cp[0].eta == 0.3);
  CHECK(cp[1].eta == 0.1);
  CHECK(code_of([&] { g.resolve(s, 0); }) == ErrorCode::ConfigError);
}

TEST_CASE("free convolution only kind with a point mass") {
  json j = {{"kind", "FreeConvOnly"},
            {"ensemble", {{"lambda", {0.0, 0.8}}, {"measure", {{"kind", "atomic"}, {"atoms", {{0.0, 1.0}}}}}}},
            {"z_grid", {{"energies", {-1.0, 0.0, 1.5}}, {"eta", {1.0, 0.01}}}}};
  const auto report = run_experiment(ExperimentSpec::from_json(j));
  REQUIRE(report.rows.size() == 12);
  for (const auto& r : report.rows) {
    REQUIRE(r.ok());
    CHECK(r.n == 0);
    const complex z(r.e, r.eta);
    const complex sc = (-z + std::sqrt(z - 2.0) * std::sqrt(z + 2.0)) / 2.0;
    CHECK(std::abs(complex(r.values[0], r.values[1]) - sc) <= 1e-9);
    CHECK(r.values[2] <= 1e-10);
    CHECK(r.values[3] == doctest::Approx(-2.0));
    CHECK(r.values[4] == doctest::Approx(2.0));
  }
  CHECK(std::isnan(report.ratio_q95));
  CHECK(report.rows_pass);
}

TEST_CASE("edge exponent kind") {
  json j = {{"kind", "EdgeExponent"}, {"ensemble", {{"lambda", {1.0}}}}};
  const auto report = run_experiment(ExperimentSpec::from_json(j));
  REQUIRE(report.rows.size() == 1);
  REQUIRE(report.rows[0].ok());
  CHECK(report.rows[0].index == 1);
  CHECK(report.rows[0].values[0] == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("local law single row") {
  json j = {{"kind", "LocalLaw"},
            {"ensemble", {{"n", {40}}, {"lambda", {0.5}}}},
            {"seed", 3},
            {"z_grid", {{"points", {{{"e", 0.1}, {"eta", 0.3}}}}}}};
  const auto spec = ExperimentSpec::from_json(j);
  const auto report = run_experiment(spec);
  REQUIRE(report.rows.size() == 1);
  const auto& row = report.rows[0];
  REQUIRE(row.ok());
  CHECK(row.seed == cell_seed(3, 40));

  EnsembleConfig c;
  c.n_size = 40;
  c.lambda = 0.5;
  c.seed = row.seed;
  c.trial_index = 0;
  const auto data = sample_spectrum(c, false);
  const FreeConvolution sol(c.mu, 0.5);
  const SpectralPoint p{0.1, 0.3};
  const double raw = std::abs(empirical_stieltjes(data, p) - sol.mfc(p));
  CHECK(row.values[0] == raw);
  CHECK(row.values[4] == predicted_bound(ExperimentKind::LocalLaw, {.n = 40, .lambda = 0.5, .kappa = sol.kappa(0.1), .eta = 0.3}));
  CHECK(row.values[5] == raw / row.values[4]);
  CHECK(report.flags.empty());
}

TEST_CASE("out of range eta is flagged") {
  json j = {{"kind", "LocalLaw"},
            {"ensemble", {{"n", {20}}, {"lambda", {0.5}}}},
            {"z_grid", {{"energies", {0.0}}, {"eta", {4.0, 0.01}}}}};
  const auto report = run_experiment(ExperimentSpec::from_json(j));
  CHECK(report.flags.size() == 2);
}

TEST_CASE("every sampled kind runs") {
  for (const auto& info : experiment_kinds()) {
    json j = {{"kind", to_string(info.kind)},
              {"ensemble", {{"n", {64}}, {"lambda", {0.3}}}},
              {"trials", 2},
              {"spacing", {{"min_gap", 4}, {"stride", 5}}},
              {"z_grid", {{"energies", {-0.2, 0.3}}, {"eta", {0.5}}}}};
    const auto report = run_experiment(ExperimentSpec::from_json(j));
    INFO(to_string(info.kind));
    CHECK(!report.rows.empty());
    CHECK(report.row_success == 1.0);
    for (const auto& r : report.rows) CHECK(r.values.size() == report.columns.size());
  }
}

TEST_CASE("failed cell rows carry the error code") {
  // atom at 2 with lambda too large gives a multi-interval support
  json j = {{"kind", "IntegratedDOS"},
            {"ensemble",
             {{"n", {30}},
              {"lambda", {5.0}},
              {"measure", {{"kind", "atomic"}, {"atoms", {{-1.0, 0.5}, {1.0, 0.5}}}}}}},
            {"trials", 2},
            {"z_grid", {{"energies", {0.0}}, {"eta", {0.1}}}}};
  const auto report = run_experiment(ExperimentSpec::from_json(j));
  REQUIRE(report.rows.size() == 2);
  for (const auto& r : report.rows) {
    CHECK(!r.ok());
    CHECK(r.status == "MultiIntervalUnsupported");
  }
  CHECK(report.row_success == 0.0);
  CHECK(!report.rows_pass);
}

TEST_CASE("scaling fit") {
  Report r;
  r.columns = {"dev"};
  for (std::size_t n : {100, 200, 400, 800}) {
    for (int t = 0; t < 3; ++t) {
      Row row;
      row.n = n;
      row.values = {3.0 * std::pow(double(n), -0.5) * (t == 1 ? 1.0 : t == 0 ? 0.5 : 7.0)};
      r.rows.push_back(row);
    }
  }
  const auto fit = scaling_fit(r, ScalingAxis::N, "dev");
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0));

  Report two = r;
  two.rows.resize(6);
  CHECK(code_of([&] { scaling_fit(two, ScalingAxis::N, "dev"); }) == ErrorCode::InsufficientPoints);
  CHECK(code_of([&] { scaling_fit(r, ScalingAxis::N, "nope"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("report output") {
  SUBCASE("round trip") {
    const auto report = run_experiment(ExperimentSpec::from_json(local_law_spec()));
    CHECK(report.rows.size() == 12);
    CHECK(report.aggregates.size() == 4 * report.columns.size());
    const auto dir = scratch("roundtrip");
    emit_report(report, dir, ReportFormat::Json);
    for (auto f : {"rows.csv", "aggregates.csv", "manifest.json", "report.json"}) CHECK(std::filesystem::exists(dir / f));
    const auto back = read_report(dir);
    CHECK(rows_csv(back) == rows_csv(report));
    CHECK(aggregates_csv(back) == aggregates_csv(report));
    CHECK(back.row_success == report.row_success);
    CHECK(back.ratio_q95 == report.ratio_q95);
    CHECK(line_count(slurp(dir / "rows.csv")) == 13);
    const auto manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("seed") == 11);
    CHECK(manifest.contains("git_describe"));
    CHECK(manifest.at("files").size() == 3);
  }

  SUBCASE("empty report gives header only") {
    Report r;
    r.columns = value_columns(ExperimentKind::OperatorNorm);
    const auto dir = scratch("empty");
    emit_report(r, dir, ReportFormat::Csv);
    CHECK(slurp(dir / "rows.csv") == "seed,trial,n,lambda,e,eta,index,status,max_eig,norm,l2,excess,bound,ratio\n");
    CHECK(line_count(slurp(dir / "aggregates.csv")) == 1);
    CHECK(!std::filesystem::exists(dir / "report.json"));
  }

  SUBCASE("thousand rows") {
    Report r;
    r.columns = {"x"};
    for (int k = 0; k < 1000; ++k) {
      Row row;
      row.trial = static_cast<std::uint64_t>(k);
      row.e = std::numeric_limits<double>::quiet_NaN();
      row.values = {0.1 * k};
      r.rows.push_back(row);
    }
    const auto text = rows_csv(r);
    CHECK(line_count(text) == 1001);
    CHECK(text.find("\n0,5,0,0,,0,,ok,0.5\n") != std::string::npos);
  }

  SUBCASE("unwritable directory") {
    const auto file = scratch("blocked");
    std::ofstream(file) << "x";
    CHECK(code_of([&] { emit_report(Report{}, file / "sub", ReportFormat::Csv); }) == ErrorCode::IoError);
  }
}

TEST_CASE("rows are identical across thread counts") {
  auto j = local_law_spec();
  j["ensemble"]["lambda"] = {0.0, 0.5};
  j["ensemble"]["n"] = {30, 50};
  const auto spec = ExperimentSpec::from_json(j);
  const auto one = run_experiment(spec, {.threads = 1});
  const auto four = run_experiment(spec, {.threads = 4});
  CHECK(rows_csv(one) == rows_csv(four));
  CHECK(aggregates_csv(one) == aggregates_csv(four));
  SpectrumCache cache;
  const auto cached = run_experiment(spec, {.threads = 3, .cache = &cache});
  CHECK(rows_csv(cached) == rows_csv(one));
  const auto again = run_experiment(spec, {.threads = 2, .cache = &cache});
  CHECK(rows_csv(again) == rows_csv(one));
}
