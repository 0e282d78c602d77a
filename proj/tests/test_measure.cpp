#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "defsc/error.hpp"
#include "defsc/measure.hpp"
#include "expect_error.hpp"
#include "oracles.hpp"

using namespace defsc;

TEST_CASE("make_jacobi normalises") {
  const auto uniform = Measure::uniform();
  CHECK(uniform.jacobi().z_norm == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(uniform.density(0.0) == doctest::Approx(0.5).epsilon(1e-15));

  // Z = int (1 - v^2) dv = 4/3 by adaptive quadrature.
  const double z11 = oracle::integrate([](double v) { return 1 - v * v; }, -1, 1);
  CHECK(z11 == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  const auto j11 = Measure::make_jacobi(1, 1, {1});
  CHECK(std::abs(j11.jacobi().z_norm - z11) < 1e-13);
  CHECK(std::abs(j11.density(0.0) - 0.75) < 1e-13);

  const double z22 = oracle::integrate([](double v) { return (1 - v * v) * (1 - v * v); }, -1, 1);
  CHECK(std::abs(z22 - 16.0 / 15.0) < 1e-14);
  CHECK(std::abs(Measure::make_jacobi(2, 2, {1}).density(0.0) - 1.0 / z22) < 1e-13);
}

TEST_CASE("make_jacobi rejects inadmissible inputs") {
  CHECK(code_of([] { Measure::make_jacobi(0, -2, {1}); }) == ErrorCode::NonIntegrable);
  CHECK(code_of([] { Measure::make_jacobi(-1, 0, {1}); }) == ErrorCode::NonIntegrable);
  // d(v) = v vanishes at the origin.
  CHECK(code_of([] { Measure::make_jacobi(0, 0, {0, 1}); }) == ErrorCode::NonPositiveDensity);
  CHECK(code_of([] { Measure::make_jacobi(0, 0, {0.5, 1}); }) == ErrorCode::NonPositiveDensity);
}

TEST_CASE("density outside support and for atoms") {
  const auto u = Measure::uniform();
  CHECK(u.density(1.5) == 0.0);
  CHECK(u.density(-1.0001) == 0.0);
  CHECK(code_of([] { Measure::dirac(1.0).density(0.0); }) == ErrorCode::NoDensity);
}

TEST_CASE("atomic measure validation") {
  CHECK(code_of([] { Measure::make_atomic({}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { Measure::make_atomic({{0.5, 0.5}, {0.2, 0.5}}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { Measure::make_atomic({{0.0, 0.6}, {0.5, 0.5}}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { Measure::make_atomic({{1.5, 1.0}}); }) == ErrorCode::SupportViolation);
}

TEST_CASE("quadrature_nodes") {
  const auto u = Measure::uniform();
  const auto r2 = u.quadrature_nodes(2);
  REQUIRE(r2.size() == 2);
  CHECK(std::abs(r2.nodes[0] + 1 / std::sqrt(3.0)) < 1e-15);
  CHECK(std::abs(r2.nodes[1] - 1 / std::sqrt(3.0)) < 1e-15);
  CHECK(std::abs(r2.weights[0] - 0.5) < 1e-15);
  CHECK(std::abs(r2.weights[1] - 0.5) < 1e-15);
  double second = 0;
  for (std::size_t j = 0; j < 2; ++j) second += r2.weights[j] * r2.nodes[j] * r2.nodes[j];
  CHECK(std::abs(second - 1.0 / 3.0) < 1e-15);

  const auto r16 = u.quadrature_nodes(16);
  double fourth = 0;
  for (std::size_t j = 0; j < r16.size(); ++j) fourth += r16.weights[j] * std::pow(r16.nodes[j], 4);
  CHECK(std::abs(fourth - 0.2) < 1e-14);

  const auto r32 = Measure::make_jacobi(1, 1, {1}).quadrature_nodes(32);
  double mass = 0;
  for (double w : r32.weights) mass += w;
  CHECK(std::abs(mass - 1.0) < 1e-12);

  CHECK(code_of([] { Measure::dirac(0.0).quadrature_nodes(4); }) == ErrorCode::NoDensity);
}

TEST_CASE("Gauss-Jacobi exactness against adaptive quadrature") {
  struct Case {
    double a, b;
    std::vector<double> d;
  };
  const std::vector<Case> cases{{0, 0, {1}}, {1, 1, {1}}, {2, 1, {1}}, {0, 3, {2, 0.5}},
                                {2, 2, {1, 0.3, 0.2}}, {0.5, -0.5, {1}}, {-0.5, 1.5, {3, -1}}};
  for (const auto& c : cases) {
    const auto mu = Measure::make_jacobi(c.a, c.b, c.d);
    const int deg_d = static_cast<int>(c.d.size()) - 1;
    const double z = mu.jacobi().z_norm;
    for (int n = 1; n <= 20; ++n) {
      const auto rule = mu.quadrature_nodes(static_cast<std::size_t>(n));
      for (int k = 0; k <= 2 * n - 1 - deg_d; ++k) {
        double quad = 0;
        for (std::size_t j = 0; j < rule.size(); ++j) quad += rule.weights[j] * std::pow(rule.nodes[j], k);
        auto g = [&](double v) { return oracle::poly_eval(c.d, v) * std::pow(v, k) / z; };
        const double ref = oracle::integrate_jacobi_weight(g, c.a, c.b);
        INFO("alpha=" << c.a << " beta=" << c.b << " n=" << n << " k=" << k);
        CHECK(std::abs(quad - ref) < 1e-12);
      }
    }
  }
}

TEST_CASE("integrate_kernel closed forms") {
  const auto delta = Measure::dirac(1.0);
  CHECK(std::abs(delta.integrate_kernel(0.5, 2.0, 1) - complex(-2.0 / 3.0)) < 1e-15);

  const auto u = Measure::uniform();
  // (1/2) int dv / (v - 3) = (1/2) ln(2/4)
  CHECK(std::abs(u.integrate_kernel(1.0, 3.0, 1) - complex(0.5 * std::log(0.5))) < 1e-13);
  CHECK(std::abs(u.integrate_kernel(1.0, 3.0, 2) - complex(0.125)) < 1e-13);

  CHECK(code_of([&] { u.integrate_kernel(1.0, 0.3, 1); }) == ErrorCode::PoleOnSupport);
  CHECK(code_of([&] { delta.integrate_kernel(0.5, 0.5, 1); }) == ErrorCode::PoleOnSupport);
  CHECK(code_of([&] { u.integrate_kernel(1.0, 3.0, 5); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("integrate_kernel near the support matches a log antiderivative") {
  // Uniform: (1/2) int dv/(lambda v - tau) = (1/(2 lambda)) [log(lambda - tau) - log(-lambda - tau)]
  const auto u = Measure::uniform();
  const double lambda = 1.0;
  for (double eta : {1e-1, 1e-3, 1e-5, 1e-7, 1e-9}) {
    for (double e : {-0.999, -0.3, 0.0, 0.77, 0.999999, 1.0 + 1e-8}) {
      const complex tau(e, eta);
      const complex ref = (std::log(lambda - tau) - std::log(-lambda - tau)) / (2.0 * lambda);
      const complex got = u.integrate_kernel(lambda, tau, 1);
      INFO("e=" << e << " eta=" << eta);
      CHECK(std::abs(got - ref) < 1e-12);
      const complex ref2 = (1.0 / (-lambda - tau) - 1.0 / (lambda - tau)) / (2.0 * lambda);
      const complex got2 = u.integrate_kernel(lambda, tau, 2);
      const double conditioning =
          (std::atan((1 - e) / eta) + std::atan((1 + e) / eta)) / (2 * eta);
      CHECK(std::abs(got2 - ref2) <= 1e-12 * std::max(1.0, std::abs(ref2)) + 1e-14 * conditioning);
    }
  }
}

TEST_CASE("kernel with a Jacobi measure against tanh-sinh") {
  const auto mu = Measure::make_jacobi(2, 2, {1});
  const double z = mu.jacobi().z_norm;
  for (const complex tau : {complex(2.3, 0.0), complex(2.0 + 1e-6, 1e-7), complex(0.4, 0.05),
                            complex(-1.7, 0.2), complex(1.95, 1e-4)}) {
    const double lambda = 2.0;
    for (int n = 1; n <= 3; ++n) {
      auto re = [&](double v) {
        return (std::pow(1 - v * v, 2) / z * std::pow(1.0 / (lambda * v - tau), n)).real();
      };
      auto im = [&](double v) {
        return (std::pow(1 - v * v, 2) / z * std::pow(1.0 / (lambda * v - tau), n)).imag();
      };
      auto modulus = [&](double v) {
        return std::pow(1 - v * v, 2) / z * std::pow(std::abs(lambda * v - tau), -n);
      };
      const double p = tau.real() / lambda;
      const double w = std::max(tau.imag() / lambda, 1e-9);
      const complex ref(oracle::integrate_graded(re, -1, 1, p, w), oracle::integrate_graded(im, -1, 1, p, w));
      // Cancellation across the peak bounds the attainable accuracy.
      const double conditioning = oracle::integrate_graded(modulus, -1, 1, p, w);
      const complex got = mu.integrate_kernel(lambda, tau, n);
      INFO("tau=" << tau << " n=" << n);
      CHECK(std::abs(got - ref) <= 1e-12 + 1e-14 * conditioning);
    }
  }
}

TEST_CASE("total-mass probe at large |tau|") {
  for (const auto& mu : {Measure::uniform(), Measure::make_jacobi(1, 1, {1}),
                         Measure::make_jacobi(2, 0.5, {1, 0.2})}) {
    const complex tau(-1e6, 0);
    const complex v = mu.integrate_kernel(0.0, tau, 1);
    CHECK(std::abs(-tau * v - 1.0) <= 1e-10);
  }
}

TEST_CASE("atomic kernel is the exact finite sum") {
  const auto mu = Measure::make_atomic({{-1.0, 0.25}, {0.2, 0.5}, {0.9, 0.25}});
  const double lambda = 0.7;
  const complex tau(0.1, 0.3);
  for (int n = 1; n <= 4; ++n) {
    complex sum = 0;
    for (const auto& a : mu.atomic().atoms) {
      const complex k = 1.0 / (lambda * a.location - tau);
      complex kp = k;
      for (int p = 1; p < n; ++p) kp *= k;
      sum += a.weight * kp;
    }
    CHECK(mu.integrate_kernel(lambda, tau, n) == sum);
  }
}

TEST_CASE("mean") {
  CHECK(std::abs(Measure::uniform().mean()) < 1e-15);
  CHECK(Measure::dirac(1.0).mean() == 1.0);
  const double num = oracle::integrate([](double v) { return v * (1 + v) * (1 + v) * (1 - v); }, -1, 1);
  const double den = oracle::integrate([](double v) { return (1 + v) * (1 + v) * (1 - v); }, -1, 1);
  const double ref = num / den;
  CHECK(std::abs(ref - 0.2) < 1e-14);
  const auto mu = Measure::make_jacobi(2, 1, {1});
  CHECK(std::abs(mu.mean() - ref) < 1e-10);
  CHECK(std::abs(mu.jacobi().shift + 0.2) < 1e-10);
}

TEST_CASE("endpoint inverse moments") {
  // alpha = beta = 2: int mu/(1-v) = 5/4, int mu/(1-v)^2 = 5/2.
  const auto mu = Measure::make_jacobi(2, 2, {1});
  CHECK(std::abs(mu.endpoint_inverse_moment(true, 1) - 1.25) < 1e-14);
  CHECK(std::abs(mu.endpoint_inverse_moment(true, 2) - 2.5) < 1e-14);
  CHECK(std::abs(mu.endpoint_inverse_moment(false, 2) - 2.5) < 1e-14);
  CHECK(code_of([] { Measure::uniform().endpoint_inverse_moment(true, 1); }) == ErrorCode::NonIntegrable);
}

TEST_CASE("sampling") {
  auto rng = RngStream(7);
  const auto ones = Measure::dirac(1.0).sample(rng, 3);
  CHECK(ones == std::vector<double>{1.0, 1.0, 1.0});

  const std::size_t count = 100000;
  auto rng_u = RngStream::substream(11, 0, StreamRole::Potential);
  const auto xs = Measure::uniform().sample(rng_u, count);
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(count);
  CHECK(std::abs(mean) <= 4.0 / std::sqrt(12.0 * static_cast<double>(count)));
  CHECK(std::all_of(xs.begin(), xs.end(), [](double x) { return x >= -1 && x <= 1; }));

  auto rng_a = RngStream::substream(11, 1, StreamRole::Potential);
  const auto ys = Measure::make_atomic({{-1.0, 0.5}, {1.0, 0.5}}).sample(rng_a, count);
  const double plus = static_cast<double>(std::count(ys.begin(), ys.end(), 1.0)) / static_cast<double>(count);
  CHECK(std::abs(plus - 0.5) <= 4.0 * 0.5 / std::sqrt(static_cast<double>(count)));

  // Same stream state, same draws.
  auto r1 = RngStream::substream(3, 5, StreamRole::Potential);
  auto r2 = RngStream::substream(3, 5, StreamRole::Potential);
  CHECK(Measure::uniform().sample(r1, 10) == Measure::uniform().sample(r2, 10));
}

TEST_CASE("Jacobi CDF spline matches the exact polynomial CDF") {
  // alpha = 2, beta = 1: density (1+v)^2 (1-v) / Z is a cubic.
  const std::vector<double> dens = oracle::poly_mul(oracle::poly_mul({1, 1}, {1, 1}), {1, -1});
  const auto prim = oracle::poly_antiderivative(dens);
  const double z = oracle::poly_eval(prim, 1) - oracle::poly_eval(prim, -1);
  const auto mu = Measure::make_jacobi(2, 1, {1});
  for (int i = 0; i <= 200; ++i) {
    const double v = -1 + 2.0 * i / 200.0;
    const double ref = (oracle::poly_eval(prim, v) - oracle::poly_eval(prim, -1)) / z;
    CHECK(std::abs(mu.cdf(v) - ref) < 1e-10);
  }
}

TEST_CASE("Kolmogorov-Smirnov band over many seeds") {
  const std::vector<double> dens = oracle::poly_mul(oracle::poly_mul({1, 1}, {1, 1}), {1, -1});
  const auto prim = oracle::poly_antiderivative(dens);
  const double lo = oracle::poly_eval(prim, -1);
  const double z = oracle::poly_eval(prim, 1) - lo;
  const auto mu = Measure::make_jacobi(2, 1, {1});

  const std::size_t count = 100000;
  const int seeds = 100;
  int passed = 0;
  for (int s = 0; s < seeds; ++s) {
    auto rng = RngStream::substream(2024, static_cast<std::uint64_t>(s), StreamRole::Potential);
    auto xs = mu.sample(rng, count);
    std::sort(xs.begin(), xs.end());
    double ks = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double f = (oracle::poly_eval(prim, xs[i]) - lo) / z;
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / count),
                     std::abs(f - static_cast<double>(i + 1) / count)});
    }
    if (ks <= 1.95 / std::sqrt(static_cast<double>(count))) ++passed;
  }
  CHECK(passed >= 99);
}

TEST_CASE("measure JSON round trip") {
  const nlohmann::json j = nlohmann::json::parse(R"({"kind":"jacobi","alpha":0.7,"beta":1.25,"d":[1.1,0.123456789012345]})");
  const auto mu = Measure::from_json(j);
  CHECK(mu.to_json().dump() == j.dump());
  const auto atoms = nlohmann::json::parse(R"({"kind":"atomic","atoms":[[-1.0,0.5],[1.0,0.5]]})");
  CHECK(Measure::from_json(atoms).to_json() == atoms);
  CHECK(code_of([] { Measure::from_json(nlohmann::json::parse(R"({"kind":"jacobi","alpha":0,"beta":0,"x":1})")); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { Measure::from_json(nlohmann::json::parse(R"({"kind":"gauss"})")); }) == ErrorCode::ConfigError);
}

TEST_CASE("symmetry detection") {
  CHECK(Measure::uniform().is_symmetric());
  CHECK(Measure::make_jacobi(2, 2, {1, 0, 0.3}).is_symmetric());
  CHECK_FALSE(Measure::make_jacobi(2, 1, {1}).is_symmetric());
  CHECK(Measure::make_atomic({{-1.0, 0.5}, {1.0, 0.5}}).is_symmetric());
  CHECK_FALSE(Measure::dirac(1.0).is_symmetric());
}
