#include "defsc/rmt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "defsc/error.hpp"

extern "C" __attribute__((weak)) void openblas_set_num_threads(int);

namespace defsc {

namespace {

std::string shortest(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void require_eta(SpectralPoint point) {
  if (!(point.eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "eta must be positive");
}

void require_square(const HermitianMatrix& h) {
  if (h.rows() != h.cols()) throw Error(ErrorCode::DimensionMismatch, "matrix is not square");
}

bool is_real(const HermitianMatrix& h) {
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = 0; i < h.rows(); ++i)
      if (h(i, j).imag() != 0.0) return false;
  return true;
}

std::vector<double> eigenvalues_only(const HermitianMatrix& h) { return spectrum(h, false).eigenvalues; }

}  // namespace

std::string_view to_string(MatrixKind kind) {
  return kind == MatrixKind::ComplexHermitian ? "ComplexHermitian" : "RealSymmetric";
}

std::string_view to_string(EntryLaw law) { return law == EntryLaw::Gaussian ? "Gaussian" : "Rademacher"; }

MatrixKind matrix_kind_from_string(std::string_view s) {
  if (s == "ComplexHermitian") return MatrixKind::ComplexHermitian;
  if (s == "RealSymmetric") return MatrixKind::RealSymmetric;
  throw Error(ErrorCode::ConfigError, "unknown matrix kind '" + std::string(s) + "'");
}

EntryLaw entry_law_from_string(std::string_view s) {
  if (s == "Gaussian") return EntryLaw::Gaussian;
  if (s == "Rademacher") return EntryLaw::Rademacher;
  throw Error(ErrorCode::ConfigError, "unknown entry law '" + std::string(s) + "'");
}

nlohmann::json EnsembleConfig::to_json() const {
  return {{"n_size", n_size},
          {"lambda", lambda},
          {"mu", mu.to_json()},
          {"kind", to_string(kind)},
          {"entry_law", to_string(entry_law)},
          {"seed", seed},
          {"trial_index", trial_index}};
}

EnsembleConfig EnsembleConfig::from_json(const nlohmann::json& j) {
  EnsembleConfig c;
  c.n_size = j.at("n_size").get<std::size_t>();
  c.lambda = j.at("lambda").get<double>();
  c.mu = Measure::from_json(j.at("mu"));
  c.kind = matrix_kind_from_string(j.at("kind").get<std::string>());
  c.entry_law = entry_law_from_string(j.at("entry_law").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.trial_index = j.at("trial_index").get<std::uint64_t>();
  return c;
}

HermitianMatrix sample_wigner(std::size_t n_size, MatrixKind kind, EntryLaw law, RngStream& rng) {
  if (n_size == 0) throw Error(ErrorCode::InvalidArgument, "n_size must be at least 1");
  const auto n = static_cast<Eigen::Index>(n_size);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_size));
  const bool complex_kind = kind == MatrixKind::ComplexHermitian;
  std::normal_distribution<double> normal;
  auto sign = [&] { return (rng() >> 63) ? -1.0 : 1.0; };
  auto draw = [&] { return law == EntryLaw::Gaussian ? normal(rng) : sign(); };

  HermitianMatrix w(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      complex x;
      if (complex_kind) {
        const double re = draw();
        const double im = draw();
        x = complex(re, im) * (scale * M_SQRT1_2);
      } else {
        x = draw() * scale;
      }
      w(i, j) = x;
      w(j, i) = std::conj(x);
    }
    const double diag = complex_kind ? draw() * scale : draw() * scale * M_SQRT2;
    w(j, j) = diag;
  }
  return w;
}

HermitianMatrix assemble(double lambda, const std::vector<double>& v, const HermitianMatrix& w) {
  require_square(w);
  if (static_cast<Eigen::Index>(v.size()) != w.rows())
    throw Error(ErrorCode::DimensionMismatch,
                "potential has " + std::to_string(v.size()) + " entries, matrix has " + std::to_string(w.rows()));
  for (double x : v)
    if (!(x >= -1.0 && x <= 1.0)) throw Error(ErrorCode::SupportViolation, "potential entry " + shortest(x));
  HermitianMatrix h = w;
  for (std::size_t i = 0; i < v.size(); ++i) h(i, i) += lambda * v[i];
  return h;
}

EnsembleDraw draw_ensemble(const EnsembleConfig& config) {
  auto vs = RngStream::substream(config.seed, config.trial_index, StreamRole::Potential);
  auto ws = RngStream::substream(config.seed, config.trial_index, StreamRole::Wigner);
  EnsembleDraw d;
  d.potential = config.mu.sample(vs, config.n_size);
  d.wigner = sample_wigner(config.n_size, config.kind, config.entry_law, ws);
  return d;
}

SpectralData spectrum(const HermitianMatrix& h, bool want_vectors) {
  require_square(h);
  const auto n = h.rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty matrix");
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i)
      if (std::abs(h(i, j) - std::conj(h(j, i))) > 1e-12)
        throw Error(ErrorCode::InvalidArgument, "matrix is not Hermitian");

  SpectralData out;
  out.eigenvalues.resize(n);
  const char jobz = want_vectors ? 'V' : 'N';
  lapack_int info = 0;
  if (is_real(h)) {
    Eigen::MatrixXd a = h.real();
    info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, jobz, 'U', n, a.data(), n, out.eigenvalues.data());
    if (info == 0 && want_vectors) out.eigenvectors = a.cast<complex>();
  } else {
    HermitianMatrix a = h;
    info = LAPACKE_zheevd(LAPACK_COL_MAJOR, jobz, 'U', n, a.data(), n, out.eigenvalues.data());
    if (info == 0 && want_vectors) out.eigenvectors = std::move(a);
  }
  if (info != 0) throw Error(ErrorCode::EigenFailure, "eigensolver returned info = " + std::to_string(info));
  return out;
}

SpectralData sample_spectrum(const EnsembleConfig& config, bool want_vectors) {
  auto d = draw_ensemble(config);
  SpectralData out = spectrum(assemble(config.lambda, d.potential, d.wigner), want_vectors);
  out.potential = std::move(d.potential);
  out.config = config;
  return out;
}

complex empirical_stieltjes(const SpectralData& data, SpectralPoint point) {
  require_eta(point);
  const complex z = point.z();
  complex acc = 0.0;
  for (double mu : data.eigenvalues) acc += 1.0 / (mu - z);
  return acc / static_cast<double>(data.size());
}

double counting(const SpectralData& data, double e1, double e2) {
  if (!(e1 < e2)) throw Error(ErrorCode::InvalidArgument, "counting window needs e1 < e2");
  const auto& ev = data.eigenvalues;
  auto lo = std::upper_bound(ev.begin(), ev.end(), e1);
  auto hi = std::upper_bound(ev.begin(), ev.end(), e2);
  return static_cast<double>(hi - lo) / static_cast<double>(ev.size());
}

double delocalization_stat(const SpectralData& data) {
  if (!data.eigenvectors) throw Error(ErrorCode::MissingVectors, "delocalization needs eigenvectors");
  return data.eigenvectors->cwiseAbs().maxCoeff();
}

std::vector<complex> green_entries(const SpectralData& data, SpectralPoint point,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (!data.eigenvectors) throw Error(ErrorCode::MissingVectors, "Green function entries need eigenvectors");
  require_eta(point);
  const auto& u = *data.eigenvectors;
  const auto n = static_cast<std::size_t>(u.rows());
  const complex z = point.z();
  Eigen::VectorXcd inv(u.cols());
  for (Eigen::Index a = 0; a < u.cols(); ++a) inv(a) = 1.0 / (data.eigenvalues[a] - z);

  std::vector<complex> out;
  out.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    if (i >= n || j >= n) throw Error(ErrorCode::InvalidArgument, "index out of range");
    complex acc = 0.0;
    for (Eigen::Index a = 0; a < u.cols(); ++a) acc += u(i, a) * std::conj(u(j, a)) * inv(a);
    out.push_back(acc);
  }
  return out;
}

double operator_norm(const SpectralData& data) {
  if (data.eigenvalues.empty()) return 0.0;
  return std::max(std::abs(data.eigenvalues.front()), std::abs(data.eigenvalues.back()));
}

Eigen::MatrixXcd resolvent(const HermitianMatrix& h, SpectralPoint point) {
  require_square(h);
  if (point.eta == 0.0) throw Error(ErrorCode::SingularResolvent, "resolvent on the real axis");
  require_eta(point);
  HermitianMatrix a = h;
  a.diagonal().array() -= point.z();
  return a.partialPivLu().inverse();
}

HermitianMatrix minor_matrix(const HermitianMatrix& h, std::size_t k) {
  require_square(h);
  const auto n = h.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  if (kk >= n) throw Error(ErrorCode::InvalidArgument, "minor index out of range");
  HermitianMatrix m(n - 1, n - 1);
  for (Eigen::Index j = 0, mj = 0; j < n; ++j) {
    if (j == kk) continue;
    for (Eigen::Index i = 0, mi = 0; i < n; ++i) {
      if (i == kk) continue;
      m(mi++, mj) = h(i, j);
    }
    ++mj;
  }
  return m;
}

double resolvent_identity_check(const HermitianMatrix& h, SpectralPoint point, std::size_t k) {
  require_square(h);
  if (static_cast<std::size_t>(h.rows()) > kMaxDirectResolventDim)
    throw Error(ErrorCode::InvalidArgument, "direct resolvent check limited to dimension 200");
  if (h.rows() < 2) throw Error(ErrorCode::InvalidArgument, "minor identity needs dimension at least 2");
  const auto g = resolvent(h, point);
  const auto gk = resolvent(minor_matrix(h, k), point);
  const auto n = h.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  double worst = 0.0;
  for (Eigen::Index j = 0, mj = 0; j < n; ++j) {
    if (j == kk) continue;
    for (Eigen::Index i = 0, mi = 0; i < n; ++i) {
      if (i == kk) continue;
      const complex d = g(i, j) - gk(mi, mj) - g(i, kk) * g(kk, j) / g(kk, kk);
      worst = std::max(worst, std::abs(d));
      ++mi;
    }
    ++mj;
  }
  return worst;
}

double ward_identity_check(const HermitianMatrix& h, SpectralPoint point) {
  const auto g = resolvent(h, point);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double lhs = g.row(i).squaredNorm();
    worst = std::max(worst, std::abs(lhs - g(i, i).imag() / point.eta));
  }
  return worst;
}

double schur_complement_check(const HermitianMatrix& h, SpectralPoint point, std::size_t i) {
  require_square(h);
  const auto ii = static_cast<Eigen::Index>(i);
  if (ii >= h.rows()) throw Error(ErrorCode::InvalidArgument, "index out of range");
  const auto g = resolvent(h, point);
  complex rhs = h(ii, ii) - point.z();
  if (h.rows() > 1) {
    const auto gi = resolvent(minor_matrix(h, i), point);
    Eigen::VectorXcd col(h.rows() - 1);
    for (Eigen::Index k = 0, m = 0; k < h.rows(); ++k)
      if (k != ii) col(m++) = h(k, ii);
    rhs -= (col.adjoint() * gi * col)(0, 0);
  }
  return std::abs(1.0 / g(ii, ii) - rhs);
}

double interlacing_violation(const HermitianMatrix& h, std::size_t k) {
  const auto outer = eigenvalues_only(h);
  if (outer.size() < 2) throw Error(ErrorCode::InvalidArgument, "interlacing needs dimension at least 2");
  const auto inner = eigenvalues_only(minor_matrix(h, k));
  double worst = 0.0;
  for (std::size_t a = 0; a < inner.size(); ++a) {
    worst = std::max(worst, outer[a] - inner[a]);
    worst = std::max(worst, inner[a] - outer[a + 1]);
  }
  return worst;
}

void dump_spectrum(const SpectralData& data, const std::filesystem::path& stem) {
  auto csv_path = stem;
  csv_path += ".csv";
  auto meta_path = stem;
  meta_path += ".json";
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
  csv << "alpha,mu_alpha,v_alpha_sorted_by_index\n";
  for (std::size_t a = 0; a < data.size(); ++a) {
    csv << a << ',' << shortest(data.eigenvalues[a]) << ',';
    if (a < data.potential.size()) csv << shortest(data.potential[a]);
    csv << '\n';
  }
  if (!csv) throw Error(ErrorCode::IoError, "write failed for " + csv_path.string());

  nlohmann::json meta = {{"n_eigenvalues", data.size()}, {"has_eigenvectors", data.eigenvectors.has_value()}};
  if (data.config) meta["config"] = data.config->to_json();
  std::ofstream js(meta_path);
  if (!js) throw Error(ErrorCode::IoError, "cannot write " + meta_path.string());
  js << meta.dump(2) << '\n';
  if (!js) throw Error(ErrorCode::IoError, "write failed for " + meta_path.string());
}

void pin_blas_threads() {
  if (openblas_set_num_threads) openblas_set_num_threads(1);
}

}  // namespace defsc
