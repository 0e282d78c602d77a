#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "defsc/freeconv.hpp"
#include "defsc/measure.hpp"
#include "defsc/rng.hpp"
#include "json.hpp"

namespace defsc {

enum class MatrixKind { ComplexHermitian, RealSymmetric };
enum class EntryLaw { Gaussian, Rademacher };

std::string_view to_string(MatrixKind kind);
std::string_view to_string(EntryLaw law);
MatrixKind matrix_kind_from_string(std::string_view s);
EntryLaw entry_law_from_string(std::string_view s);

struct EnsembleConfig {
  std::size_t n_size = 1;
  double lambda = 0.0;
  Measure mu = Measure::uniform();
  MatrixKind kind = MatrixKind::ComplexHermitian;
  EntryLaw entry_law = EntryLaw::Gaussian;
  std::uint64_t seed = 0;
  std::uint64_t trial_index = 0;

  nlohmann::json to_json() const;
  static EnsembleConfig from_json(const nlohmann::json& j);
};

using HermitianMatrix = Eigen::MatrixXcd;

struct SpectralData {
  std::vector<double> eigenvalues;
  // Column alpha is the normalised eigenvector for eigenvalues[alpha].
  std::optional<Eigen::MatrixXcd> eigenvectors;
  std::vector<double> potential;
  std::optional<EnsembleConfig> config;

  std::size_t size() const { return eigenvalues.size(); }
};

/// Upper triangle is drawn column by column, so the matrix depends only on the stream.
HermitianMatrix sample_wigner(std::size_t n_size, MatrixKind kind, EntryLaw law, RngStream& rng);

/// lambda * diag(v) + w. Entries of v must lie in [-1, 1].
HermitianMatrix assemble(double lambda, const std::vector<double>& v, const HermitianMatrix& w);

struct EnsembleDraw {
  std::vector<double> potential;
  HermitianMatrix wigner;
};

EnsembleDraw draw_ensemble(const EnsembleConfig& config);

SpectralData spectrum(const HermitianMatrix& h, bool want_vectors);

/// Draw, assemble and diagonalise one trial.
SpectralData sample_spectrum(const EnsembleConfig& config, bool want_vectors);

complex empirical_stieltjes(const SpectralData& data, SpectralPoint point);

/// Fraction of eigenvalues in (e1, e2].
double counting(const SpectralData& data, double e1, double e2);

/// max over alpha and i of |u_alpha(i)|
double delocalization_stat(const SpectralData& data);

std::vector<complex> green_entries(const SpectralData& data, SpectralPoint point,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

double operator_norm(const SpectralData& data);

/// (h - z)^{-1} by dense LU.
Eigen::MatrixXcd resolvent(const HermitianMatrix& h, SpectralPoint point);

/// h with row and column k removed.
HermitianMatrix minor_matrix(const HermitianMatrix& h, std::size_t k);

constexpr std::size_t kMaxDirectResolventDim = 200;

/// max_{i,j != k} |G_ij - G^(k)_ij - G_ik G_kj / G_kk|
double resolvent_identity_check(const HermitianMatrix& h, SpectralPoint point, std::size_t k);

/// max_i |sum_n |G_in|^2 - Im G_ii / eta|
double ward_identity_check(const HermitianMatrix& h, SpectralPoint point);

/// |1/G_ii - (h_ii - z - sum_{k,l != i} h_ik G^(i)_kl h_li)|
double schur_complement_check(const HermitianMatrix& h, SpectralPoint point, std::size_t i);

/// Largest amount by which the eigenvalues of the k-minor fall outside the
/// interlacing intervals [mu_alpha, mu_{alpha+1}]; zero when they interlace.
double interlacing_violation(const HermitianMatrix& h, std::size_t k);

/// Writes <stem>.csv and <stem>.json next to each other.
void dump_spectrum(const SpectralData& data, const std::filesystem::path& stem);

/// Keep the BLAS single threaded inside each worker.
void pin_blas_threads();

}  // namespace defsc
