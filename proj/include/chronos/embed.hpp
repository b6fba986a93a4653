#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "chronos/core.hpp"

namespace chronos {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// y = W x + b. weights is rows x cols (output x input).
struct DenseLayer {
  Matrix weights;
  Vector bias;

  std::size_t inputs() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t outputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

/// Dense ReLU network. Every layer but the last is followed by a ReLU; the
/// output is projected onto the unit sphere.
struct NetworkParams {
  std::vector<DenseLayer> layers;
  /// Seed used for initialization and training.
  std::uint64_t seed = 0;

  std::size_t input_width() const;
  std::size_t output_width() const;
  /// Throws DimensionMismatch if layer shapes do not chain, InvalidArgument
  /// on non-finite entries or an empty network.
  void validate() const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b);
};

/// Interleaved [Re c_1, Im c_1, ..., Re c_h, Im c_h] for h = floor(M/2).
/// With max_width > 0 only the first max_width values are kept.
std::vector<double> features(const NormalizedSeries& ns, std::size_t max_width = 0);
std::size_t feature_width(std::size_t length) noexcept;

/// Strict inference: throws DegenerateOutput if the pre-normalization
/// output has norm below 1e-12, DimensionMismatch if x has the wrong width.
std::vector<double> forward(const NetworkParams& params, std::span<const double> x);

/// First m/2 non-DC coefficients flattened to m reals. m must be even and
/// in [2, M).
std::vector<double> embed_dft_baseline(const NormalizedSeries& ns, std::size_t m);

/// Values at indices floor(j M / m), j = 0..m-1, scaled by sqrt(M/m).
std::vector<double> embed_downsample(const NormalizedSeries& ns, std::size_t m);

struct LearnedEmbedder {
  NetworkParams params;
};
struct DftTruncation {
  std::size_t m = 0;
};
struct DownSample {
  std::size_t m = 0;
};

using Embedder = std::variant<LearnedEmbedder, DftTruncation, DownSample>;

std::vector<double> embed(const Embedder& embedder, const NormalizedSeries& ns);
std::size_t embedding_dim(const Embedder& embedder);
std::string describe(const Embedder& embedder);

// Model file, little-endian:
//   "CHR1" | u32 layers | per layer: u32 rows, u32 cols, rows*cols f64
//   weights (row-major), rows f64 biases | u64 seed
void write_model(const NetworkParams& params, std::ostream& out);
NetworkParams read_model(std::istream& in);
void save_model(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_model(const std::filesystem::path& path);

}  // namespace chronos
