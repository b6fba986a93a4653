#include "chronos/embed.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "chronos/error.hpp"

namespace chronos {

namespace {

constexpr char kModelMagic[5] = "CHR1";
constexpr double kDegenerateNorm = 1e-12;
// Guards against absurd headers in corrupt files.
constexpr std::uint32_t kMaxLayerDim = 1u << 20;

std::string str(std::size_t n) { return std::to_string(n); }

}  // namespace

std::size_t NetworkParams::input_width() const {
  if (layers.empty()) throw Error(ErrorKind::InvalidArgument, "network has no layers");
  return layers.front().inputs();
}

std::size_t NetworkParams::output_width() const {
  if (layers.empty()) throw Error(ErrorKind::InvalidArgument, "network has no layers");
  return layers.back().outputs();
}

void NetworkParams::validate() const {
  if (layers.empty()) throw Error(ErrorKind::InvalidArgument, "network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + str(i) + " has an empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + str(i) + " bias does not match its row count");
    }
    if (i > 0 && layers[i - 1].outputs() != layer.inputs()) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + str(i) + " input width does not match previous output");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "layer " + str(i) + " has non-finite parameters");
    }
  }
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (a.seed != b.seed || a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols()) return false;
    if (x.weights != y.weights || x.bias != y.bias) return false;
  }
  return true;
}

std::size_t feature_width(std::size_t length) noexcept { return 2 * (length / 2); }

std::vector<double> features(const NormalizedSeries& ns, std::size_t max_width) {
  const auto spectrum = dft(ns.values);
  const std::size_t half = ns.size() / 2;
  std::vector<double> out;
  out.reserve(2 * half);
  for (std::size_t j = 1; j <= half; ++j) {
    out.push_back(spectrum.coeffs[j].real());
    out.push_back(spectrum.coeffs[j].imag());
  }
  if (max_width > 0 && out.size() > max_width) out.resize(max_width);
  return out;
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> x) {
  if (x.size() != params.input_width()) {
    throw Error(ErrorKind::DimensionMismatch,
                "input has width " + str(x.size()) + ", network expects " + str(params.input_width()));
  }
  Vector activation = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Vector z = layer.weights * activation + layer.bias;
    if (i + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    activation = std::move(z);
  }
  const double norm = activation.norm();
  if (!(norm >= kDegenerateNorm)) {
    throw Error(ErrorKind::DegenerateOutput, "network output has norm below 1e-12");
  }
  activation /= norm;
  return {activation.data(), activation.data() + activation.size()};
}

std::vector<double> embed_dft_baseline(const NormalizedSeries& ns, std::size_t m) {
  if (m < 2 || m % 2 != 0 || m >= ns.size()) {
    throw Error(ErrorKind::InvalidM, "DFT baseline needs even m in [2, M), got m = " + str(m) + ", M = " + str(ns.size()));
  }
  const auto spectrum = dft(ns.values);
  std::vector<double> out;
  out.reserve(m);
  for (std::size_t j = 1; j <= m / 2; ++j) {
    out.push_back(spectrum.coeffs[j].real());
    out.push_back(spectrum.coeffs[j].imag());
  }
  return out;
}

std::vector<double> embed_downsample(const NormalizedSeries& ns, std::size_t m) {
  const std::size_t length = ns.size();
  if (m < 1 || m > length) {
    throw Error(ErrorKind::InvalidM, "down-sampling needs 1 <= m <= M, got m = " + str(m) + ", M = " + str(length));
  }
  const double scale = std::sqrt(static_cast<double>(length) / static_cast<double>(m));
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = ns.values[j * length / m] * scale;
  return out;
}

std::vector<double> embed(const Embedder& embedder, const NormalizedSeries& ns) {
  struct Visitor {
    const NormalizedSeries& ns;
    std::vector<double> operator()(const LearnedEmbedder& e) const {
      const std::size_t width = e.params.input_width();
      if (feature_width(ns.size()) < width) {
        throw Error(ErrorKind::DimensionMismatch, "series of length " + str(ns.size()) +
                                                      " yields fewer features than the network input width " +
                                                      str(width));
      }
      return forward(e.params, features(ns, width));
    }
    std::vector<double> operator()(const DftTruncation& e) const { return embed_dft_baseline(ns, e.m); }
    std::vector<double> operator()(const DownSample& e) const { return embed_downsample(ns, e.m); }
  };
  return std::visit(Visitor{ns}, embedder);
}

std::size_t embedding_dim(const Embedder& embedder) {
  struct Visitor {
    std::size_t operator()(const LearnedEmbedder& e) const { return e.params.output_width(); }
    std::size_t operator()(const DftTruncation& e) const { return e.m; }
    std::size_t operator()(const DownSample& e) const { return e.m; }
  };
  return std::visit(Visitor{}, embedder);
}

std::string describe(const Embedder& embedder) {
  struct Visitor {
    std::string operator()(const LearnedEmbedder& e) const {
      std::ostringstream out;
      out << "learned(";
      for (std::size_t i = 0; i < e.params.layers.size(); ++i) {
        out << (i == 0 ? "" : "-") << e.params.layers[i].inputs();
      }
      out << "-" << e.params.output_width() << ")";
      return out.str();
    }
    std::string operator()(const DftTruncation& e) const { return "dft(m=" + str(e.m) + ")"; }
    std::string operator()(const DownSample& e) const { return "downsample(m=" + str(e.m) + ")"; }
  };
  return std::visit(Visitor{}, embedder);
}

void write_model(const NetworkParams& params, std::ostream& out) {
  params.validate();
  out.write(kModelMagic, 4);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& layer : params.layers) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.outputs()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.inputs()));
    const double* w = layer.weights.data();  // row-major storage
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) detail::write_f64(out, w[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) detail::write_f64(out, layer.bias[i]);
  }
  detail::write_le<std::uint64_t>(out, params.seed);
  if (!out) throw Error(ErrorKind::MissingArtifact, "failed writing model");
}

NetworkParams read_model(std::istream& in) {
  detail::expect_magic(in, kModelMagic);
  const auto count = detail::read_le<std::uint32_t>(in, "layer count");
  if (count == 0 || count > 1024) throw Error(ErrorKind::ParseError, "implausible layer count " + str(count));
  NetworkParams params;
  params.layers.resize(count);
  for (auto& layer : params.layers) {
    const auto rows = detail::read_le<std::uint32_t>(in, "layer rows");
    const auto cols = detail::read_le<std::uint32_t>(in, "layer cols");
    if (rows == 0 || cols == 0 || rows > kMaxLayerDim || cols > kMaxLayerDim) {
      throw Error(ErrorKind::ParseError, "implausible layer shape " + str(rows) + "x" + str(cols));
    }
    layer.weights.resize(rows, cols);
    double* w = layer.weights.data();
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) w[i] = detail::read_f64(in, "weights");
    layer.bias.resize(rows);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = detail::read_f64(in, "biases");
  }
  params.seed = detail::read_le<std::uint64_t>(in, "seed");
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::ParseError, "trailing bytes after model");
  params.validate();
  return params;
}

void save_model(const NetworkParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string() + " for writing");
  write_model(params, out);
}

NetworkParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open model " + path.string());
  return read_model(in);
}

}  // namespace chronos
