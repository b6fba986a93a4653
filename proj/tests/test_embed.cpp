#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "chronos/datasets.hpp"
#include "chronos/embed.hpp"
#include "chronos/error.hpp"
#include "chronos/train.hpp"
#include "oracles.hpp"

namespace chronos {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected chronos::Error";
  return ErrorKind::Usage;
}

oracle::LoopNet to_loop_net(const NetworkParams& p) {
  oracle::LoopNet net;
  for (const auto& layer : p.layers) {
    net.rows.push_back(layer.outputs());
    net.cols.push_back(layer.inputs());
    net.weights.emplace_back(layer.weights.data(), layer.weights.data() + layer.weights.size());
    net.biases.emplace_back(layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return net;
}

TEST(Features, RampOfLengthFour) {
  const std::vector<double> ramp{1.0, 2.0, 3.0, 4.0};
  const auto ns = normalize(ramp);
  const auto spectrum = oracle::dft_direct(oracle::normalize_direct(ramp));
  const auto f = features(ns);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_NEAR(f[0], spectrum[1].real(), 1e-12);
  EXPECT_NEAR(f[1], spectrum[1].imag(), 1e-12);
  EXPECT_NEAR(f[2], spectrum[2].real(), 1e-12);
  EXPECT_NEAR(f[3], spectrum[2].imag(), 1e-12);
}

TEST(Features, ParsevalBookkeeping) {
  // ||x||^2 = 2 sum_{j=1..floor(M/2)} |c_j|^2 - [M even] |c_{M/2}|^2 = 1.
  Rng rng(31);
  for (std::size_t len : {8u, 9u, 64u, 101u}) {
    const auto ns = normalize(oracle::random_series(len, rng));
    const auto f = features(ns);
    ASSERT_EQ(f.size(), feature_width(len));
    double sq = 0.0;
    for (double v : f) sq += v * v;
    double nyquist = 0.0;
    if (len % 2 == 0) nyquist = f[f.size() - 2] * f[f.size() - 2] + f[f.size() - 1] * f[f.size() - 1];
    EXPECT_NEAR(2.0 * sq - nyquist, 1.0, 1e-9) << "M = " << len;
  }
}

TEST(Features, CapKeepsLowFrequenciesFirst) {
  Rng rng(2);
  const auto ns = normalize(oracle::random_series(32, rng));
  const auto full = features(ns);
  const auto capped = features(ns, 6);
  ASSERT_EQ(capped.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(capped[i], full[i]);
}

TEST(Forward, ZeroNetworkIsDegenerate) {
  NetworkParams p;
  p.layers.push_back(DenseLayer{Matrix::Zero(4, 3), Vector::Zero(4)});
  p.layers.push_back(DenseLayer{Matrix::Zero(2, 4), Vector::Zero(2)});
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_EQ(kind_of([&] { forward(p, x); }), ErrorKind::DegenerateOutput);
}

TEST(Forward, IdentityNetworkNormalizesNonnegativeInput) {
  NetworkParams p;
  p.layers.push_back(DenseLayer{Matrix::Identity(3, 3), Vector::Zero(3)});
  p.layers.push_back(DenseLayer{Matrix::Identity(3, 3), Vector::Zero(3)});
  const std::vector<double> x{3.0, 0.0, 4.0};
  const auto y = forward(p, x);
  EXPECT_NEAR(y[0], 0.6, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  EXPECT_NEAR(y[2], 0.8, 1e-15);
}

TEST(Forward, MatchesLoopReimplementation) {
  Rng rng(77);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = init_network(12, 9, 5, seed);
    for (auto& layer : p.layers) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = 0.1 * rng.normal();
    }
    const auto net = to_loop_net(p);
    const auto x = oracle::random_series(12, rng);
    const auto got = forward(p, x);
    const auto want = net(x);
    double norm = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12);
      norm += got[i] * got[i];
    }
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-7);
    EXPECT_EQ(forward(p, x), got);
  }
}

TEST(Forward, WidthMismatch) {
  const auto p = init_network(4, 3, 2, 1);
  EXPECT_EQ(kind_of([&] { forward(p, std::vector<double>{1.0, 2.0}); }), ErrorKind::DimensionMismatch);
}

TEST(DftBaseline, IdenticalSeriesHaveZeroDistance) {
  Rng rng(6);
  const auto ns = normalize(oracle::random_series(32, rng));
  EXPECT_EQ(squared_distance(embed_dft_baseline(ns, 8), embed_dft_baseline(ns, 8)), 0.0);
}

TEST(DftBaseline, MatchesTruncatedDistance) {
  Rng rng(1234);
  const auto s = normalize(oracle::random_series(64, rng));
  const auto r = normalize(oracle::random_series(64, rng));
  const double embedded = squared_distance(embed_dft_baseline(s, 8), embed_dft_baseline(r, 8));
  const double truncated = truncated_distance_sq(dft(s.values), dft(r.values), 4);
  EXPECT_NEAR(2.0 * embedded, 2.0 * truncated, 1e-12);
}

TEST(DftBaseline, RepeatedSpectrumIsOffByConstantFactor) {
  // For repeated-spectrum data, ||s^ - r^||^2 = 4 d_{M/4}^2, so the baseline
  // at m = M/2 reals recovers half of 2 - 2 corr and a sqrt(2) rescaling of
  // it is exact.
  const std::size_t len = 32;
  const auto ds = gen_example1(5, len, 3);
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) {
    const auto s = normalize(ds.series[i].values);
    const auto r = normalize(ds.series[i + 1].values);
    const double target = 2.0 - 2.0 * pearson(s, r);
    const double dist = squared_distance(embed_dft_baseline(s, len / 2), embed_dft_baseline(r, len / 2));
    EXPECT_NEAR(2.0 * dist, target / 2.0, 1e-8);
    EXPECT_NEAR(2.0 * (2.0 * dist), target, 1e-8);
  }
}

TEST(DftBaseline, DistanceMonotoneInM) {
  Rng rng(8);
  const auto s = normalize(oracle::random_series(40, rng));
  const auto r = normalize(oracle::random_series(40, rng));
  double previous = 0.0;
  for (std::size_t m = 2; m < 40; m += 2) {
    const double d = squared_distance(embed_dft_baseline(s, m), embed_dft_baseline(r, m));
    EXPECT_GE(d, previous);
    previous = d;
  }
}

TEST(DftBaseline, InvalidM) {
  Rng rng(9);
  const auto ns = normalize(oracle::random_series(16, rng));
  EXPECT_EQ(kind_of([&] { embed_dft_baseline(ns, 3); }), ErrorKind::InvalidM);
  EXPECT_EQ(kind_of([&] { embed_dft_baseline(ns, 0); }), ErrorKind::InvalidM);
  EXPECT_EQ(kind_of([&] { embed_dft_baseline(ns, 16); }), ErrorKind::InvalidM);
}

TEST(DownSample, FullLengthIsIdentity) {
  Rng rng(10);
  const auto ns = normalize(oracle::random_series(20, rng));
  EXPECT_EQ(embed_downsample(ns, 20), ns.values);
}

TEST(DownSample, RampPicksEveryOtherValue) {
  const auto ns = normalize(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const auto e = embed_downsample(ns, 4);
  ASSERT_EQ(e.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(e[j], ns.values[2 * j] * std::sqrt(2.0), 1e-15);
}

TEST(DownSample, UnevenStride) {
  const auto ns = normalize(std::vector<double>{1, 5, 2, 8, 3, 9, 4});
  const auto e = embed_downsample(ns, 3);
  const double scale = std::sqrt(7.0 / 3.0);
  EXPECT_NEAR(e[0], ns.values[0] * scale, 1e-15);
  EXPECT_NEAR(e[1], ns.values[2] * scale, 1e-15);
  EXPECT_NEAR(e[2], ns.values[4] * scale, 1e-15);
}

TEST(DownSample, IdenticalSeriesAndInvalidM) {
  Rng rng(12);
  const auto ns = normalize(oracle::random_series(16, rng));
  for (std::size_t m = 1; m <= 16; ++m) {
    EXPECT_EQ(squared_distance(embed_downsample(ns, m), embed_downsample(ns, m)), 0.0);
  }
  EXPECT_EQ(kind_of([&] { embed_downsample(ns, 0); }), ErrorKind::InvalidM);
  EXPECT_EQ(kind_of([&] { embed_downsample(ns, 17); }), ErrorKind::InvalidM);
}

TEST(Embedder, VariantDispatchAndDeterminism) {
  Rng rng(13);
  const auto ns = normalize(oracle::random_series(32, rng));
  const Embedder learned = LearnedEmbedder{init_network(feature_width(32), 16, 4, 5)};
  const Embedder dft_embedder = DftTruncation{6};
  const Embedder down = DownSample{5};
  EXPECT_EQ(embedding_dim(learned), 4u);
  EXPECT_EQ(embedding_dim(dft_embedder), 6u);
  EXPECT_EQ(embedding_dim(down), 5u);
  EXPECT_EQ(embed(learned, ns), embed(learned, ns));
  EXPECT_EQ(embed(dft_embedder, ns), embed_dft_baseline(ns, 6));
  EXPECT_EQ(embed(down, ns), embed_downsample(ns, 5));

  const Embedder too_wide = LearnedEmbedder{init_network(40, 8, 4, 5)};
  EXPECT_EQ(kind_of([&] { embed(too_wide, ns); }), ErrorKind::DimensionMismatch);
}

TEST(ModelFile, HeaderLayout) {
  NetworkParams p;
  p.seed = 0x0102030405060708ULL;
  p.layers.push_back(DenseLayer{Matrix::Constant(2, 1, 1.0), Vector::Constant(2, -2.0)});
  std::ostringstream out;
  write_model(p, out);
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 4u + 4u + 8u + 2 * 8u + 2 * 8u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), "CHR1");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 8), std::string("\x02\x00\x00\x00\x01\x00\x00\x00", 8));
  // 1.0 = 0x3ff0000000000000, little-endian.
  EXPECT_EQ(bytes.substr(16, 8), std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
  EXPECT_EQ(bytes.substr(bytes.size() - 8), std::string("\x08\x07\x06\x05\x04\x03\x02\x01", 8));
}

TEST(ModelFile, RoundTripIsBitExact) {
  Rng rng(44);
  auto p = init_network(10, 7, 3, 99);
  for (auto& layer : p.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.normal();
  }
  std::ostringstream first;
  write_model(p, first);
  std::istringstream in(first.str());
  const auto loaded = read_model(in);
  EXPECT_EQ(loaded, p);
  std::ostringstream second;
  write_model(loaded, second);
  EXPECT_EQ(first.str(), second.str());
}

TEST(ModelFile, CorruptInputs) {
  std::istringstream bad_magic(std::string("XXXX\x01\x00\x00\x00", 8));
  EXPECT_EQ(kind_of([&] { read_model(bad_magic); }), ErrorKind::ParseError);

  std::ostringstream out;
  write_model(init_network(4, 3, 2, 1), out);
  const std::string full = out.str();
  std::istringstream truncated(full.substr(0, full.size() - 3));
  EXPECT_EQ(kind_of([&] { read_model(truncated); }), ErrorKind::ParseError);
  std::istringstream trailing(full + "x");
  EXPECT_EQ(kind_of([&] { read_model(trailing); }), ErrorKind::ParseError);

  EXPECT_EQ(kind_of([] { load_model("/nonexistent/model.chr"); }), ErrorKind::MissingArtifact);
}

}  // namespace
}  // namespace chronos
