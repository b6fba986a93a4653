#include <gtest/gtest.h>

#include <cmath>

#include "chronos/core.hpp"
#include "chronos/datasets.hpp"
#include "chronos/error.hpp"
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

TEST(Normalize, LinearRamp) {
  const std::vector<double> ramp{1.0, 2.0, 3.0};
  const auto ns = normalize(ramp);
  EXPECT_DOUBLE_EQ(ns.mean, 2.0);
  EXPECT_NEAR(ns.values[0], -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(ns.values[1], 0.0, 1e-15);
  EXPECT_NEAR(ns.values[2], 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Normalize, ConstantSeriesRejected) {
  const std::vector<double> flat{5.0, 5.0, 5.0};
  EXPECT_EQ(kind_of([&] { normalize(flat); }), ErrorKind::ConstantSeries);
}

TEST(Normalize, InvariantsAndReconstruction) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = oracle::random_series(64, rng);
    for (auto& v : s) v = 3.0 * v + 10.0;
    const auto ns = normalize(s);
    double sum = 0.0, sq = 0.0;
    for (double v : ns.values) {
      sum += v;
      sq += v * v;
    }
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-9);
    EXPECT_NEAR(sum, 0.0, 1e-9);
    for (std::size_t j = 0; j < s.size(); ++j) EXPECT_NEAR(ns.scale() * ns.values[j] + ns.mean, s[j], 1e-9);
  }
}

TEST(Pearson, PerfectAndReversedRamps) {
  const std::vector<double> s{1.0, 2.0, 3.0};
  EXPECT_NEAR(pearson(s, std::vector<double>{2.0, 4.0, 6.0}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(s, std::vector<double>{3.0, 2.0, 1.0}), -1.0, 1e-15);
}

TEST(Pearson, MatchesDirectDefinition) {
  Rng rng(2024);
  const auto s = oracle::random_series(100, rng);
  const auto r = oracle::random_series(100, rng);
  EXPECT_NEAR(pearson(s, r), oracle::pearson_direct(s, r), 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{1.0, 2.0};
  const std::vector<double> flat{4.0, 4.0, 4.0};
  EXPECT_EQ(kind_of([&] { pearson(a, b); }), ErrorKind::LengthMismatch);
  EXPECT_EQ(kind_of([&] { pearson(a, flat); }), ErrorKind::ConstantSeries);
}

TEST(Pearson, DistanceIdentityProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t len = 4 + rng.index(200);
    const auto s = oracle::random_series(len, rng);
    const auto r = oracle::random_series(len, rng);
    const auto ns = normalize(s);
    const auto nr = normalize(r);
    EXPECT_NEAR(pearson(s, r), 1.0 - squared_distance(ns.values, nr.values) / 2.0, 1e-9);
  }
}

TEST(Dft, UnitImpulse) {
  const auto f = dft(std::vector<double>{1.0, 0.0, 0.0, 0.0});
  ASSERT_EQ(f.size(), 4u);
  for (const auto& c : f.coeffs) {
    EXPECT_NEAR(c.real(), 0.5, 1e-15);
    EXPECT_NEAR(c.imag(), 0.0, 1e-15);
  }
}

TEST(Dft, ConstantSignalIsDcOnly) {
  const double c = 1.75;
  const auto f = dft(std::vector<double>(8, c));
  EXPECT_NEAR(f.coeffs[0].real(), c * std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(f.coeffs[0].imag(), 0.0, 1e-12);
  for (std::size_t j = 1; j < 8; ++j) EXPECT_NEAR(std::abs(f.coeffs[j]), 0.0, 1e-12);
}

TEST(Dft, MatchesDirectSumForPowerOfTwoAndOtherLengths) {
  Rng rng(3);
  for (std::size_t len : {4u, 5u, 8u, 12u, 64u, 100u, 128u, 426u}) {
    const auto x = oracle::random_series(len, rng);
    const auto got = dft(x);
    const auto want = oracle::dft_direct(x);
    for (std::size_t j = 0; j < len; ++j) {
      EXPECT_NEAR(got.coeffs[j].real(), want[j].real(), 1e-9) << "len " << len << " j " << j;
      EXPECT_NEAR(got.coeffs[j].imag(), want[j].imag(), 1e-9) << "len " << len << " j " << j;
    }
  }
}

TEST(Dft, RejectsShortInput) {
  EXPECT_EQ(kind_of([] { dft(std::vector<double>{1.0, 2.0, 3.0}); }), ErrorKind::InvalidArgument);
}

TEST(Dft, ParsevalAndConjugateSymmetryProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 4 + rng.index(125);
    const auto x = oracle::random_series(len, rng);
    const auto f = dft(x);
    double time_energy = 0.0, freq_energy = 0.0;
    for (double v : x) time_energy += v * v;
    for (const auto& c : f.coeffs) freq_energy += std::norm(c);
    ASSERT_NEAR(freq_energy, time_energy, 1e-9 * std::max(1.0, time_energy));
    for (std::size_t i = 1; i < len; ++i) {
      ASSERT_NEAR(std::abs(f.coeffs[i] - std::conj(f.coeffs[len - i])), 0.0, 1e-9);
    }
  }
}

TEST(Dft, NormalizedInputHasNoDcTerm) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = oracle::random_series(4 + rng.index(300), rng);
    for (auto& v : x) v += 42.0;
    const auto f = dft(normalize(x).values);
    EXPECT_LE(std::abs(f.coeffs[0]), 1e-9);
  }
}

TEST(Dft, InverseRoundTrip) {
  Rng rng(8);
  for (std::size_t len : {16u, 30u}) {
    const auto x = oracle::random_series(len, rng);
    const auto back = inverse_dft(dft(x).coeffs);
    for (std::size_t l = 0; l < len; ++l) {
      EXPECT_NEAR(back[l].real(), x[l], 1e-12);
      EXPECT_NEAR(back[l].imag(), 0.0, 1e-12);
    }
  }
}

TEST(TruncatedDistance, IdentityAndErrors) {
  Rng rng(1);
  const auto a = dft(normalize(oracle::random_series(16, rng)).values);
  for (std::size_t m = 1; m < 8; ++m) EXPECT_EQ(truncated_distance_sq(a, a, m), 0.0);
  EXPECT_EQ(kind_of([&] { truncated_distance_sq(a, a, 0); }), ErrorKind::InvalidM);
  EXPECT_EQ(kind_of([&] { truncated_distance_sq(a, a, 8); }), ErrorKind::InvalidM);
}

TEST(TruncatedDistance, FullSpectrumEqualsTwoMinusTwoCorrelation) {
  Rng rng(21);
  for (std::size_t len : {16u, 17u, 64u}) {
    const auto s = oracle::random_series(len, rng);
    const auto r = oracle::random_series(len, rng);
    const auto fs = dft(normalize(s).values);
    const auto fr = dft(normalize(r).values);
    double full = 0.0;
    for (std::size_t j = 1; j < len; ++j) full += std::norm(fs.coeffs[j] - fr.coeffs[j]);
    EXPECT_NEAR(full, 2.0 - 2.0 * oracle::pearson_direct(s, r), 1e-8);
  }
}

TEST(TruncatedDistance, MonotoneAndSymmetric) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 8 + rng.index(60);
    const auto a = dft(normalize(oracle::random_series(len, rng)).values);
    const auto b = dft(normalize(oracle::random_series(len, rng)).values);
    double previous = 0.0;
    for (std::size_t m = 1; 2 * m < len; ++m) {
      const double d = truncated_distance_sq(a, b, m);
      EXPECT_GE(d, previous);
      EXPECT_EQ(d, truncated_distance_sq(b, a, m));
      previous = d;
    }
  }
}

TEST(TruncatedDistance, RepeatedSpectrumIdentity) {
  const std::size_t len = 64;
  const auto ds = gen_example1(6, len, 17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      const auto& s = ds.series[i].values;
      const auto& r = ds.series[j].values;
      const double d = truncated_distance_sq(dft(normalize(s).values), dft(normalize(r).values), len / 4);
      EXPECT_NEAR(4.0 * d, 2.0 - 2.0 * oracle::pearson_direct(s, r), 1e-8);
    }
  }
}

TEST(TruncatedDistance, CorrelationThresholdBound) {
  // corr > 1 - eps^2/2 implies d_m^2 < eps^2.
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t len = 16 + rng.index(100);
    const auto s = oracle::random_series(len, rng);
    auto r = s;
    const double noise = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    for (auto& v : r) v += noise * rng.normal();
    const double corr = pearson(s, r);
    const double eps_sq = (2.0 - 2.0 * corr) * (1.0 + 1e-6) + 1e-15;
    ASSERT_GT(corr, 1.0 - eps_sq / 2.0);
    const auto fs = dft(normalize(s).values);
    const auto fr = dft(normalize(r).values);
    for (std::size_t m = 1; 2 * m < len; ++m) EXPECT_LT(truncated_distance_sq(fs, fr, m), eps_sq);
  }
}

}  // namespace
}  // namespace chronos
