#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chronos/error.hpp"
#include "chronos/eval.hpp"
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

Dataset random_dataset(std::size_t n, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) ds.series.push_back(TimeSeries{i, oracle::random_series(length, rng)});
  return ds;
}

std::vector<RecordId> all_ids(const Dataset& ds) {
  std::vector<RecordId> ids;
  for (const auto& s : ds.series) ids.push_back(s.id);
  return ids;
}

TEST(ExactTopK, CopyRanksFirst) {
  auto ds = random_dataset(30, 16, 1);
  auto copy = ds.series[4].values;
  for (auto& v : copy) v = 2.0 * v + 3.0;
  ds.series.push_back(TimeSeries{999, copy});
  const auto ids = all_ids(ds);
  const CandidatePool pool(ds, ids);
  const auto hit = exact_top_k(pool.at(4), 2, pool, RecordId{4});
  EXPECT_EQ(hit.ids[0], 999u);
  EXPECT_NEAR(hit.distances_sq[0], 0.0, 1e-12);
}

TEST(ExactTopK, KEqualsPoolReturnsAllAndLargerThrows) {
  const auto ds = random_dataset(20, 8, 2);
  const auto ids = all_ids(ds);
  const CandidatePool pool(ds, ids);
  auto all = exact_top_k(pool.at(0), 20, pool).ids;
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, ids);
  EXPECT_EQ(kind_of([&] { exact_top_k(pool.at(0), 20, pool, RecordId{0}); }), ErrorKind::KTooLarge);
  EXPECT_EQ(kind_of([&] { exact_top_k(pool.at(0), 0, pool); }), ErrorKind::InvalidArgument);
}

TEST(ExactTopK, AgreesWithRepeatedMaxCorrelationSelection) {
  const auto ds = random_dataset(500, 32, 3);
  const auto ids = all_ids(ds);
  const CandidatePool pool(ds, ids);
  for (RecordId q : {0u, 17u, 256u}) {
    const auto got = exact_top_k(pool.at(q), 25, pool, q);
    // Pick the highest correlation among the unpicked series, k times.
    std::vector<bool> taken(ds.size(), false);
    taken[q] = true;
    for (std::size_t rank = 0; rank < 25; ++rank) {
      std::size_t best = ds.size();
      double best_corr = -2.0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (taken[i]) continue;
        const double c = oracle::pearson_direct(ds.series[q].values, ds.series[i].values);
        if (c > best_corr) {
          best_corr = c;
          best = i;
        }
      }
      taken[best] = true;
      EXPECT_EQ(got.ids[rank], ds.series[best].id) << "rank " << rank;
    }
  }
}

TEST(Precision, Examples) {
  const std::vector<RecordId> a{1, 2, 3};
  EXPECT_EQ(precision(a, a, 3), 1.0);
  EXPECT_EQ(precision(std::vector<RecordId>{4, 5, 6}, a, 3), 0.0);
  std::vector<RecordId> truth(100), approx(100);
  for (RecordId i = 0; i < 100; ++i) {
    truth[i] = i;
    approx[i] = i < 37 ? i : 1000 + i;
  }
  EXPECT_DOUBLE_EQ(precision(approx, truth, 100), 0.37);
  EXPECT_EQ(kind_of([&] { precision(a, std::vector<RecordId>{1, 2}, 3); }), ErrorKind::SizeMismatch);
}

TEST(Gap, ThreePointEnumeration) {
  Dataset ds;
  ds.series.push_back(TimeSeries{0, {1, 2, 3, 4}});
  ds.series.push_back(TimeSeries{1, {1, 2, 4, 3}});
  ds.series.push_back(TimeSeries{2, {4, 1, 3, 2}});
  ds.series.push_back(TimeSeries{3, {4, 3, 2, 1}});
  const std::vector<RecordId> pool_ids{1, 2, 3};
  const CandidatePool pool(ds, pool_ids);
  const auto query = normalize(ds.series[0].values);
  std::vector<double> dist;
  for (RecordId id : pool_ids) dist.push_back(oracle::distance_sq(query.values, pool.at(id).values));
  // Best 2 are ids 1, 2 (smallest distances), worst 2 are ids 2, 3.
  ASSERT_LT(dist[0], dist[1]);
  ASSERT_LT(dist[1], dist[2]);
  const auto exact = exact_top_k(query, 2, pool).ids;
  EXPECT_EQ(exact, (std::vector<RecordId>{1, 2}));
  const std::vector<RecordId> worst{2, 3};
  EXPECT_NEAR(gap(worst, exact, query, pool, 2), (dist[2] - dist[0]) / 2.0, 1e-15);
  EXPECT_EQ(gap(exact, exact, query, pool, 2), 0.0);
}

TEST(Gap, NonnegativeForRandomSubsets) {
  const auto ds = random_dataset(60, 16, 4);
  const auto ids = all_ids(ds);
  const CandidatePool pool(ds, ids);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& q = pool.at(ids[rng.index(ids.size())]);
    auto shuffled = ids;
    rng.shuffle(std::span<RecordId>(shuffled));
    shuffled.resize(10);
    const auto exact = exact_top_k(q, 10, pool).ids;
    EXPECT_GE(gap(shuffled, exact, q, pool, 10), -1e-12);
  }
}

TEST(ApproximationLoss, ScaledSpectrumIsExact) {
  // For repeated-spectrum data the DFT baseline distance is exactly a quarter
  // of ||s^ - r^||^2, so scaling the baseline by 2 gives zero loss. The scaled
  // embedding is not unit-norm, which is why it is not a LearnedEmbedder.
  const auto ds = gen_example1(40, 32, 6);
  std::vector<NormalizedSeries> series;
  for (const auto& s : ds.series) series.push_back(normalize(s.values));
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < series.size(); i += 2) {
    auto a = embed_dft_baseline(series[i], 16);
    auto b = embed_dft_baseline(series[i + 1], 16);
    for (auto& v : a) v *= std::sqrt(2.0);
    for (auto& v : b) v *= std::sqrt(2.0);
    const double term = std::abs(2.0 * oracle::distance_sq(a, b) - 2.0 * (1.0 - pearson(series[i], series[i + 1])));
    worst = std::max(worst, term);
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(ApproximationLoss, DftBaselineMatchesTruncatedSpectrum) {
  const auto ds = random_dataset(41, 24, 7);
  std::vector<NormalizedSeries> series;
  for (const auto& s : ds.series) series.push_back(normalize(s.values));
  std::vector<SeriesPair> pairs;
  double want = 0.0;
  for (const auto& [a, b] : permutation_pairs(series.size(), 3)) {
    pairs.emplace_back(&series[a], &series[b]);
    const double d = truncated_distance_sq(dft(series[a].values), dft(series[b].values), 3);
    want += std::abs(2.0 * d - (2.0 - 2.0 * oracle::pearson_direct(ds.series[a].values, ds.series[b].values)));
  }
  want /= static_cast<double>(pairs.size());
  EXPECT_EQ(pairs.size(), 20u);
  EXPECT_NEAR(approximation_loss(DftTruncation{6}, pairs), want, 1e-10);
}

TEST(PermutationPairs, CoverDistinctIndices) {
  const auto pairs = permutation_pairs(11, 4);
  ASSERT_EQ(pairs.size(), 5u);
  std::vector<std::size_t> seen;
  for (const auto& [a, b] : pairs) {
    seen.push_back(a);
    seen.push_back(b);
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::unique(seen.begin(), seen.end()), seen.end());
  EXPECT_EQ(permutation_pairs(11, 4), pairs);
}

class SweepTest : public ::testing::Test {
 protected:
  Dataset ds = gen_example2(300, 32, 4, 0.01, 8);
  SplitDataset parts = split(ds, SplitRatios{}, 9);
  SweepConfig cfg = [] {
    SweepConfig c;
    c.k_values = {5, 20};
    c.seed = 2;
    c.measure_latency = false;
    return c;
  }();
};

TEST_F(SweepTest, ExactOracleIsSelfConsistent) {
  const std::vector<MethodEmbedding> methods{{"exact", 0, std::nullopt}};
  const auto report = sweep(ds, parts, methods, cfg);
  ASSERT_EQ(report.rows.size(), 2u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.rho, 1.0);
    EXPECT_EQ(row.delta, 0.0);
    EXPECT_LE(row.approx_loss, 1e-12);
    EXPECT_EQ(row.queries, parts.test.size());
  }
}

TEST_F(SweepTest, ReportIsDeterministic) {
  const std::vector<MethodEmbedding> methods{
      {"dft", 4, Embedder{DftTruncation{4}}},
      {"downsample", 4, Embedder{DownSample{4}}},
      {"learned", 4, Embedder{LearnedEmbedder{init_network(feature_width(32), 16, 4, 1)}}},
  };
  std::ostringstream a, b;
  write_report_csv(sweep(ds, parts, methods, cfg), a, false);
  write_report_csv(sweep(ds, parts, methods, cfg), b, false);
  const std::string text = a.str();
  EXPECT_EQ(text, b.str());
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,m,k,rho,delta,approx_loss,q50_us,q99_us");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST_F(SweepTest, GapBoundedByTwiceMetricError) {
  // delta <= 2 eps when every candidate-query pair has corrected metric
  // error at most eps. eps is measured over exactly those pairs.
  const CandidatePool pool(ds, parts.train);
  const CandidatePool queries(ds, parts.test);
  for (const auto& embedder : {Embedder{DftTruncation{4}}, Embedder{DownSample{8}},
                               Embedder{LearnedEmbedder{init_network(feature_width(32), 16, 4, 3)}}}) {
    std::vector<SeriesPair> pairs;
    for (const auto& q : queries.series()) {
      for (const auto& s : pool.series()) pairs.emplace_back(&q, &s);
    }
    const double eps = metric_error(embedder, pairs, 2.0);
    const std::vector<MethodEmbedding> methods{{describe(embedder), embedding_dim(embedder), embedder}};
    const auto report = sweep(ds, parts, methods, cfg);
    for (const auto& row : report.rows) {
      EXPECT_GE(row.delta, 0.0);
      EXPECT_LE(row.delta_max, 2.0 * eps + 1e-9) << row.method;
    }
  }
}

TEST_F(SweepTest, EmptyTestPartition) {
  SplitDataset no_test = parts;
  no_test.test.clear();
  const std::vector<MethodEmbedding> methods{{"exact", 0, std::nullopt}};
  EXPECT_EQ(kind_of([&] { sweep(ds, no_test, methods, cfg); }), ErrorKind::InsufficientData);
}

}  // namespace
}  // namespace chronos
