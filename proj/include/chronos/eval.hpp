#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chronos/datasets.hpp"
#include "chronos/embed.hpp"
#include "chronos/index.hpp"

namespace chronos {

/// Normalized copies of a set of series, addressable by record id.
class CandidatePool {
 public:
  CandidatePool() = default;
  CandidatePool(const Dataset& ds, std::span<const RecordId> ids);

  std::size_t size() const noexcept { return ids_.size(); }
  std::span<const RecordId> ids() const noexcept { return ids_; }
  const std::vector<NormalizedSeries>& series() const noexcept { return series_; }
  /// Throws InvalidArgument for unknown ids.
  const NormalizedSeries& at(RecordId id) const;

 private:
  std::vector<RecordId> ids_;
  std::vector<NormalizedSeries> series_;
  std::unordered_map<RecordId, std::size_t> position_;
};

/// Brute-force top-k by ||s^ - r^||^2 ascending (correlation descending),
/// ties by id. `exclude` drops one id (the query itself) from the pool.
/// Throws KTooLarge when k exceeds the eligible pool.
QueryResult exact_top_k(const NormalizedSeries& query, std::size_t k, const CandidatePool& pool,
                        std::optional<RecordId> exclude = std::nullopt);

/// |approx ∩ exact| / k. Both lists must hold exactly k ids (SizeMismatch).
double precision(std::span<const RecordId> approx, std::span<const RecordId> exact, std::size_t k);

/// Mean excess squared distance of the approximate set over the exact one:
/// (sum_{approx} ||s^ - r^||^2 - sum_{exact} ||s^ - r^||^2) / k.
double gap(std::span<const RecordId> approx, std::span<const RecordId> exact, const NormalizedSeries& query,
           const CandidatePool& pool, std::size_t k);

using SeriesPair = std::pair<const NormalizedSeries*, const NormalizedSeries*>;

/// Seeded permutation of [0, n) cut into consecutive pairs (the last
/// element is dropped when n is odd).
std::vector<std::pair<std::size_t, std::size_t>> permutation_pairs(std::size_t n, std::uint64_t seed);

/// mean |2 ||f(s) - f(r)||^2 - 2 (1 - corr(s, r))|
double approximation_loss(const Embedder& embedder, std::span<const SeriesPair> pairs);

/// max |scale * ||f(s) - f(r)||^2 - ||s^ - r^||^2| over the pairs: the
/// empirical metric-preservation error. scale = 2 gives the corrected
/// distance, scale = 1 the plain one.
double metric_error(const Embedder& embedder, std::span<const SeriesPair> pairs, double scale);

/// One method to evaluate. An empty embedder selects the exact oracle.
struct MethodEmbedding {
  std::string method;
  std::size_t m = 0;
  std::optional<Embedder> embedder;
};

struct SweepConfig {
  std::vector<std::size_t> k_values{10, 100};
  std::uint64_t seed = 0;
  bool measure_latency = true;
};

struct EvalRow {
  std::string method;
  std::size_t m = 0;
  std::size_t k = 0;
  double rho = 0.0;
  double delta = 0.0;
  /// Largest per-query gap.
  double delta_max = 0.0;
  double approx_loss = 0.0;
  /// End-to-end query latency (embed + traversal), microseconds.
  double q50_us = 0.0;
  double q99_us = 0.0;
  /// Median embedding evaluation time alone, microseconds.
  double embed_us = 0.0;
  std::size_t queries = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

/// Every test series is a query against an index over the training
/// partition; results are compared with exact_top_k over the same pool.
/// Approximation loss uses test pairs from permutation_pairs(seed).
EvalReport sweep(const Dataset& ds, const SplitDataset& split, std::span<const MethodEmbedding> methods,
                 const SweepConfig& cfg);

/// Columns: method,m,k,rho,delta,approx_loss,q50_us,q99_us. Latency columns
/// are written as 0 when include_timing is false so that reruns compare
/// byte-for-byte.
void write_report_csv(const EvalReport& report, std::ostream& out, bool include_timing);
void write_report_table(const EvalReport& report, std::ostream& out);

}  // namespace chronos
