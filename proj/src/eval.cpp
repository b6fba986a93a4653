#include "chronos/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <unordered_set>

#include "chronos/error.hpp"
#include "chronos/random.hpp"

namespace chronos {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMinTimedQueries = 100;

double micros(Clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); }

// Nearest-rank percentile of an unsorted sample.
double percentile(std::vector<double> sample, double p) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sample.size())));
  return sample[std::clamp<std::size_t>(rank, 1, sample.size()) - 1];
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

}  // namespace

CandidatePool::CandidatePool(const Dataset& ds, std::span<const RecordId> ids) {
  const auto pos = positions_by_id(ds);
  ids_.assign(ids.begin(), ids.end());
  series_.reserve(ids.size());
  position_.reserve(ids.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto it = pos.find(ids_[i]);
    if (it == pos.end()) throw Error(ErrorKind::InvalidArgument, "id " + std::to_string(ids_[i]) + " not in dataset");
    if (!position_.emplace(ids_[i], i).second) {
      throw Error(ErrorKind::DuplicateId, "record id " + std::to_string(ids_[i]) + " repeats");
    }
    series_.push_back(normalize(ds.series[it->second].values));
  }
}

const NormalizedSeries& CandidatePool::at(RecordId id) const {
  const auto it = position_.find(id);
  if (it == position_.end()) throw Error(ErrorKind::InvalidArgument, "id " + std::to_string(id) + " not in pool");
  return series_[it->second];
}

QueryResult exact_top_k(const NormalizedSeries& query, std::size_t k, const CandidatePool& pool,
                        std::optional<RecordId> exclude) {
  struct Scored {
    double distance_sq;
    RecordId id;
  };
  std::vector<Scored> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (exclude && pool.ids()[i] == *exclude) continue;
    scored.push_back({squared_distance(query.values, pool.series()[i].values), pool.ids()[i]});
  }
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  if (k > scored.size()) {
    throw Error(ErrorKind::KTooLarge,
                "k = " + std::to_string(k) + " exceeds the candidate pool of " + std::to_string(scored.size()));
  }
  auto less = [](const Scored& a, const Scored& b) {
    return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.id < b.id);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), less);
  QueryResult out;
  for (std::size_t i = 0; i < k; ++i) {
    out.ids.push_back(scored[i].id);
    out.distances_sq.push_back(scored[i].distance_sq);
  }
  return out;
}

double precision(std::span<const RecordId> approx, std::span<const RecordId> exact, std::size_t k) {
  if (k == 0 || approx.size() != k || exact.size() != k) {
    throw Error(ErrorKind::SizeMismatch, "precision needs two sets of size k = " + std::to_string(k));
  }
  const std::unordered_set<RecordId> truth(exact.begin(), exact.end());
  std::size_t hits = 0;
  for (RecordId id : approx) hits += truth.count(id);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double gap(std::span<const RecordId> approx, std::span<const RecordId> exact, const NormalizedSeries& query,
           const CandidatePool& pool, std::size_t k) {
  if (k == 0 || approx.size() != k || exact.size() != k) {
    throw Error(ErrorKind::SizeMismatch, "gap needs two sets of size k = " + std::to_string(k));
  }
  double approx_sum = 0.0;
  double exact_sum = 0.0;
  for (RecordId id : approx) approx_sum += squared_distance(query.values, pool.at(id).values);
  for (RecordId id : exact) exact_sum += squared_distance(query.values, pool.at(id).values);
  return (approx_sum - exact_sum) / static_cast<double>(k);
}

std::vector<std::pair<std::size_t, std::size_t>> permutation_pairs(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n / 2);
  for (std::size_t i = 0; i + 1 < n; i += 2) pairs.emplace_back(order[i], order[i + 1]);
  return pairs;
}

double approximation_loss(const Embedder& embedder, std::span<const SeriesPair> pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [s, r] : pairs) {
    const double dist = squared_distance(embed(embedder, *s), embed(embedder, *r));
    total += std::abs(2.0 * dist - 2.0 * (1.0 - pearson(*s, *r)));
  }
  return total / static_cast<double>(pairs.size());
}

double metric_error(const Embedder& embedder, std::span<const SeriesPair> pairs, double scale) {
  double worst = 0.0;
  for (const auto& [s, r] : pairs) {
    const double embedded = squared_distance(embed(embedder, *s), embed(embedder, *r));
    const double exact = squared_distance(s->values, r->values);
    worst = std::max(worst, std::abs(scale * embedded - exact));
  }
  return worst;
}

EvalReport sweep(const Dataset& ds, const SplitDataset& split, std::span<const MethodEmbedding> methods,
                 const SweepConfig& cfg) {
  if (cfg.k_values.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one k");
  if (split.test.empty()) throw Error(ErrorKind::InsufficientData, "sweep needs a nonempty test partition");
  const CandidatePool pool(ds, split.train);
  const CandidatePool queries(ds, split.test);
  const std::size_t k_max = *std::max_element(cfg.k_values.begin(), cfg.k_values.end());

  std::vector<QueryResult> truth;
  truth.reserve(queries.size());
  for (const auto& q : queries.series()) truth.push_back(exact_top_k(q, k_max, pool));

  std::vector<SeriesPair> pairs;
  for (const auto& [a, b] : permutation_pairs(queries.size(), cfg.seed)) {
    pairs.emplace_back(&queries.series()[a], &queries.series()[b]);
  }

  EvalReport report;
  for (const auto& method : methods) {
    // approx[q] holds the top-k_max answer for query q.
    std::vector<QueryResult> approx;
    std::vector<std::vector<double>> latency(cfg.k_values.size());
    std::vector<double> embed_latency;
    double loss = 0.0;

    if (!method.embedder) {
      approx = truth;
      double total = 0.0;
      for (const auto& [s, r] : pairs) {
        total += std::abs(squared_distance(s->values, r->values) - 2.0 * (1.0 - pearson(*s, *r)));
      }
      loss = pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
      if (cfg.measure_latency) {
        for (std::size_t ki = 0; ki < cfg.k_values.size(); ++ki) {
          for (std::size_t done = 0; done < std::max(kMinTimedQueries, queries.size()); ++done) {
            const auto& q = queries.series()[done % queries.size()];
            const auto t0 = Clock::now();
            const auto r = exact_top_k(q, cfg.k_values[ki], pool);
            latency[ki].push_back(micros(Clock::now() - t0));
          }
        }
      }
    } else {
      const Embedder& embedder = *method.embedder;
      std::vector<double> coords;
      const std::size_t dim = embedding_dim(embedder);
      coords.reserve(pool.size() * dim);
      for (const auto& s : pool.series()) {
        const auto e = embed(embedder, s);
        coords.insert(coords.end(), e.begin(), e.end());
      }
      const KdTree tree(std::vector<RecordId>(pool.ids().begin(), pool.ids().end()), std::move(coords), dim);
      approx.reserve(queries.size());
      for (const auto& q : queries.series()) approx.push_back(tree.top_k(embed(embedder, q), k_max));
      loss = approximation_loss(embedder, pairs);

      if (cfg.measure_latency) {
        const std::size_t timed = std::max(kMinTimedQueries, queries.size());
        for (std::size_t done = 0; done < timed; ++done) {
          const auto& q = queries.series()[done % queries.size()];
          const auto t0 = Clock::now();
          const auto e = embed(embedder, q);
          embed_latency.push_back(micros(Clock::now() - t0));
        }
        for (std::size_t ki = 0; ki < cfg.k_values.size(); ++ki) {
          for (std::size_t done = 0; done < timed; ++done) {
            const auto& q = queries.series()[done % queries.size()];
            const auto t0 = Clock::now();
            const auto e = embed(embedder, q);
            const auto r = tree.top_k(e, cfg.k_values[ki]);
            latency[ki].push_back(micros(Clock::now() - t0));
          }
        }
      }
    }

    for (std::size_t ki = 0; ki < cfg.k_values.size(); ++ki) {
      const std::size_t k = cfg.k_values[ki];
      EvalRow row;
      row.method = method.method;
      row.m = method.m;
      row.k = k;
      row.queries = queries.size();
      row.approx_loss = loss;
      double rho_sum = 0.0;
      double delta_sum = 0.0;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const std::span<const RecordId> a(approx[q].ids.data(), k);
        const std::span<const RecordId> t(truth[q].ids.data(), k);
        rho_sum += precision(a, t, k);
        const double d = gap(a, t, queries.series()[q], pool, k);
        delta_sum += d;
        row.delta_max = std::max(row.delta_max, d);
      }
      row.rho = rho_sum / static_cast<double>(queries.size());
      row.delta = delta_sum / static_cast<double>(queries.size());
      if (cfg.measure_latency) {
        row.q50_us = percentile(latency[ki], 0.5);
        row.q99_us = percentile(latency[ki], 0.99);
        row.embed_us = percentile(embed_latency, 0.5);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out, bool include_timing) {
  out << "method,m,k,rho,delta,approx_loss,q50_us,q99_us\n";
  for (const auto& row : report.rows) {
    out << row.method << ',' << row.m << ',' << row.k << ',' << format_double(row.rho) << ','
        << format_double(row.delta) << ',' << format_double(row.approx_loss) << ','
        << format_double(include_timing ? row.q50_us : 0.0) << ',' << format_double(include_timing ? row.q99_us : 0.0)
        << '\n';
  }
}

void write_report_table(const EvalReport& report, std::ostream& out) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::left << std::setw(16) << "method" << std::right << std::setw(5) << "m" << std::setw(6) << "k"
      << std::setw(10) << "rho" << std::setw(12) << "delta" << std::setw(12) << "approx" << std::setw(11)
      << "q50_us" << std::setw(11) << "q99_us" << std::setw(11) << "embed_us" << '\n';
  out << std::fixed;
  for (const auto& row : report.rows) {
    out << std::left << std::setw(16) << row.method << std::right << std::setw(5) << row.m << std::setw(6) << row.k
        << std::setprecision(4) << std::setw(10) << row.rho << std::setprecision(5) << std::setw(12) << row.delta
        << std::setw(12) << row.approx_loss << std::setprecision(1) << std::setw(11) << row.q50_us << std::setw(11)
        << row.q99_us << std::setw(11) << row.embed_us << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace chronos
