#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "chronos/core.hpp"

namespace chronos {

struct Dataset {
  std::vector<TimeSeries> series;
  std::string provenance;
  std::uint64_t seed = 0;
  /// Rows dropped at ingestion because they had zero variance.
  std::size_t dropped_constant = 0;

  std::size_t size() const noexcept { return series.size(); }
  /// Common series length M (0 when empty).
  std::size_t length() const noexcept { return series.empty() ? 0 : series.front().values.size(); }
};

/// Throws DuplicateId / RaggedRows / ConstantSeries if the invariants of a
/// dataset (unique ids, uniform length >= 4, no constant series) do not hold.
void validate(const Dataset& ds);

std::unordered_map<RecordId, std::size_t> positions_by_id(const Dataset& ds);

enum class CsvLayout {
  /// values only; ids are assigned 0..n-1 in row order
  Plain,
  /// first column is an integer record id
  WithId,
  /// UCR archive style: first column is a class label (dropped); tabs,
  /// commas or spaces separate fields
  Ucr,
};

/// One series per row. Blank lines are skipped, a non-numeric first line is
/// treated as a header. Constant rows are dropped and counted.
Dataset load_csv(const std::filesystem::path& path, CsvLayout layout);

/// Writes "id,v1,...,vM" rows with 17 significant digits.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Partition of record ids.
struct SplitDataset {
  std::vector<RecordId> train;
  std::vector<RecordId> validation;
  std::vector<RecordId> test;

  friend bool operator==(const SplitDataset&, const SplitDataset&) = default;
};

/// Seeded shuffle, then partition sizes by largest remainder (ties go to
/// train, then validation). Requires n >= 10 (TooSmall).
SplitDataset split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed);

/// Series whose scaled DFT repeats itself: c_{M/4+i} = c_i for
/// i = 1..M/4-1, with c_0 = c_{M/4} = c_{M/2} = 0. For any two such series
/// ||s^ - r^||^2 = 4 d_{M/4}^2. Requires M divisible by 4, M >= 8.
Dataset gen_example1(std::size_t n, std::size_t length, std::uint64_t seed);

/// Shared base spectrum mu + z sigma with z of scale eps on coefficients
/// 1..m and unit scale above. Requires 1 <= m < M/2.
Dataset gen_example2(std::size_t n, std::size_t length, std::size_t m, double eps, std::uint64_t seed);

/// Builds a real series from the non-redundant half of a spectrum
/// (indices 0..M/2), mirroring it into a conjugate-symmetric full spectrum.
std::vector<double> real_series_from_half_spectrum(std::span<const Complex> half, std::size_t length);

}  // namespace chronos
