#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace chronos {

using RecordId = std::uint64_t;
using Complex = std::complex<double>;

/// Smallest series length accepted anywhere in the library.
inline constexpr std::size_t kMinLength = 4;

struct TimeSeries {
  RecordId id = 0;
  std::vector<double> values;
};

/// Zero-mean, unit-l2-norm copy of a series together with the statistics
/// needed to undo the transform.
struct NormalizedSeries {
  std::vector<double> values;
  double mean = 0.0;
  /// Population standard deviation.
  double stddev = 0.0;

  std::size_t size() const noexcept { return values.size(); }
  /// sqrt(sum (s_j - mean)^2), the factor the centered series was divided by.
  double scale() const noexcept;
};

/// Scaled DFT coefficients; index 0 is the DC term.
struct FrequencyVector {
  std::vector<Complex> coeffs;

  std::size_t size() const noexcept { return coeffs.size(); }
};

/// Throws ConstantSeries when all values are equal, LengthMismatch when
/// empty, InvalidArgument on non-finite values.
NormalizedSeries normalize(std::span<const double> values);

/// Pearson correlation, clamped to [-1, 1].
double pearson(std::span<const double> s, std::span<const double> r);
double pearson(const NormalizedSeries& s, const NormalizedSeries& r);

/// Squared Euclidean distance, summed in index order.
double squared_distance(std::span<const double> a, std::span<const double> b);

/// coeffs[j] = M^{-1/2} sum_l x_l exp(-2 pi i j l / M).
///
/// Radix-2 FFT when M is a power of two, otherwise a direct evaluation with
/// a precomputed twiddle table.
FrequencyVector dft(std::span<const double> x);

/// Inverse of dft() (same 1/sqrt(M) scaling). The result is complex so that
/// callers can check that a conjugate-symmetric spectrum maps to a real series.
std::vector<Complex> inverse_dft(std::span<const Complex> coeffs);

/// sum_{j=1..m} |a_j - b_j|^2 over the first m non-DC coefficients.
/// Requires 1 <= m < M/2 (InvalidM otherwise).
double truncated_distance_sq(const FrequencyVector& a, const FrequencyVector& b, std::size_t m);

}  // namespace chronos
