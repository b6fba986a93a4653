#include "chronos/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "chronos/error.hpp"

namespace chronos {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// twiddle[k] = exp(sign * 2 pi i k / n), k in [0, n).
std::vector<Complex> twiddles(std::size_t n, double sign) {
  std::vector<Complex> table(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    table[k] = Complex(std::cos(angle), std::sin(angle));
  }
  return table;
}

void fft_in_place(std::vector<Complex>& a, double sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto table = twiddles(n, sign);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex w = table[k * stride];
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> direct_transform(std::span<const Complex> x, double sign) {
  const std::size_t n = x.size();
  const auto table = twiddles(n, sign);
  std::vector<Complex> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    Complex acc(0.0, 0.0);
    for (std::size_t l = 0; l < n; ++l) acc += x[l] * table[(j * l) % n];
    out[j] = acc;
  }
  return out;
}

std::vector<Complex> transform(std::vector<Complex> data, double sign) {
  const std::size_t n = data.size();
  if (is_power_of_two(n)) {
    fft_in_place(data, sign);
  } else {
    data = direct_transform(data, sign);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& c : data) c *= scale;
  return data;
}

}  // namespace

double NormalizedSeries::scale() const noexcept {
  return stddev * std::sqrt(static_cast<double>(values.size()));
}

NormalizedSeries normalize(std::span<const double> values) {
  if (values.size() < 2) {
    throw Error(ErrorKind::LengthMismatch, "series needs at least 2 values, got " + std::to_string(values.size()));
  }
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "series contains a non-finite value");
    sum += v;
  }
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;

  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const bool constant = std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
  if (constant || ss == 0.0) throw Error(ErrorKind::ConstantSeries, "series has zero variance");

  NormalizedSeries out;
  out.mean = mean;
  out.stddev = std::sqrt(ss / n);
  const double norm = std::sqrt(ss);
  out.values.resize(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) out.values[j] = (values[j] - mean) / norm;

  // Recentre and rescale once more so the invariants hold to the last ulp
  // instead of to the rounding of the first pass.
  double residual = 0.0;
  for (double v : out.values) residual += v;
  residual /= n;
  double sq = 0.0;
  for (auto& v : out.values) {
    v -= residual;
    sq += v * v;
  }
  const double renorm = std::sqrt(sq);
  for (auto& v : out.values) v /= renorm;
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double pearson(const NormalizedSeries& s, const NormalizedSeries& r) {
  if (s.size() != r.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "series of length " + std::to_string(s.size()) + " and " + std::to_string(r.size()));
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) dot += s.values[j] * r.values[j];
  return std::clamp(dot, -1.0, 1.0);
}

double pearson(std::span<const double> s, std::span<const double> r) {
  if (s.size() != r.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "series of length " + std::to_string(s.size()) + " and " + std::to_string(r.size()));
  }
  return pearson(normalize(s), normalize(r));
}

FrequencyVector dft(std::span<const double> x) {
  if (x.size() < kMinLength) {
    throw Error(ErrorKind::InvalidArgument, "DFT needs at least 4 samples, got " + std::to_string(x.size()));
  }
  std::vector<Complex> data(x.begin(), x.end());
  return FrequencyVector{transform(std::move(data), -1.0)};
}

std::vector<Complex> inverse_dft(std::span<const Complex> coeffs) {
  if (coeffs.empty()) throw Error(ErrorKind::InvalidArgument, "inverse DFT of an empty spectrum");
  return transform(std::vector<Complex>(coeffs.begin(), coeffs.end()), 1.0);
}

double truncated_distance_sq(const FrequencyVector& a, const FrequencyVector& b, std::size_t m) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "spectra of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  // m < M/2, i.e. 2m < M.
  if (m < 1 || 2 * m >= a.size()) {
    throw Error(ErrorKind::InvalidM,
                "m = " + std::to_string(m) + " must satisfy 1 <= m < M/2 for M = " + std::to_string(a.size()));
  }
  double acc = 0.0;
  for (std::size_t j = 1; j <= m; ++j) acc += std::norm(a.coeffs[j] - b.coeffs[j]);
  return acc;
}

}  // namespace chronos
