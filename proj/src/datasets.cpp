#include "chronos/datasets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>
#include <unordered_set>

#include "chronos/error.hpp"
#include "chronos/random.hpp"

namespace chronos {

namespace {

std::string str(std::size_t n) { return std::to_string(n); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, CsvLayout layout) {
  std::vector<std::string_view> fields;
  if (layout == CsvLayout::Ucr) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ',' || line[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != ',' && line[j] != '\r') ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size() && std::isfinite(out);
}

bool parse_id(std::string_view field, RecordId& out) {
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

bool is_constant(const std::vector<double>& values) {
  return std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
}

}  // namespace

void validate(const Dataset& ds) {
  std::unordered_set<RecordId> seen;
  const std::size_t length = ds.length();
  if (!ds.series.empty() && length < kMinLength) {
    throw Error(ErrorKind::InvalidArgument, "series length " + str(length) + " is below the minimum of 4");
  }
  for (std::size_t i = 0; i < ds.series.size(); ++i) {
    const auto& s = ds.series[i];
    if (!seen.insert(s.id).second) throw Error(ErrorKind::DuplicateId, "record id " + std::to_string(s.id) + " repeats");
    if (s.values.size() != length) {
      throw Error(ErrorKind::RaggedRows, "series " + std::to_string(s.id) + " has length " + str(s.values.size()) +
                                             ", expected " + str(length));
    }
    if (is_constant(s.values)) throw Error(ErrorKind::ConstantSeries, "series " + std::to_string(s.id) + " is constant");
  }
}

std::unordered_map<RecordId, std::size_t> positions_by_id(const Dataset& ds) {
  std::unordered_map<RecordId, std::size_t> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.emplace(ds.series[i].id, i);
  return out;
}

Dataset load_csv(const std::filesystem::path& path, CsvLayout layout) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string(), 0);

  Dataset ds;
  ds.provenance = "csv:" + path.string();
  std::unordered_set<RecordId> ids;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool seen_data = false;
  bool first_line = true;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, layout);

    const std::size_t skip = layout == CsvLayout::Plain ? 0 : 1;
    TimeSeries series;
    series.id = ds.series.size() + ds.dropped_constant;
    if (layout == CsvLayout::WithId && !parse_id(fields.front(), series.id)) {
      if (first_line) {
        first_line = false;
        continue;  // header
      }
      throw Error(ErrorKind::ParseError, "bad record id '" + std::string(fields.front()) + "'", line_no);
    }
    if (layout == CsvLayout::Ucr) {
      double label = 0.0;
      if (!parse_double(fields.front(), label)) {
        if (first_line) {
          first_line = false;
          continue;
        }
        throw Error(ErrorKind::ParseError, "bad class label '" + std::string(fields.front()) + "'", line_no);
      }
    }
    if (fields.size() <= skip) throw Error(ErrorKind::ParseError, "row has no values", line_no);

    series.values.reserve(fields.size() - skip);
    bool ok = true;
    for (std::size_t f = skip; f < fields.size() && ok; ++f) {
      double v = 0.0;
      ok = parse_double(fields[f], v);
      series.values.push_back(v);
    }
    if (!ok) {
      if (first_line && layout == CsvLayout::Plain) {
        first_line = false;
        continue;
      }
      throw Error(ErrorKind::ParseError, "non-numeric or non-finite value", line_no);
    }
    first_line = false;

    if (!seen_data) {
      width = series.values.size();
      seen_data = true;
      if (width < kMinLength) {
        throw Error(ErrorKind::ParseError, "series length " + str(width) + " is below the minimum of 4", line_no);
      }
    } else if (series.values.size() != width) {
      throw Error(ErrorKind::RaggedRows,
                  "row has " + str(series.values.size()) + " values, expected " + str(width), line_no);
    }
    if (is_constant(series.values)) {
      ++ds.dropped_constant;
      continue;
    }
    if (layout == CsvLayout::WithId && !ids.insert(series.id).second) {
      throw Error(ErrorKind::DuplicateId, "record id " + std::to_string(series.id) + " repeats", line_no);
    }
    ds.series.push_back(std::move(series));
  }
  if (!seen_data) throw Error(ErrorKind::EmptyFile, path.string() + " has no data rows");
  if (ds.series.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " has only constant rows");
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string() + " for writing");
  std::array<char, 64> buf{};
  for (const auto& s : ds.series) {
    out << s.id;
    for (double v : s.values) {
      const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
      out << ',' << std::string_view(buf.data(), static_cast<std::size_t>(ptr - buf.data()));
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::MissingArtifact, "failed writing " + path.string());
}

SplitDataset split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (n < 10) throw Error(ErrorKind::TooSmall, "split needs at least 10 series, got " + str(n));
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  if (std::any_of(r.begin(), r.end(), [](double x) { return !(x >= 0.0) || !std::isfinite(x); })) {
    throw Error(ErrorKind::InvalidArgument, "split ratios must be finite and nonnegative");
  }
  const double total = r[0] + r[1] + r[2];
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidArgument, "split ratios sum to zero");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * r[i] / total;
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];

  std::vector<RecordId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = ds.series[i].id;
  Rng rng(seed);
  rng.shuffle(std::span<RecordId>(ids));

  SplitDataset out;
  auto it = ids.begin();
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  out.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  out.test.assign(it, ids.end());
  return out;
}

std::vector<double> real_series_from_half_spectrum(std::span<const Complex> half, std::size_t length) {
  if (half.size() != length / 2 + 1) {
    throw Error(ErrorKind::LengthMismatch, "half spectrum must hold M/2 + 1 coefficients");
  }
  std::vector<Complex> full(length);
  full[0] = Complex(half[0].real(), 0.0);
  for (std::size_t j = 1; j < half.size(); ++j) {
    if (2 * j == length) {
      full[j] = Complex(half[j].real(), 0.0);
    } else {
      full[j] = half[j];
      full[length - j] = std::conj(half[j]);
    }
  }
  const auto time = inverse_dft(full);
  std::vector<double> out(length);
  for (std::size_t l = 0; l < length; ++l) out[l] = time[l].real();
  return out;
}

Dataset gen_example1(std::size_t n, std::size_t length, std::uint64_t seed) {
  if (length % 4 != 0 || length < 8) {
    throw Error(ErrorKind::InvalidM, "Example-1 data needs M divisible by 4 and M >= 8, got " + str(length));
  }
  const std::size_t quarter = length / 4;
  Dataset ds;
  ds.seed = seed;
  ds.provenance = "example1(n=" + str(n) + ",M=" + str(length) + ",seed=" + std::to_string(seed) + ")";
  ds.series.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Rng rng(mix_seed(seed, t + 1));
    std::vector<Complex> half(length / 2 + 1, Complex(0.0, 0.0));
    for (std::size_t i = 1; i < quarter; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      half[i] = Complex(re, im);
      half[quarter + i] = half[i];
    }
    auto values = real_series_from_half_spectrum(half, length);
    // Normalization removes any affine change, so vary offset and gain.
    const double gain = rng.uniform(0.5, 2.0);
    const double offset = rng.uniform(-1.0, 1.0);
    for (auto& v : values) v = gain * v + offset;
    ds.series.push_back(TimeSeries{t, std::move(values)});
  }
  return ds;
}

Dataset gen_example2(std::size_t n, std::size_t length, std::size_t m, double eps, std::uint64_t seed) {
  if (length < kMinLength) throw Error(ErrorKind::InvalidArgument, "series length must be at least 4");
  if (m < 1 || 2 * m >= length) {
    throw Error(ErrorKind::InvalidM, "Example-2 data needs 1 <= m < M/2, got m = " + str(m) + ", M = " + str(length));
  }
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(ErrorKind::InvalidArgument, "eps must be finite and >= 0");

  const std::size_t half_size = length / 2 + 1;
  Rng base(mix_seed(seed, 0));
  std::vector<Complex> mu(half_size, Complex(0.0, 0.0));
  std::vector<double> sigma(half_size, 0.0);
  for (std::size_t i = 1; i < half_size; ++i) {
    const double re = base.normal();
    const double im = base.normal();
    mu[i] = Complex(re, im);
    sigma[i] = base.uniform(0.5, 1.5);
  }

  Dataset ds;
  ds.seed = seed;
  ds.provenance = "example2(n=" + str(n) + ",M=" + str(length) + ",m=" + str(m) + ",eps=" + std::to_string(eps) +
                  ",seed=" + std::to_string(seed) + ")";
  ds.series.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Rng rng(mix_seed(seed, t + 1));
    std::vector<Complex> half(half_size, Complex(0.0, 0.0));
    for (std::size_t i = 1; i < half_size; ++i) {
      const double scale = i <= m ? eps : 1.0;
      const double re = rng.normal();
      const double im = rng.normal();
      half[i] = mu[i] + Complex(re, im) * (scale * sigma[i]);
    }
    ds.series.push_back(TimeSeries{t, real_series_from_half_spectrum(half, length)});
  }
  return ds;
}

}  // namespace chronos
