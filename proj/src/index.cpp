#include "chronos/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_set>

#include "binary_io.hpp"
#include "chronos/error.hpp"

namespace chronos {

namespace {

constexpr char kIndexMagic[5] = "CHRI";
constexpr std::uint32_t kIndexVersion = 1;

double distance_sq(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

KdTree::KdTree(std::vector<RecordId> ids, std::vector<double> coords, std::size_t dim)
    : dim_(dim), input_ids_(std::move(ids)), input_coords_(std::move(coords)) {
  if (input_ids_.empty()) throw Error(ErrorKind::Empty, "cannot build an index over zero points");
  if (dim_ == 0) throw Error(ErrorKind::DimensionMismatch, "points must have at least one dimension");
  if (input_coords_.size() != input_ids_.size() * dim_) {
    throw Error(ErrorKind::DimensionMismatch, "coordinate buffer does not hold n * dim values");
  }
  std::unordered_set<RecordId> seen;
  seen.reserve(input_ids_.size());
  for (RecordId id : input_ids_) {
    if (!seen.insert(id).second) throw Error(ErrorKind::DuplicateId, "record id " + std::to_string(id) + " repeats");
  }
  for (double c : input_coords_) {
    if (!std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "non-finite coordinate");
  }

  const std::size_t n = input_ids_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  build_range(order, 0, n, 0);

  ids_.resize(n);
  coords_.resize(n * dim_);
  for (std::size_t slot = 0; slot < n; ++slot) {
    ids_[slot] = input_ids_[order[slot]];
    std::copy_n(input_coords_.begin() + static_cast<std::ptrdiff_t>(order[slot] * dim_), dim_,
                coords_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
  }
}

KdTree KdTree::build(std::span<const RecordId> ids, std::span<const std::vector<double>> points) {
  if (ids.size() != points.size()) throw Error(ErrorKind::SizeMismatch, "ids and points differ in count");
  if (points.empty()) throw Error(ErrorKind::Empty, "cannot build an index over zero points");
  const std::size_t dim = points.front().size();
  std::vector<double> coords;
  coords.reserve(points.size() * dim);
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(ErrorKind::DimensionMismatch, "points have different dimensions");
    coords.insert(coords.end(), p.begin(), p.end());
  }
  return KdTree(std::vector<RecordId>(ids.begin(), ids.end()), std::move(coords), dim);
}

void KdTree::build_range(std::vector<std::size_t>& order, std::size_t lo, std::size_t hi, std::size_t depth) {
  if (hi - lo <= 1) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const std::size_t axis = depth % dim_;
  auto less = [&](std::size_t a, std::size_t b) {
    const double ca = input_coords_[a * dim_ + axis];
    const double cb = input_coords_[b * dim_ + axis];
    return ca < cb || (ca == cb && input_ids_[a] < input_ids_[b]);
  };
  const auto base = order.begin();
  std::nth_element(base + static_cast<std::ptrdiff_t>(lo), base + static_cast<std::ptrdiff_t>(mid),
                   base + static_cast<std::ptrdiff_t>(hi), less);
  build_range(order, lo, mid, depth + 1);
  build_range(order, mid + 1, hi, depth + 1);
}

std::size_t KdTree::height() const noexcept {
  // Ranges split as [lo, mid) + mid + (mid, hi), so a range of n points has
  // height floor(log2 n) + 1.
  return static_cast<std::size_t>(std::bit_width(ids_.size()));
}

void KdTree::check_query(std::span<const double> query) const {
  if (query.size() != dim_) {
    throw Error(ErrorKind::DimensionMismatch,
                "query has dimension " + std::to_string(query.size()) + ", index has " + std::to_string(dim_));
  }
}

QueryResult KdTree::top_k(std::span<const double> query, std::size_t k) const {
  check_query(query);
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  k = std::min(k, ids_.size());
  std::vector<Candidate> heap;
  heap.reserve(k + 1);
  search_k(query, k, 0, ids_.size(), 0, heap);
  std::sort_heap(heap.begin(), heap.end());

  QueryResult out;
  out.ids.reserve(heap.size());
  out.distances_sq.reserve(heap.size());
  for (const auto& c : heap) {
    out.ids.push_back(c.id);
    out.distances_sq.push_back(c.distance_sq);
  }
  return out;
}

void KdTree::search_k(std::span<const double> q, std::size_t k, std::size_t lo, std::size_t hi, std::size_t depth,
                      std::vector<Candidate>& heap) const {
  if (lo >= hi) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const auto p = point(mid);
  const Candidate c{distance_sq(q, p), ids_[mid]};
  if (heap.size() < k) {
    heap.push_back(c);
    std::push_heap(heap.begin(), heap.end());
  } else if (c < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = c;
    std::push_heap(heap.begin(), heap.end());
  }
  if (hi - lo == 1) return;

  const std::size_t axis = depth % dim_;
  const double diff = q[axis] - p[axis];
  const bool go_left = diff < 0.0;
  if (go_left) {
    search_k(q, k, lo, mid, depth + 1, heap);
  } else {
    search_k(q, k, mid + 1, hi, depth + 1, heap);
  }
  // Ties with the current worst may still win on id, so only strictly
  // farther planes are pruned.
  if (heap.size() < k || diff * diff <= heap.front().distance_sq) {
    if (go_left) {
      search_k(q, k, mid + 1, hi, depth + 1, heap);
    } else {
      search_k(q, k, lo, mid, depth + 1, heap);
    }
  }
}

QueryResult KdTree::within_radius(std::span<const double> query, double radius_sq) const {
  check_query(query);
  if (!(radius_sq >= 0.0)) throw Error(ErrorKind::InvalidArgument, "squared radius must be nonnegative");
  std::vector<Candidate> hits;
  search_radius(query, radius_sq, 0, ids_.size(), 0, hits);
  std::sort(hits.begin(), hits.end());
  QueryResult out;
  out.ids.reserve(hits.size());
  out.distances_sq.reserve(hits.size());
  for (const auto& c : hits) {
    out.ids.push_back(c.id);
    out.distances_sq.push_back(c.distance_sq);
  }
  return out;
}

void KdTree::search_radius(std::span<const double> q, double radius_sq, std::size_t lo, std::size_t hi,
                           std::size_t depth, std::vector<Candidate>& hits) const {
  if (lo >= hi) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const auto p = point(mid);
  const double d = distance_sq(q, p);
  if (d <= radius_sq) hits.push_back(Candidate{d, ids_[mid]});
  if (hi - lo == 1) return;
  const std::size_t axis = depth % dim_;
  const double diff = q[axis] - p[axis];
  const bool plane_inside = diff * diff <= radius_sq;
  if (diff < 0.0 || plane_inside) search_radius(q, radius_sq, lo, mid, depth + 1, hits);
  if (diff >= 0.0 || plane_inside) search_radius(q, radius_sq, mid + 1, hi, depth + 1, hits);
}

void KdTree::write(std::ostream& out) const {
  out.write(kIndexMagic, 4);
  detail::write_le<std::uint32_t>(out, kIndexVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  detail::write_le<std::uint64_t>(out, input_ids_.size());
  for (std::size_t i = 0; i < input_ids_.size(); ++i) {
    detail::write_le<std::uint64_t>(out, input_ids_[i]);
    for (std::size_t d = 0; d < dim_; ++d) detail::write_f64(out, input_coords_[i * dim_ + d]);
  }
  if (!out) throw Error(ErrorKind::MissingArtifact, "failed writing index");
}

KdTree KdTree::read(std::istream& in) {
  detail::expect_magic(in, kIndexMagic);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kIndexVersion) throw Error(ErrorKind::ParseError, "unsupported index version " + std::to_string(version));
  const auto dim = detail::read_le<std::uint32_t>(in, "dimension");
  const auto n = detail::read_le<std::uint64_t>(in, "point count");
  if (dim == 0 || dim > (1u << 20) || n == 0 || n > (std::uint64_t{1} << 32)) {
    throw Error(ErrorKind::ParseError, "implausible index header");
  }
  std::vector<RecordId> ids;
  std::vector<double> coords;
  ids.reserve(n);
  coords.reserve(n * dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    ids.push_back(detail::read_le<std::uint64_t>(in, "id"));
    for (std::uint32_t d = 0; d < dim; ++d) coords.push_back(detail::read_f64(in, "coordinate"));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::ParseError, "trailing bytes after index");
  return KdTree(std::move(ids), std::move(coords), dim);
}

void KdTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string() + " for writing");
  write(out);
}

KdTree KdTree::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open index " + path.string());
  return read(in);
}

}  // namespace chronos
