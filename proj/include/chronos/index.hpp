#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "chronos/core.hpp"

namespace chronos {

/// Hits ordered by ascending squared distance, ties by ascending id.
struct QueryResult {
  std::vector<RecordId> ids;
  std::vector<double> distances_sq;

  std::size_t size() const noexcept { return ids.size(); }
};

/// Exact k-d tree over fixed-dimension points.
///
/// The tree is implicit: points are permuted so that every subrange
/// [lo, hi) stores its median at (lo + hi) / 2, split on dimension
/// depth % dim. Medians are chosen by (coordinate, id), so the layout is a
/// pure function of the input. Immutable once built; concurrent queries are
/// safe.
class KdTree {
 public:
  /// coords is point-major (n * dim values). Throws Empty, DimensionMismatch
  /// or DuplicateId.
  KdTree(std::vector<RecordId> ids, std::vector<double> coords, std::size_t dim);

  /// Convenience overload taking one vector per point.
  static KdTree build(std::span<const RecordId> ids, std::span<const std::vector<double>> points);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  /// Number of nodes on the longest root-to-leaf path.
  std::size_t height() const noexcept;

  /// Exact k nearest neighbours; k >= n returns every point.
  QueryResult top_k(std::span<const double> query, std::size_t k) const;

  /// Every point with squared distance <= radius_sq.
  QueryResult within_radius(std::span<const double> query, double radius_sq) const;

  /// Points and ids in insertion order.
  std::span<const RecordId> input_ids() const noexcept { return input_ids_; }
  std::span<const double> input_coords() const noexcept { return input_coords_; }

  // Index file, little-endian:
  //   "CHRI" | u32 version (1) | u32 dim | u64 n | n x (u64 id, dim f64)
  // Points are stored in insertion order and the tree is rebuilt on load.
  void write(std::ostream& out) const;
  static KdTree read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static KdTree load(const std::filesystem::path& path);

 private:
  struct Candidate {
    double distance_sq;
    RecordId id;
    friend bool operator<(const Candidate& a, const Candidate& b) {
      return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.id < b.id);
    }
  };

  void build_range(std::vector<std::size_t>& order, std::size_t lo, std::size_t hi, std::size_t depth);
  void search_k(std::span<const double> q, std::size_t k, std::size_t lo, std::size_t hi, std::size_t depth,
                std::vector<Candidate>& heap) const;
  void search_radius(std::span<const double> q, double radius_sq, std::size_t lo, std::size_t hi,
                     std::size_t depth, std::vector<Candidate>& hits) const;
  std::span<const double> point(std::size_t slot) const noexcept {
    return {coords_.data() + slot * dim_, dim_};
  }
  void check_query(std::span<const double> query) const;

  std::size_t dim_;
  std::vector<RecordId> input_ids_;
  std::vector<double> input_coords_;
  // Tree order.
  std::vector<RecordId> ids_;
  std::vector<double> coords_;
};

}  // namespace chronos
