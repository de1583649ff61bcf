#pragma once

// Face-centered square lattice of mesh eps: the corners eps*Z^2 plus the
// square centers eps*(Z^2 + (1/2,1/2)), with square edges between corners and
// diagonal edges from each center to its four corners. The graph is a
// triangulation of the plane.
//
// Sites are addressed by half-unit integer coordinates (a, b), a = b (mod 2),
// at position (eps a / 2, eps b / 2). Corners have both coordinates even.
// The rotated index (u, v) = ((a + b) / 2, (b - a) / 2) is a bijection onto
// Z^2 in which the diagonal edges become the unit steps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gfperc/kernel.hpp"

namespace gfperc {

struct LatticeSite {
  int a = 0;
  int b = 0;
  friend bool operator==(const LatticeSite&, const LatticeSite&) = default;
};

struct Z2Index {
  int u = 0;
  int v = 0;
  friend bool operator==(const Z2Index&, const Z2Index&) = default;
};

inline bool is_corner(LatticeSite s) { return (s.a & 1) == 0; }

/// Throws PreconditionError when a != b (mod 2).
Z2Index rotate_index(LatticeSite s);
LatticeSite unrotate_index(Z2Index z);

/// Site at a physical position; throws PreconditionError when x is further
/// than 1e-9 * eps from every site.
LatticeSite site_at(double eps, Vec2 x);
Vec2 site_position(double eps, LatticeSite s);

/// Axis-aligned box in half-unit coordinates, closed on both ends. Its sides
/// lie on lattice lines when all four bounds are even.
struct HalfBox {
  int a0 = 0, a1 = 0, b0 = 0, b1 = 0;
  bool contains(LatticeSite s) const { return s.a >= a0 && s.a <= a1 && s.b >= b0 && s.b <= b1; }
  /// Box of nx by ny cells with lower-left corner at cell (x0, y0).
  static HalfBox cells(int x0, int y0, int nx, int ny) { return {2 * x0, 2 * (x0 + nx), 2 * y0, 2 * (y0 + ny)}; }
};

enum SideMark : std::uint8_t {
  mark_left = 1,
  mark_right = 2,
  mark_bottom = 4,
  mark_top = 8,
  mark_inner = 16,
  mark_outer = 32,
};

enum class RegionKind { rectangle, annulus };

/// Resource cap on the number of sites of one region.
inline constexpr std::size_t kMaxRegionSites = 4'000'000;

/// Number of lattice cells of length eps closest to a physical length.
/// Throws PreconditionError when the result is < 1.
int cells_for_length(double eps, double length);

class RegionGraph {
 public:
  /// [0, nx eps] x [0, ny eps].
  static RegionGraph rectangle_cells(double eps, int nx, int ny);
  /// [0, w] x [0, h] with each side snapped to the nearest multiple of eps.
  static RegionGraph rectangle(double eps, double width, double height);
  /// Sites s with r_inner <= |s - center|_inf <= r_outer. The center must be a
  /// site and both square boundaries must lie on lattice lines.
  static RegionGraph annulus(double eps, Vec2 center, double r_inner, double r_outer);

  RegionKind kind() const { return kind_; }
  double mesh() const { return eps_; }
  std::size_t size() const { return sites_.size(); }
  const std::vector<LatticeSite>& sites() const { return sites_; }
  LatticeSite site(int i) const { return sites_[i]; }
  Vec2 position(int i) const { return site_position(eps_, sites_[i]); }
  Z2Index index(int i) const { return rotate_index(sites_[i]); }
  std::span<const int> neighbors(int i) const {
    return {adj_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
  }
  std::uint8_t marks(int i) const { return marks_[i]; }
  std::vector<int> marked(std::uint8_t mark) const;
  /// Index of a site, or -1 when it is not in the region.
  int find(LatticeSite s) const;
  std::size_t edge_count() const { return adj_.size() / 2; }

  /// Rectangle only: the whole region as a box.
  HalfBox box() const { return bounds_; }
  /// Annulus only: center (half units) and radii (half units).
  LatticeSite annulus_center() const { return center_; }
  int inner_radius() const { return r_in_; }
  int outer_radius() const { return r_out_; }

  /// Bounding box of the rotated indices.
  int u_min() const { return u0_; }
  int v_min() const { return v0_; }
  int u_extent() const { return nu_; }
  int v_extent() const { return nv_; }

  /// Edge list text dump: header, one "i a b x y marks" line per site, then
  /// one "i j" line per edge with i < j.
  std::string dump() const;

 private:
  RegionGraph() = default;
  void finish();

  RegionKind kind_ = RegionKind::rectangle;
  double eps_ = 0.0;
  std::vector<LatticeSite> sites_;
  std::vector<std::uint8_t> marks_;
  std::vector<int> offsets_;
  std::vector<int> adj_;
  HalfBox bounds_{};
  LatticeSite center_{};
  int r_in_ = 0, r_out_ = 0;
  int u0_ = 0, v0_ = 0, nu_ = 0, nv_ = 0;
  std::vector<int> lookup_;  // nu_ * nv_ dense map from rotated index to site
};

/// Neighbor offsets in half units: 8 for a corner, 4 for a center.
std::span<const LatticeSite> neighbor_offsets(LatticeSite s);

}  // namespace gfperc
