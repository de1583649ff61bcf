#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gfperc/kernel.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/stats.hpp"

namespace gfperc {

enum class Direction { left_right, top_bottom };
enum class Color : std::uint8_t { white = 0, black = 1 };

/// Disjoint sets with path halving and union by rank.
class UnionFind {
 public:
  UnionFind() = default;
  explicit UnionFind(std::size_t n) { reset(n); }
  void reset(std::size_t n);
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(int x, int y);
  bool connected(int x, int y) { return find(x) == find(y); }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
  std::vector<std::uint8_t> rank_;
};

/// omega_x = 1{f(x) >= -p}; ties are black.
std::vector<std::uint8_t> color_sites(std::span<const double> field, double p);

/// Scratch memory reused across configurations.
struct PercolationWorkspace {
  UnionFind uf;
  std::vector<int> order;
  std::vector<std::uint8_t> added;
};

/// Same-colored path inside `box` between its two sides (left/right or
/// bottom/top). The sides are the sites of the box lying on them.
bool crossing(const RegionGraph& g, std::span<const std::uint8_t> colors, HalfBox box, Direction dir, Color color,
              PercolationWorkspace* ws = nullptr);
inline bool crossing(const RegionGraph& g, std::span<const std::uint8_t> colors, Direction dir, Color color) {
  return crossing(g, colors, g.box(), dir, color);
}

/// Bottleneck levels, giving the crossing indicator for every p at once.
/// black: sup over paths of the path minimum of f; black crossing at p iff
///        p >= -level (ties black).
/// white: inf over paths of the path maximum of f; white crossing at p iff
///        level < -p.
/// -inf (black) or +inf (white) when the box has no path at all.
double black_crossing_level(const RegionGraph& g, std::span<const double> field, HalfBox box, Direction dir,
                            PercolationWorkspace* ws = nullptr);
double white_crossing_level(const RegionGraph& g, std::span<const double> field, HalfBox box, Direction dir,
                            PercolationWorkspace* ws = nullptr);

/// Annulus events: arm = same-colored path from the inner to the outer
/// boundary; circuit(black) = no white arm, which on a triangulation is a
/// black circuit separating the two boundaries.
bool arm_event(const RegionGraph& annulus, std::span<const std::uint8_t> colors, Color color,
               PercolationWorkspace* ws = nullptr);
bool circuit_event(const RegionGraph& annulus, std::span<const std::uint8_t> colors, Color color,
                   PercolationWorkspace* ws = nullptr);

/// r_0 = 1, r_{k+1} = 2 r_k + sqrt(r_k).
struct RSequence {
  std::vector<double> r;
  /// max_k r_k / 2^k; the bracketing 2^k <= r_k <= C 2^k holds with this C.
  double bracket_constant = 1.0;
  bool lower_bound_holds = true;
};
RSequence r_sequence(int k_max);

/// Black LR crossings of [j r, (j + 2) r] x [0, r] for j = 0..3 and black TB
/// crossings of [j r, (j + 1) r] x [0, r] for j = 1..3, with r snapped to
/// cells of the graph mesh. The graph must contain [0, 5r] x [0, r].
struct MultiCrossLayout {
  int cells = 0;  // r in cells
  std::vector<HalfBox> horizontal;
  std::vector<HalfBox> vertical;
};
MultiCrossLayout multicross_layout(double eps, double r);
bool multicross_event(const RegionGraph& g, std::span<const std::uint8_t> colors, const MultiCrossLayout& layout,
                      PercolationWorkspace* ws = nullptr);

/// Region [0, rho R] x [0, R] (sides snapped to the mesh).
RegionGraph crossing_region(double eps, double R, double rho);

/// Per-replicate black left-right bottleneck levels on [0, rho R] x [0, R];
/// replicate r uses stream r of `seed`.
std::vector<double> sample_crossing_levels(const Kernel& kernel, double eps, double R, double rho, std::uint64_t n,
                                           std::uint64_t seed);
/// Fraction of levels with p >= -level.
MCEstimate crossing_estimate_from_levels(std::span<const double> levels, double p, std::uint64_t seed = 0);

/// Monte Carlo P[Cross_p(rho R, R)] from n independent fields.
MCEstimate estimate_crossing(const Kernel& kernel, double eps, double R, double rho, double p, std::uint64_t n,
                             std::uint64_t seed);

}  // namespace gfperc
