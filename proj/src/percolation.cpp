#include "gfperc/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gfperc/error.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/sampler.hpp"

namespace gfperc {

void UnionFind::reset(std::size_t n) {
  parent_.resize(n);
  rank_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<int>(i);
}

bool UnionFind::unite(int x, int y) {
  x = find(x);
  y = find(y);
  if (x == y) return false;
  if (rank_[x] < rank_[y]) std::swap(x, y);
  parent_[y] = x;
  if (rank_[x] == rank_[y]) ++rank_[x];
  return true;
}

std::vector<std::uint8_t> color_sites(std::span<const double> field, double p) {
  std::vector<std::uint8_t> c(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) c[i] = field[i] >= -p ? 1 : 0;
  return c;
}

namespace {

struct Sides {
  std::uint8_t source;
  std::uint8_t target;
};

// Which side(s) of the box a site lies on, as a pair of flags.
inline Sides side_flags(LatticeSite s, const HalfBox& box, Direction dir) {
  if (dir == Direction::left_right) return {static_cast<std::uint8_t>(s.a == box.a0), static_cast<std::uint8_t>(s.a == box.a1)};
  return {static_cast<std::uint8_t>(s.b == box.b0), static_cast<std::uint8_t>(s.b == box.b1)};
}

void check_box(const RegionGraph& g, const HalfBox& box) {
  if (box.a1 <= box.a0 || box.b1 <= box.b0) throw PreconditionError("crossing box is degenerate");
  const HalfBox r = g.box();
  if (g.kind() == RegionKind::rectangle &&
      (box.a0 < r.a0 || box.a1 > r.a1 || box.b0 < r.b0 || box.b1 > r.b1)) {
    throw PreconditionError("crossing box is not contained in the region");
  }
}

// Threshold connection with sites added in the given order. Returns the
// index in `order` at which source and target first connect, or -1.
template <class InBox, class Source, class Target>
long long connect_in_order(const RegionGraph& g, std::span<const int> order, InBox in_box, Source is_source,
                           Target is_target, PercolationWorkspace& ws) {
  const int n = static_cast<int>(g.size());
  const int src = n, dst = n + 1;
  ws.uf.reset(g.size() + 2);
  ws.added.assign(g.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int i = order[k];
    ws.added[i] = 1;
    if (is_source(i)) ws.uf.unite(i, src);
    if (is_target(i)) ws.uf.unite(i, dst);
    for (int j : g.neighbors(i)) {
      if (ws.added[j] && in_box(j)) ws.uf.unite(i, j);
    }
    if (ws.uf.connected(src, dst)) return static_cast<long long>(k);
  }
  return -1;
}

bool connected_sets(const RegionGraph& g, std::span<const std::uint8_t> colors, std::uint8_t want,
                    const HalfBox* box, std::uint8_t source_mark, std::uint8_t target_mark, Direction dir,
                    PercolationWorkspace& ws) {
  const int n = static_cast<int>(g.size());
  const int src = n, dst = n + 1;
  ws.uf.reset(g.size() + 2);
  for (int i = 0; i < n; ++i) {
    if (colors[i] != want) continue;
    const LatticeSite s = g.site(i);
    if (box != nullptr && !box->contains(s)) continue;
    bool is_src, is_dst;
    if (box != nullptr) {
      const Sides f = side_flags(s, *box, dir);
      is_src = f.source;
      is_dst = f.target;
    } else {
      is_src = (g.marks(i) & source_mark) != 0;
      is_dst = (g.marks(i) & target_mark) != 0;
    }
    if (is_src) ws.uf.unite(i, src);
    if (is_dst) ws.uf.unite(i, dst);
    for (int j : g.neighbors(i)) {
      if (j < i && colors[j] == want && (box == nullptr || box->contains(g.site(j)))) ws.uf.unite(i, j);
    }
  }
  return ws.uf.connected(src, dst);
}

double crossing_level(const RegionGraph& g, std::span<const double> field, HalfBox box, Direction dir, bool black,
                      PercolationWorkspace* ws_in) {
  if (field.size() != g.size()) throw PreconditionError("field size does not match the region");
  check_box(g, box);
  PercolationWorkspace local;
  PercolationWorkspace& ws = ws_in != nullptr ? *ws_in : local;
  ws.order.clear();
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    if (box.contains(g.site(i))) ws.order.push_back(i);
  }
  // Black: decreasing f. White: increasing f. Index breaks ties for a fixed order.
  if (black) {
    std::sort(ws.order.begin(), ws.order.end(), [&](int x, int y) { return field[x] != field[y] ? field[x] > field[y] : x < y; });
  } else {
    std::sort(ws.order.begin(), ws.order.end(), [&](int x, int y) { return field[x] != field[y] ? field[x] < field[y] : x < y; });
  }
  auto in_box = [&](int j) { return box.contains(g.site(j)); };
  auto is_src = [&](int i) { return side_flags(g.site(i), box, dir).source != 0; };
  auto is_dst = [&](int i) { return side_flags(g.site(i), box, dir).target != 0; };
  const long long k = connect_in_order(g, ws.order, in_box, is_src, is_dst, ws);
  if (k < 0) return black ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  return field[ws.order[static_cast<std::size_t>(k)]];
}

}  // namespace

bool crossing(const RegionGraph& g, std::span<const std::uint8_t> colors, HalfBox box, Direction dir, Color color,
              PercolationWorkspace* ws) {
  if (colors.size() != g.size()) throw PreconditionError("coloring size does not match the region");
  check_box(g, box);
  PercolationWorkspace local;
  return connected_sets(g, colors, static_cast<std::uint8_t>(color), &box, 0, 0, dir, ws != nullptr ? *ws : local);
}

double black_crossing_level(const RegionGraph& g, std::span<const double> field, HalfBox box, Direction dir,
                            PercolationWorkspace* ws) {
  return crossing_level(g, field, box, dir, true, ws);
}

double white_crossing_level(const RegionGraph& g, std::span<const double> field, HalfBox box, Direction dir,
                            PercolationWorkspace* ws) {
  return crossing_level(g, field, box, dir, false, ws);
}

bool arm_event(const RegionGraph& annulus, std::span<const std::uint8_t> colors, Color color, PercolationWorkspace* ws) {
  if (annulus.kind() != RegionKind::annulus) throw PreconditionError("arm_event needs an annulus region");
  if (colors.size() != annulus.size()) throw PreconditionError("coloring size does not match the region");
  PercolationWorkspace local;
  return connected_sets(annulus, colors, static_cast<std::uint8_t>(color), nullptr, mark_inner, mark_outer,
                        Direction::left_right, ws != nullptr ? *ws : local);
}

bool circuit_event(const RegionGraph& annulus, std::span<const std::uint8_t> colors, Color color,
                   PercolationWorkspace* ws) {
  const Color other = color == Color::black ? Color::white : Color::black;
  return !arm_event(annulus, colors, other, ws);
}

RSequence r_sequence(int k_max) {
  if (k_max < 0) throw PreconditionError("r_sequence: k_max must be >= 0");
  RSequence out;
  out.r.push_back(1.0);
  for (int k = 0; k < k_max; ++k) out.r.push_back(2.0 * out.r.back() + std::sqrt(out.r.back()));
  for (int k = 0; k <= k_max; ++k) {
    const double scale = std::ldexp(1.0, k);
    out.bracket_constant = std::max(out.bracket_constant, out.r[k] / scale);
    if (out.r[k] < scale) out.lower_bound_holds = false;
  }
  return out;
}

MultiCrossLayout multicross_layout(double eps, double r) {
  MultiCrossLayout layout;
  const int c = cells_for_length(eps, r);
  layout.cells = c;
  for (int j = 0; j <= 3; ++j) layout.horizontal.push_back(HalfBox::cells(j * c, 0, 2 * c, c));
  for (int j = 1; j <= 3; ++j) layout.vertical.push_back(HalfBox::cells(j * c, 0, c, c));
  return layout;
}

bool multicross_event(const RegionGraph& g, std::span<const std::uint8_t> colors, const MultiCrossLayout& layout,
                      PercolationWorkspace* ws) {
  PercolationWorkspace local;
  PercolationWorkspace& w = ws != nullptr ? *ws : local;
  for (const HalfBox& b : layout.horizontal) {
    if (!crossing(g, colors, b, Direction::left_right, Color::black, &w)) return false;
  }
  for (const HalfBox& b : layout.vertical) {
    if (!crossing(g, colors, b, Direction::top_bottom, Color::black, &w)) return false;
  }
  return true;
}

RegionGraph crossing_region(double eps, double R, double rho) {
  if (!(rho > 0.0)) throw PreconditionError("aspect rho must be positive");
  return RegionGraph::rectangle(eps, rho * R, R);
}

std::vector<double> sample_crossing_levels(const Kernel& kernel, double eps, double R, double rho, std::uint64_t n,
                                           std::uint64_t seed) {
  const RegionGraph g = crossing_region(eps, R, rho);
  const ConvolutionSampler sampler(build_lattice_sqrt_kernel(kernel, eps), g);
  struct Ws {
    ConvolutionSampler::Workspace conv;
    PercolationWorkspace perc;
    std::vector<double> field;
  };
  return run_replicates(
      n, [&] { return Ws{sampler.make_workspace(), {}, std::vector<double>(g.size())}; },
      [&](Ws& ws, std::uint64_t r) {
        sampler.sample_into(seed, r, ws.conv, ws.field);
        return black_crossing_level(g, ws.field, g.box(), Direction::left_right, &ws.perc);
      });
}

MCEstimate crossing_estimate_from_levels(std::span<const double> levels, double p, std::uint64_t seed) {
  if (levels.empty()) throw PreconditionError("crossing estimate from an empty sample");
  const auto n = static_cast<std::uint64_t>(levels.size());
  const auto k = static_cast<std::uint64_t>(std::count_if(levels.begin(), levels.end(), [p](double m) { return p >= -m; }));
  const double q = static_cast<double>(k) / static_cast<double>(n);
  const double se = n > 1 ? std::sqrt(q * (1.0 - q) / static_cast<double>(n - 1)) : 0.0;
  return {q, se, n, seed};
}

MCEstimate estimate_crossing(const Kernel& kernel, double eps, double R, double rho, double p, std::uint64_t n,
                             std::uint64_t seed) {
  const auto levels = sample_crossing_levels(kernel, eps, R, rho, n, seed);
  return crossing_estimate_from_levels(levels, p, seed);
}

}  // namespace gfperc
