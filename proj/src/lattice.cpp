#include "gfperc/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "gfperc/error.hpp"

namespace gfperc {

namespace {

constexpr std::array<LatticeSite, 8> kCornerSteps{{{2, 0}, {-2, 0}, {0, 2}, {0, -2}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
constexpr std::array<LatticeSite, 4> kCenterSteps{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

// Nearest integer to a value expected to be integral up to rounding noise.
int snap_half_units(double value, double tol, const char* what) {
  const double r = std::round(value);
  if (std::abs(value - r) > tol || std::abs(r) > 1e9) {
    throw PreconditionError(std::string(what) + " is not on a lattice line");
  }
  return static_cast<int>(r);
}

}  // namespace

Z2Index rotate_index(LatticeSite s) {
  if (((s.a - s.b) & 1) != 0) {
    throw PreconditionError("rotate_index: (" + std::to_string(s.a) + ", " + std::to_string(s.b) +
                            ") is not a lattice site");
  }
  return {(s.a + s.b) / 2, (s.b - s.a) / 2};
}

LatticeSite unrotate_index(Z2Index z) { return {z.u - z.v, z.u + z.v}; }

Vec2 site_position(double eps, LatticeSite s) { return {0.5 * eps * s.a, 0.5 * eps * s.b}; }

LatticeSite site_at(double eps, Vec2 x) {
  const double tol = 1e-9 * 2.0;
  const LatticeSite s{snap_half_units(2.0 * x.x / eps, tol, "site_at: point"),
                      snap_half_units(2.0 * x.y / eps, tol, "site_at: point")};
  if (((s.a - s.b) & 1) != 0) throw PreconditionError("site_at: point is not a lattice site");
  return s;
}

std::span<const LatticeSite> neighbor_offsets(LatticeSite s) {
  if (is_corner(s)) return kCornerSteps;
  return kCenterSteps;
}

int cells_for_length(double eps, double length) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("mesh must be positive");
  if (!(length > 0.0) || !std::isfinite(length)) throw PreconditionError("region side must be positive");
  const double cells = std::round(length / eps);
  if (cells < 1.0) throw PreconditionError("region side is shorter than the mesh");
  if (cells > 1e7) throw ResourceError("region side spans more than 1e7 cells");
  return static_cast<int>(cells);
}

RegionGraph RegionGraph::rectangle_cells(double eps, int nx, int ny) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("mesh must be positive");
  if (nx < 1 || ny < 1) throw PreconditionError("rectangle must span at least one cell per side");
  const double estimate = 2.0 * nx * ny + nx + ny + 1.0;
  if (estimate > static_cast<double>(kMaxRegionSites)) {
    throw ResourceError("rectangle of " + std::to_string(nx) + " x " + std::to_string(ny) + " cells exceeds the " +
                        std::to_string(kMaxRegionSites) + " site cap");
  }
  RegionGraph g;
  g.kind_ = RegionKind::rectangle;
  g.eps_ = eps;
  g.bounds_ = HalfBox::cells(0, 0, nx, ny);
  const HalfBox& box = g.bounds_;
  for (int b = box.b0; b <= box.b1; ++b) {
    for (int a = box.a0 + ((b - box.a0) & 1); a <= box.a1; a += 2) {
      g.sites_.push_back({a, b});
      std::uint8_t m = 0;
      if (a == box.a0) m |= mark_left;
      if (a == box.a1) m |= mark_right;
      if (b == box.b0) m |= mark_bottom;
      if (b == box.b1) m |= mark_top;
      g.marks_.push_back(m);
    }
  }
  g.finish();
  return g;
}

RegionGraph RegionGraph::rectangle(double eps, double width, double height) {
  return rectangle_cells(eps, cells_for_length(eps, width), cells_for_length(eps, height));
}

RegionGraph RegionGraph::annulus(double eps, Vec2 center, double r_inner, double r_outer) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("mesh must be positive");
  if (!(r_inner > 0.0) || !(r_outer > r_inner)) throw PreconditionError("annulus needs 0 < r_inner < r_outer");
  const LatticeSite c = site_at(eps, center);
  const double tol = 1e-9 * 2.0;
  const int r1 = snap_half_units(2.0 * r_inner / eps, tol, "annulus inner radius");
  const int r2 = snap_half_units(2.0 * r_outer / eps, tol, "annulus outer radius");
  // Boundary squares must run along corner-to-corner lines.
  if (((c.a + r1) & 1) != 0 || ((c.a + r2) & 1) != 0) {
    throw PreconditionError("annulus boundaries must lie on lattice lines");
  }
  if (2.0 * r2 * r2 > static_cast<double>(kMaxRegionSites)) {
    throw ResourceError("annulus exceeds the " + std::to_string(kMaxRegionSites) + " site cap");
  }
  RegionGraph g;
  g.kind_ = RegionKind::annulus;
  g.eps_ = eps;
  g.center_ = c;
  g.r_in_ = r1;
  g.r_out_ = r2;
  g.bounds_ = {c.a - r2, c.a + r2, c.b - r2, c.b + r2};
  for (int b = c.b - r2; b <= c.b + r2; ++b) {
    for (int a = c.a - r2 + ((b - c.a + r2) & 1); a <= c.a + r2; a += 2) {
      const int d = std::max(std::abs(a - c.a), std::abs(b - c.b));
      if (d < r1) continue;
      g.sites_.push_back({a, b});
      std::uint8_t m = 0;
      if (d == r1) m |= mark_inner;
      if (d == r2) m |= mark_outer;
      g.marks_.push_back(m);
    }
  }
  g.finish();
  return g;
}

void RegionGraph::finish() {
  // Row-major order in the rotated index: by v, then u.
  std::vector<std::size_t> order(sites_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const Z2Index zx = rotate_index(sites_[x]);
    const Z2Index zy = rotate_index(sites_[y]);
    return zx.v != zy.v ? zx.v < zy.v : zx.u < zy.u;
  });
  std::vector<LatticeSite> sorted_sites(sites_.size());
  std::vector<std::uint8_t> sorted_marks(sites_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_sites[i] = sites_[order[i]];
    sorted_marks[i] = marks_[order[i]];
  }
  sites_ = std::move(sorted_sites);
  marks_ = std::move(sorted_marks);

  int umin = std::numeric_limits<int>::max(), umax = std::numeric_limits<int>::min();
  int vmin = umin, vmax = umax;
  for (const LatticeSite s : sites_) {
    const Z2Index z = rotate_index(s);
    umin = std::min(umin, z.u);
    umax = std::max(umax, z.u);
    vmin = std::min(vmin, z.v);
    vmax = std::max(vmax, z.v);
  }
  u0_ = umin;
  v0_ = vmin;
  nu_ = umax - umin + 1;
  nv_ = vmax - vmin + 1;
  lookup_.assign(static_cast<std::size_t>(nu_) * nv_, -1);
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const Z2Index z = rotate_index(sites_[i]);
    lookup_[static_cast<std::size_t>(z.v - v0_) * nu_ + (z.u - u0_)] = static_cast<int>(i);
  }

  offsets_.assign(sites_.size() + 1, 0);
  adj_.clear();
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const LatticeSite s = sites_[i];
    for (const LatticeSite d : neighbor_offsets(s)) {
      const int j = find({s.a + d.a, s.b + d.b});
      if (j >= 0) adj_.push_back(j);
    }
    offsets_[i + 1] = static_cast<int>(adj_.size());
  }
}

int RegionGraph::find(LatticeSite s) const {
  if (((s.a - s.b) & 1) != 0) return -1;
  const Z2Index z = rotate_index(s);
  const int du = z.u - u0_;
  const int dv = z.v - v0_;
  if (du < 0 || dv < 0 || du >= nu_ || dv >= nv_) return -1;
  return lookup_[static_cast<std::size_t>(dv) * nu_ + du];
}

std::vector<int> RegionGraph::marked(std::uint8_t mark) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if ((marks_[i] & mark) != 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::string RegionGraph::dump() const {
  std::ostringstream out;
  out << "# gfperc lattice dump v1\n";
  out << "# kind " << (kind_ == RegionKind::rectangle ? "rectangle" : "annulus") << " mesh " << eps_ << '\n';
  out << "# sites " << sites_.size() << " edges " << edge_count() << '\n';
  char line[128];
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const Vec2 x = position(static_cast<int>(i));
    std::snprintf(line, sizeof line, "v %zu %d %d %.17g %.17g %u\n", i, sites_[i].a, sites_[i].b, x.x, x.y,
                  static_cast<unsigned>(marks_[i]));
    out << line;
  }
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    for (int j : neighbors(static_cast<int>(i))) {
      if (static_cast<std::size_t>(j) > i) out << "e " << i << ' ' << j << '\n';
    }
  }
  return out.str();
}

}  // namespace gfperc
