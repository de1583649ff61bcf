#include <algorithm>
#include <set>

#include "doctest.h"

#include "gfperc/error.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/rng.hpp"

using namespace gfperc;

namespace {

std::set<std::pair<int, int>> site_set(const RegionGraph& g) {
  std::set<std::pair<int, int>> s;
  for (const auto& site : g.sites()) s.insert({site.a, site.b});
  return s;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("rectangle [0,2]x[0,1] at eps 1 has 8 sites") {
  // Corners (0,0) (1,0) (2,0) (0,1) (1,1) (2,1) and centers (.5,.5) (1.5,.5).
  const RegionGraph g = RegionGraph::rectangle(1.0, 2.0, 1.0);
  CHECK(g.size() == 8);
  const std::set<std::pair<int, int>> expected{{0, 0}, {2, 0}, {4, 0}, {0, 2}, {2, 2}, {4, 2}, {1, 1}, {3, 1}};
  CHECK(site_set(g) == expected);
  CHECK(g.edge_count() == 15);
}

TEST_CASE("neighbors stay inside and degrees are bounded") {
  const RegionGraph g = RegionGraph::rectangle(0.5, 3.0, 2.0);
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    const auto nb = g.neighbors(i);
    CHECK(nb.size() <= (is_corner(g.site(i)) ? 8u : 4u));
    for (int j : nb) {
      REQUIRE(j >= 0);
      REQUIRE(j < static_cast<int>(g.size()));
      const auto back = g.neighbors(j);
      CHECK(std::find(back.begin(), back.end(), i) != back.end());
    }
  }
}

TEST_CASE("rectangle is a triangulated disc") {
  for (auto [nx, ny] : {std::pair{1, 1}, {2, 1}, {5, 3}, {8, 8}}) {
    const RegionGraph g = RegionGraph::rectangle_cells(1.0, nx, ny);
    const long v = static_cast<long>(g.size());
    const long e = static_cast<long>(g.edge_count());
    const long f = 4L * nx * ny;  // four triangles per cell
    CHECK(v == (nx + 1L) * (ny + 1) + 1L * nx * ny);
    CHECK(v - e + f == 1);
  }
}

TEST_CASE("rotated index") {
  CHECK(rotate_index({0, 0}) == Z2Index{0, 0});
  const Z2Index c = rotate_index({1, 1});
  CHECK(std::abs(c.u) + std::abs(c.v) == 1);
  CHECK_THROWS_AS(rotate_index({1, 0}), PreconditionError);
  StreamRng rng(17, 0);
  for (int k = 0; k < 10000; ++k) {
    const int a = static_cast<int>(rng() % 2001) - 1000;
    int b = static_cast<int>(rng() % 2001) - 1000;
    if ((a - b) % 2 != 0) ++b;
    const LatticeSite s{a, b};
    CHECK(unrotate_index(rotate_index(s)) == s);
  }
}

TEST_CASE("diagonal edges are unit steps in the rotated index") {
  const RegionGraph g = RegionGraph::rectangle(1.0, 3.0, 3.0);
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    for (int j : g.neighbors(i)) {
      const Z2Index a = g.index(i), b = g.index(j);
      const int l1 = std::abs(a.u - b.u) + std::abs(a.v - b.v);
      if (is_corner(g.site(i)) && is_corner(g.site(j))) {
        CHECK(l1 == 2);
      } else {
        CHECK(l1 == 1);
      }
    }
  }
}

TEST_CASE("site lookup by position") {
  CHECK(site_at(0.5, {0.25, 0.25}) == LatticeSite{1, 1});
  CHECK(site_at(0.5, {1.0, 0.5}) == LatticeSite{4, 2});
  CHECK_THROWS_AS(site_at(0.5, {0.1, 0.0}), PreconditionError);
  const RegionGraph g = RegionGraph::rectangle(0.5, 2.0, 1.0);
  CHECK(g.find({1, 1}) >= 0);
  CHECK(g.find({100, 100}) == -1);
}

TEST_CASE("side marks sit on the sides") {
  const double eps = 0.5, w = 3.0, h = 2.0;
  const RegionGraph g = RegionGraph::rectangle(eps, w, h);
  CHECK(!g.marked(mark_left).empty());
  for (int i : g.marked(mark_left)) CHECK(g.position(i).x <= eps);
  for (int i : g.marked(mark_right)) CHECK(g.position(i).x >= w - eps);
  for (int i : g.marked(mark_bottom)) CHECK(g.position(i).y <= eps);
  for (int i : g.marked(mark_top)) CHECK(g.position(i).y >= h - eps);
  // ny + 1 corners on each vertical side.
  CHECK(g.marked(mark_left).size() == 5);
  CHECK(g.marked(mark_bottom).size() == 7);
}

TEST_CASE("rectangle is symmetric under reflection") {
  const RegionGraph g = RegionGraph::rectangle(0.5, 3.0, 2.0);
  const HalfBox box = g.box();
  for (const auto& s : g.sites()) {
    CHECK(g.find({box.a1 - s.a, s.b}) >= 0);
    CHECK(g.find({s.a, box.b1 - s.b}) >= 0);
  }
}

TEST_CASE("annulus marks") {
  const RegionGraph g = RegionGraph::annulus(0.5, {0.0, 0.0}, 1.0, 2.0);
  CHECK(g.kind() == RegionKind::annulus);
  CHECK(!g.marked(mark_inner).empty());
  CHECK(!g.marked(mark_outer).empty());
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    CHECK_FALSE(((g.marks(i) & mark_inner) && (g.marks(i) & mark_outer)));
    const Vec2 x = g.position(i);
    const double r = std::max(std::abs(x.x), std::abs(x.y));
    CHECK(r >= 1.0 - 1e-12);
    CHECK(r <= 2.0 + 1e-12);
  }
  CHECK_THROWS_AS(RegionGraph::annulus(0.5, {0.1, 0.0}, 1.0, 2.0), PreconditionError);
  CHECK_THROWS_AS(RegionGraph::annulus(0.5, {0.0, 0.0}, 2.0, 1.0), PreconditionError);
}

TEST_CASE("dump format") {
  const RegionGraph g = RegionGraph::rectangle(1.0, 2.0, 1.0);
  const std::string d = g.dump();
  CHECK(d.rfind("# gfperc lattice dump v1\n", 0) == 0);
  CHECK(std::count(d.begin(), d.end(), '\n') == 3 + 8 + 15);
}

TEST_CASE("caps and preconditions") {
  CHECK_THROWS_AS(RegionGraph::rectangle(0.001, 10000.0, 10000.0), ResourceError);
  CHECK_THROWS_AS(RegionGraph::rectangle(1.0, 0.1, 1.0), PreconditionError);
  CHECK(cells_for_length(0.5, 10.0) == 20);
}

}
