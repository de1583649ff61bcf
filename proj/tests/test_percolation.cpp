#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "gfperc/error.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/rng.hpp"
#include "gfperc/sampler.hpp"

using namespace gfperc;

namespace {

std::vector<std::uint8_t> from_mask(std::uint64_t mask, std::size_t n) {
  std::vector<std::uint8_t> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = (mask >> i) & 1u;
  return c;
}

// Independent circuit oracle: a black cycle winding around the annulus
// center exists iff, when black components are explored while accumulating
// the angle swept around the center, some vertex is reached at two angles
// differing by a nonzero multiple of 2 pi.
class WindingOracle {
 public:
  explicit WindingOracle(const RegionGraph& g) : g_(g), n_(static_cast<int>(g.size())) {
    const Vec2 c = site_position(g.mesh(), g.annulus_center());
    theta_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      const Vec2 x = g.position(i);
      theta_[i] = std::atan2(x.y - c.y, x.x - c.x);
    }
    phi_.resize(n_);
    seen_.resize(n_);
    stack_.reserve(n_);
  }

  bool black_circuit(std::uint64_t mask) {
    std::fill(seen_.begin(), seen_.end(), 0);
    for (int s = 0; s < n_; ++s) {
      if (!((mask >> s) & 1u) || seen_[s]) continue;
      seen_[s] = 1;
      phi_[s] = theta_[s];
      stack_.assign(1, s);
      while (!stack_.empty()) {
        const int v = stack_.back();
        stack_.pop_back();
        for (int w : g_.neighbors(v)) {
          if (!((mask >> w) & 1u)) continue;
          double d = theta_[w] - theta_[v];
          while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
          while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
          const double a = phi_[v] + d;
          if (!seen_[w]) {
            seen_[w] = 1;
            phi_[w] = a;
            stack_.push_back(w);
          } else if (std::abs(a - phi_[w]) > std::numbers::pi) {
            return true;
          }
        }
      }
    }
    return false;
  }

 private:
  const RegionGraph& g_;
  int n_;
  std::vector<double> theta_, phi_;
  std::vector<std::uint8_t> seen_;
  std::vector<int> stack_;
};

}  // namespace

TEST_SUITE("percolation") {

TEST_CASE("union find") {
  UnionFind uf(6);
  CHECK(uf.unite(0, 1));
  CHECK(uf.unite(2, 3));
  CHECK_FALSE(uf.unite(1, 0));
  CHECK(uf.connected(0, 1));
  CHECK_FALSE(uf.connected(1, 2));
  uf.unite(1, 3);
  CHECK(uf.connected(0, 2));
  uf.reset(6);
  CHECK_FALSE(uf.connected(0, 1));
}

TEST_CASE("constant colorings") {
  const RegionGraph g = RegionGraph::rectangle(0.5, 3.0, 2.0);
  const std::vector<std::uint8_t> black(g.size(), 1), white(g.size(), 0);
  CHECK(crossing(g, black, Direction::left_right, Color::black));
  CHECK(crossing(g, black, Direction::top_bottom, Color::black));
  CHECK_FALSE(crossing(g, white, Direction::left_right, Color::black));
  CHECK(crossing(g, white, Direction::left_right, Color::white));
}

TEST_CASE("duality holds for every coloring of an 18-site rectangle") {
  const RegionGraph g = RegionGraph::rectangle(1.0, 3.0, 2.0);
  REQUIRE(g.size() == 18);
  PercolationWorkspace ws;
  std::uint64_t bad = 0;
  for (std::uint64_t m = 0; m < (1ull << g.size()); ++m) {
    const auto c = from_mask(m, g.size());
    const bool b = crossing(g, c, g.box(), Direction::left_right, Color::black, &ws);
    const bool w = crossing(g, c, g.box(), Direction::top_bottom, Color::white, &ws);
    if (b == w) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("monotone coupling in p") {
  StreamRng rng(4, 0);
  std::vector<double> f(500);
  for (double& x : f) x = rng.normal();
  const auto lo = color_sites(f, -0.3), hi = color_sites(f, 0.4);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(lo[i] <= hi[i]);
  const std::vector<double> tie{-0.5};
  CHECK(color_sites(tie, 0.5)[0] == 1);
}

TEST_CASE("bottleneck levels agree with direct crossings") {
  const RegionGraph g = RegionGraph::rectangle(0.5, 4.0, 2.0);
  const ConvolutionSampler s(build_lattice_sqrt_kernel(Kernel::bargmann_fock(), 0.5), g);
  for (std::uint64_t r = 0; r < 30; ++r) {
    const FieldSample f = s.sample(6, r);
    const double lb = black_crossing_level(g, f.values, g.box(), Direction::left_right);
    const double lw = white_crossing_level(g, f.values, g.box(), Direction::top_bottom);
    for (double p : {-0.6, -0.2, 0.0, 0.15, 0.5}) {
      const auto c = color_sites(f.values, p);
      CHECK((p >= -lb) == crossing(g, c, Direction::left_right, Color::black));
      CHECK((lw < -p) == crossing(g, c, Direction::top_bottom, Color::white));
    }
    // At the bottleneck level itself the crossing is black.
    CHECK(crossing(g, color_sites(f.values, -lb), Direction::left_right, Color::black));
  }
}

TEST_CASE("arm events") {
  const RegionGraph g = RegionGraph::annulus(0.5, {0.0, 0.0}, 1.0, 2.0);
  const std::vector<std::uint8_t> black(g.size(), 1), white(g.size(), 0);
  CHECK(arm_event(g, black, Color::black));
  CHECK_FALSE(arm_event(g, white, Color::black));
  CHECK(circuit_event(g, black, Color::black));
  // Radial ray along the positive x axis.
  std::vector<std::uint8_t> ray(g.size(), 0);
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    if (g.site(i).b == 0) ray[i] = 1;
  }
  CHECK(arm_event(g, ray, Color::black));
  std::vector<std::uint8_t> blocked(g.size(), 1);
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    if (g.site(i).b == 0 && g.site(i).a > 0) blocked[i] = 0;
  }
  CHECK_FALSE(circuit_event(g, blocked, Color::black));
  CHECK_THROWS_AS(arm_event(RegionGraph::rectangle(1.0, 2.0, 1.0), black, Color::black), PreconditionError);
}

TEST_CASE("circuit event matches a winding oracle on every coloring") {
  const RegionGraph g = RegionGraph::annulus(1.0, {0.5, 0.5}, 0.5, 1.5);
  REQUIRE(g.size() == 24);
  WindingOracle oracle(g);
  PercolationWorkspace ws;
  std::vector<std::uint8_t> c(g.size());
  std::uint64_t bad = 0, circuits = 0;
  for (std::uint64_t m = 0; m < (1ull << g.size()); ++m) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = (m >> i) & 1u;
    const bool lib = circuit_event(g, c, Color::black, &ws);
    if (lib != oracle.black_circuit(m)) ++bad;
    circuits += lib;
  }
  CHECK(bad == 0);
  CHECK(circuits > 0);
}

TEST_CASE("r sequence") {
  const RSequence s = r_sequence(6);
  CHECK(s.r[0] == 1.0);
  CHECK(s.r[1] == 3.0);
  CHECK(s.r[2] == doctest::Approx(6.0 + std::sqrt(3.0)).epsilon(1e-12));
  CHECK(s.lower_bound_holds);
  for (int k = 0; k <= 6; ++k) CHECK(s.r[k] <= s.bracket_constant * std::ldexp(1.0, k) * (1 + 1e-12));
}

TEST_CASE("multicross events") {
  const double eps = 0.5, r = 2.0;
  const MultiCrossLayout layout = multicross_layout(eps, r);
  CHECK(layout.horizontal.size() == 4);
  CHECK(layout.vertical.size() == 3);
  const RegionGraph g = RegionGraph::rectangle(eps, 5.0 * r, r);
  const std::vector<std::uint8_t> black(g.size(), 1);
  CHECK(multicross_event(g, black, layout));
  // A white column at x = 1 blocks the first horizontal crossing.
  std::vector<std::uint8_t> col = black;
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    const int a = g.site(i).a;
    if (a >= 3 && a <= 5) col[i] = 0;
  }
  CHECK_FALSE(multicross_event(g, col, layout));

  const ConvolutionSampler s(build_lattice_sqrt_kernel(Kernel::bargmann_fock(), eps), g);
  int hits = 0;
  for (std::uint64_t k = 0; k < 400; ++k) {
    const auto c = color_sites(s.sample(31, k).values, 0.3);
    if (multicross_event(g, c, layout)) {
      ++hits;
      CHECK(crossing(g, c, Direction::left_right, Color::black));
    }
  }
  CHECK(hits > 0);
}

TEST_CASE("crossing estimates at extreme levels") {
  CHECK(estimate_crossing(Kernel::bargmann_fock(), 0.5, 4.0, 2.0, 10.0, 500, 3).mean >= 0.999);
  CHECK(estimate_crossing(Kernel::bargmann_fock(), 0.5, 4.0, 2.0, -10.0, 500, 3).mean <= 0.001);
}

}
