#include "gfperc/sprinkling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gfperc/error.hpp"
#include "gfperc/influence.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/rng.hpp"
#include "gfperc/sampler.hpp"

namespace gfperc {

namespace {

// Points of the edge: x, y, then K interior points in order.
std::vector<Vec2> edge_points(double eps, int K) {
  std::vector<Vec2> pts{{0.0, 0.0}, {eps, 0.0}};
  for (int j = 1; j <= K; ++j) pts.push_back({eps * j / (K + 1), 0.0});
  return pts;
}

// {f(x) >= -p/2, f(y) >= -p/2, f(z_j) <= -p} for interior point j. The
// three pinned values are drawn as independent exponential slacks off the
// vertex with rates from the Gaussian log-density gradient there.
struct Wedge {
  int site = 0;
  Eigen::Matrix3d precision;
  Eigen::MatrixXd cross;  // Sigma(., {0, 1, site})
  Eigen::Vector3d rate;
  double log_norm = 0.0;  // -log((2 pi)^{3/2} sqrt(det C))
};

std::vector<Wedge> make_wedges(const Eigen::MatrixXd& sigma, double p, int K) {
  std::vector<Wedge> out;
  for (int j = 2; j < K + 2; ++j) {
    const int idx[3] = {0, 1, j};
    Eigen::Matrix3d c;
    Wedge w;
    w.site = j;
    w.cross.resize(sigma.rows(), 3);
    for (int a = 0; a < 3; ++a) {
      w.cross.col(a) = sigma.col(idx[a]);
      for (int b = 0; b < 3; ++b) c(a, b) = sigma(idx[a], idx[b]);
    }
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(c);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      throw NumericalError("fold: pinned covariance is singular", ldlt.vectorD().minCoeff());
    }
    w.precision = ldlt.solve(Eigen::Matrix3d::Identity());
    const Eigen::Vector3d vertex(-0.5 * p, -0.5 * p, -p);
    const Eigen::Vector3d grad = w.precision * vertex;
    const Eigen::Vector3d sign(1.0, 1.0, -1.0);
    for (int a = 0; a < 3; ++a) {
      // Any positive rate keeps the estimator unbiased; the gradient makes the
      // weights nearly constant when the vertex dominates.
      w.rate(a) = std::max(sign(a) * grad(a), 1.0 / std::sqrt(c(a, a)));
    }
    w.log_norm = -1.5 * std::log(2.0 * std::numbers::pi) - 0.5 * ldlt.vectorD().array().log().sum();
    out.push_back(std::move(w));
  }
  return out;
}

bool is_fold(std::span<const double> x, double p) {
  if (x[0] < -0.5 * p || x[1] < -0.5 * p) return false;
  for (std::size_t j = 2; j < x.size(); ++j) {
    if (x[j] < -p) return true;
  }
  return false;
}

}  // namespace

MCEstimate estimate_fold_probability(const Kernel& kernel, const FoldSpec& spec, std::uint64_t seed,
                                     FoldEstimator estimator) {
  if (!(spec.eps > 0.0)) throw PreconditionError("fold: eps must be positive");
  if (!(spec.p > 0.0)) throw PreconditionError("fold: p must be positive");
  if (spec.K < 0) throw PreconditionError("fold: K must be >= 0");
  if (spec.n < 2) throw PreconditionError("fold: n must be >= 2");
  if (spec.K == 0) return {0.0, 0.0, spec.n, seed};

  const std::vector<Vec2> pts = edge_points(spec.eps, spec.K);
  const GaussianSpec g = GaussianSpec::from_kernel(kernel, pts);
  const int d = g.dim();
  const Eigen::MatrixXd& s = g.sqrt_sigma();

  if (estimator == FoldEstimator::plain) {
    const auto values = run_replicates(
        spec.n, [d] { return std::pair{std::vector<double>(d), std::vector<double>(d)}; },
        [&](auto& ws, std::uint64_t r) -> double {
          StreamRng rng(seed, r);
          auto& [z, x] = ws;
          for (double& v : z) v = rng.normal();
          for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += s(i, k) * z[k];
            x[i] = acc;
          }
          return is_fold(x, spec.p) ? 1.0 : 0.0;
        });
    return summarize(values, seed);
  }

  const std::vector<Wedge> wedges = make_wedges(g.sigma(), spec.p, spec.K);
  const double p = spec.p;
  const auto values = run_replicates(
      spec.n, [d] { return std::pair{std::vector<double>(d), std::vector<double>(d)}; },
      [&](auto& ws, std::uint64_t r) -> double {
        StreamRng rng(seed, r);
        auto& [z, x] = ws;
        double total = 0.0;
        for (const Wedge& w : wedges) {
          // Slacks above the wedge vertex, then the three pinned values.
          Eigen::Vector3d t, y;
          double log_q = 0.0;
          for (int i = 0; i < 3; ++i) {
            t(i) = -std::log1p(-rng.uniform()) / w.rate(i);
            log_q += std::log(w.rate(i)) - w.rate(i) * t(i);
          }
          y << -0.5 * p + t(0), -0.5 * p + t(1), -p - t(2);
          const double log_w = w.log_norm - 0.5 * y.dot(w.precision * y) - log_q;

          // Unconditioned draw moved onto the pinned values.
          for (double& v : z) v = rng.normal();
          for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += s(i, k) * z[k];
            x[i] = acc;
          }
          const Eigen::Vector3d gap = w.precision * (y - Eigen::Vector3d(x[0], x[1], x[w.site]));
          for (int i = 0; i < d; ++i) x[i] += w.cross.row(i).dot(gap);
          x[0] = y(0);
          x[1] = y(1);
          x[w.site] = y(2);

          int hits = 0;
          for (int i = 2; i < d; ++i) hits += x[i] < -p || i == w.site;
          total += std::exp(log_w) / hits;
        }
        return total;
      });
  return summarize(values, seed);
}

std::vector<FoldRefinementRow> fold_refinement_report(const Kernel& kernel, double eps, double p,
                                                      std::span<const int> ks, std::uint64_t n, std::uint64_t seed,
                                                      FoldEstimator estimator) {
  std::vector<FoldRefinementRow> rows;
  for (int K : ks) {
    FoldSpec spec{eps, p, K, n};
    rows.push_back({K, estimate_fold_probability(kernel, spec, derive_seed(seed, static_cast<std::uint64_t>(K)),
                                                 estimator)});
  }
  return rows;
}

std::vector<int> coarse_sites_in_fine(const RegionGraph& coarse, const RegionGraph& fine, int fine_factor) {
  std::vector<int> to_fine(coarse.size());
  for (int i = 0; i < static_cast<int>(coarse.size()); ++i) {
    const LatticeSite s = coarse.site(i);
    to_fine[i] = fine.find({fine_factor * s.a, fine_factor * s.b});
    if (to_fine[i] < 0) throw PreconditionError("coarse site missing from the fine lattice");
  }
  return to_fine;
}

GapReport estimate_sprinkled_gap(const Kernel& kernel, double eps, double R, double p, int fine_factor,
                                 std::uint64_t n, std::uint64_t seed, double rho) {
  if (fine_factor < 4) throw PreconditionError("gap: fine_factor must be >= 4 for the fine mesh to stand in for the continuum");
  if (!(p > 0.0)) throw PreconditionError("gap: p must be positive");
  if (n < 2) throw PreconditionError("gap: n must be >= 2");
  const RegionGraph coarse = crossing_region(eps, R, rho);
  const HalfBox cbox = coarse.box();
  const int nx = cbox.a1 / 2, ny = cbox.b1 / 2;
  const double fine_eps = eps / fine_factor;
  const RegionGraph fine = RegionGraph::rectangle_cells(fine_eps, fine_factor * nx, fine_factor * ny);

  // Coarse site (a, b) is fine site (ff a, ff b); the fine sites strictly
  // inside coarse edge (s, s + d) are ff s + k d for k = 1..ff-1.
  const std::vector<int> to_fine = coarse_sites_in_fine(coarse, fine, fine_factor);
  struct Edge {
    int i, j;
    std::vector<int> interior;
  };
  std::vector<Edge> edges;
  for (int i = 0; i < static_cast<int>(coarse.size()); ++i) {
    const LatticeSite s = coarse.site(i);
    for (int j : coarse.neighbors(i)) {
      if (j < i) continue;
      const LatticeSite t = coarse.site(j);
      const LatticeSite step{t.a - s.a, t.b - s.b};
      Edge e{i, j, {}};
      for (int k = 1; k < fine_factor; ++k) {
        const int f = fine.find({fine_factor * s.a + k * step.a, fine_factor * s.b + k * step.b});
        if (f < 0) throw NumericalError("gap: edge point missing from the fine lattice", 0.0);
        e.interior.push_back(f);
      }
      edges.push_back(std::move(e));
    }
  }

  const ConvolutionSampler sampler(build_lattice_sqrt_kernel(kernel, fine_eps), fine);
  struct Ws {
    ConvolutionSampler::Workspace conv;
    PercolationWorkspace perc;
    std::vector<double> field;
    std::vector<std::uint8_t> fine_colors, coarse_colors;
    UnionFind uf;
  };
  struct Row {
    std::uint8_t coarse = 0, fine = 0, fold_free = 0;
  };
  const int nc = static_cast<int>(coarse.size());
  const auto rows = run_replicates(
      n, [&] { return Ws{sampler.make_workspace(), {}, std::vector<double>(fine.size()), {}, {}, UnionFind()}; },
      [&](Ws& ws, std::uint64_t r) {
        sampler.sample_into(seed, r, ws.conv, ws.field);
        Row row;
        ws.fine_colors = color_sites(ws.field, p);
        row.fine = crossing(fine, ws.fine_colors, fine.box(), Direction::left_right, Color::black, &ws.perc) ? 1 : 0;
        ws.coarse_colors.resize(nc);
        for (int i = 0; i < nc; ++i) ws.coarse_colors[i] = ws.field[to_fine[i]] >= -0.5 * p ? 1 : 0;
        row.coarse =
            crossing(coarse, ws.coarse_colors, cbox, Direction::left_right, Color::black, &ws.perc) ? 1 : 0;
        if (row.coarse) {
          // Coarse crossing using only black edges without a fold.
          ws.uf.reset(coarse.size() + 2);
          const int src = nc, dst = nc + 1;
          for (int i = 0; i < nc; ++i) {
            if (!ws.coarse_colors[i]) continue;
            if (coarse.marks(i) & mark_left) ws.uf.unite(i, src);
            if (coarse.marks(i) & mark_right) ws.uf.unite(i, dst);
          }
          for (const Edge& e : edges) {
            if (!ws.coarse_colors[e.i] || !ws.coarse_colors[e.j]) continue;
            const bool clean = std::all_of(e.interior.begin(), e.interior.end(),
                                           [&](int f) { return ws.field[f] >= -p; });
            if (clean) ws.uf.unite(e.i, e.j);
          }
          row.fold_free = ws.uf.connected(src, dst) ? 1 : 0;
        }
        return row;
      });

  GapReport rep;
  rep.coarse_sites = coarse.size();
  rep.fine_sites = fine.size();
  Accumulator gap, c, f;
  for (const Row& row : rows) {
    gap.add(row.coarse && !row.fine ? 1.0 : 0.0);
    c.add(row.coarse);
    f.add(row.fine);
    if (row.fold_free) {
      ++rep.containment_checked;
      if (!row.fine) ++rep.containment_violations;
    }
  }
  rep.gap = gap.estimate(seed);
  rep.coarse_cross = c.estimate(seed);
  rep.fine_cross = f.estimate(seed);
  return rep;
}

}  // namespace gfperc
