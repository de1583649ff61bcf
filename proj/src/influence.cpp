#include "gfperc/influence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "gfperc/error.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/sampler.hpp"

namespace gfperc {

namespace {

constexpr int kTableLimit = 22;

struct DrawScratch {
  std::vector<double> x, y, g;
  explicit DrawScratch(int n) : x(n), y(n), g(n) {}
};

}  // namespace

// ---- GaussianSpec ---------------------------------------------------------

GaussianSpec::GaussianSpec(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
  const auto n = sigma_.rows();
  if (n == 0 || sigma_.cols() != n) throw PreconditionError("covariance must be a non-empty square matrix");
  const double scale = sigma_.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(sigma_(i, i) > 0.0)) throw PreconditionError("covariance diagonal must be positive");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(sigma_(i, j) - sigma_(j, i)) > 1e-14 * scale) {
        throw PreconditionError("covariance must be symmetric");
      }
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the covariance failed", 0.0);
  Eigen::VectorXd lambda = es.eigenvalues();
  const double top = lambda.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) < -1e-10 * top) throw NumericalError("covariance is not positive semidefinite", lambda(i));
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  sqrt_ = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  sqrt_ = 0.5 * (sqrt_ + sqrt_.transpose()).eval();
}

GaussianSpec GaussianSpec::from_kernel(const Kernel& kernel, std::span<const Vec2> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      s(i, j) = eval_kappa(kernel, {points[i].x - points[j].x, points[i].y - points[j].y});
    }
  }
  return GaussianSpec(std::move(s));
}

GaussianSpec GaussianSpec::identity(int n) { return GaussianSpec(Eigen::MatrixXd::Identity(n, n)); }

double GaussianSpec::sqrt_op_norm() const { return sqrt_.cwiseAbs().rowwise().sum().maxCoeff(); }

double GaussianSpec::sqrt_residual() const { return (sqrt_ * sqrt_ - sigma_).cwiseAbs().maxCoeff(); }

GaussianSpec GaussianSpec::scaled(double lambda) const {
  if (!(lambda > 0.0)) throw PreconditionError("scale must be positive");
  GaussianSpec s;
  s.sigma_ = sigma_ * lambda;
  s.sqrt_ = sqrt_ * std::sqrt(lambda);
  return s;
}

void GaussianSpec::draw(StreamRng& rng, std::span<double> out, std::span<double> scratch) const {
  const int n = dim();
  for (int k = 0; k < n; ++k) scratch[k] = rng.normal();
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += sqrt_(i, k) * scratch[k];
    out[i] = acc;
  }
}

void condition_on_site(std::span<double> x, int i, double q, const GaussianSpec& spec) {
  const auto& s = spec.sigma();
  const double shift = (q - x[i]) / s(i, i);
  for (int k = 0; k < spec.dim(); ++k) x[k] += shift * s(k, i);
  x[i] = q;  // exact, free of rounding in the update
}

// ---- Events ---------------------------------------------------------------

ThresholdEvent::ThresholdEvent(int n, std::function<bool(ColoringMask)> fn, std::string name, bool increasing)
    : n_(n), fn_(std::move(fn)), name_(std::move(name)), increasing_(increasing) {
  if (n < 1 || n > 64) throw PreconditionError("threshold events support 1..64 coordinates");
  if (n <= kTableLimit) {
    table_.resize(std::size_t{1} << n);
    for (std::size_t m = 0; m < table_.size(); ++m) table_[m] = fn_(static_cast<ColoringMask>(m)) ? 1 : 0;
  }
}

ThresholdEvent ThresholdEvent::dictator(int n, int i) {
  if (i < 0 || i >= n) throw PreconditionError("dictator coordinate out of range");
  return ThresholdEvent(n, [i](ColoringMask m) { return ((m >> i) & 1u) != 0; }, "dictator");
}

ThresholdEvent ThresholdEvent::majority(int n) {
  if (n % 2 == 0) throw PreconditionError("majority needs an odd number of coordinates");
  return ThresholdEvent(n, [n](ColoringMask m) { return 2 * std::popcount(m) > n; }, "majority");
}

ThresholdEvent ThresholdEvent::tribes(int n, int width) {
  if (width < 1 || n % width != 0) throw PreconditionError("tribes width must divide n");
  const ColoringMask block = width == 64 ? ~ColoringMask{0} : ((ColoringMask{1} << width) - 1);
  return ThresholdEvent(
      n,
      [n, width, block](ColoringMask m) {
        for (int s = 0; s < n; s += width) {
          if (((m >> s) & block) == block) return true;
        }
        return false;
      },
      "tribes");
}

ThresholdEvent ThresholdEvent::crossing(const RegionGraph& g, bool left_right) {
  if (g.kind() != RegionKind::rectangle || g.size() > 64) {
    throw PreconditionError("crossing event needs a rectangle of at most 64 sites");
  }
  const auto n = static_cast<int>(g.size());
  const Direction dir = left_right ? Direction::left_right : Direction::top_bottom;
  return ThresholdEvent(
      n,
      [graph = std::make_shared<const RegionGraph>(g), n, dir](ColoringMask m) {
        std::vector<std::uint8_t> c(n);
        for (int i = 0; i < n; ++i) c[i] = (m >> i) & 1u;
        return gfperc::crossing(*graph, c, dir, Color::black);
      },
      left_right ? "crossing_lr" : "crossing_tb");
}

ColoringMask coloring_mask(std::span<const double> x, double p) {
  ColoringMask m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= -p) m |= ColoringMask{1} << i;
  }
  return m;
}

// ---- Influences -----------------------------------------------------------

namespace {

struct InfluenceDraw {
  ColoringMask pivotal = 0;  // bit i: coordinate i pivotal under X_i = -p
  std::uint8_t in_event = 0;
};

}  // namespace

InfluenceProfile influences(const ThresholdEvent& event, const GaussianSpec& spec, double p, std::uint64_t n,
                            std::uint64_t seed) {
  const int d = spec.dim();
  if (event.dim() != d) throw PreconditionError("event and covariance dimensions differ");
  if (n < 2) throw PreconditionError("influence estimation needs n >= 2");
  const auto draws = run_replicates(
      n, [d] { return DrawScratch(d); },
      [&](DrawScratch& s, std::uint64_t r) {
        StreamRng rng(seed, r);
        spec.draw(rng, s.x, s.g);
        InfluenceDraw out;
        out.in_event = event(coloring_mask(s.x, p)) ? 1 : 0;
        for (int i = 0; i < d; ++i) {
          std::copy(s.x.begin(), s.x.end(), s.y.begin());
          condition_on_site(s.y, i, -p, spec);
          const ColoringMask bit = ColoringMask{1} << i;
          const ColoringMask m = coloring_mask(s.y, p) & ~bit;
          if (event(m | bit) != event(m)) out.pivotal |= bit;
        }
        return out;
      });
  InfluenceProfile prof;
  std::vector<double> density(d);
  for (int i = 0; i < d; ++i) density[i] = normal_pdf(p, spec.sigma()(i, i));
  std::vector<Accumulator> piv(d);
  Accumulator total, measure;
  for (const InfluenceDraw& dr : draws) {
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
      const double is_piv = ((dr.pivotal >> i) & 1u) != 0 ? 1.0 : 0.0;
      piv[i].add(is_piv);
      sum += is_piv * density[i];
    }
    total.add(sum);
    measure.add(dr.in_event);
  }
  for (int i = 0; i < d; ++i) {
    InfluenceEstimate e;
    e.site = i;
    e.p = p;
    e.pivotal_prob = piv[i].estimate(seed);
    e.density = density[i];
    e.influence = e.pivotal_prob.mean * density[i];
    prof.sites.push_back(e);
  }
  prof.total = total.estimate(seed);
  prof.measure = measure.estimate(seed);
  return prof;
}

InfluenceEstimate influence_of_site(const ThresholdEvent& event, const GaussianSpec& spec, int site, double p,
                                    std::uint64_t n, std::uint64_t seed) {
  const int d = spec.dim();
  if (site < 0 || site >= d) throw PreconditionError("site index out of range");
  if (event.dim() != d) throw PreconditionError("event and covariance dimensions differ");
  const auto piv = run_replicates(
      n, [d] { return DrawScratch(d); },
      [&](DrawScratch& s, std::uint64_t r) -> double {
        StreamRng rng(seed, r);
        spec.draw(rng, s.x, s.g);
        condition_on_site(s.x, site, -p, spec);
        const ColoringMask m = coloring_mask(s.x, p) & ~(ColoringMask{1} << site);
        return event(m | (ColoringMask{1} << site)) != event(m) ? 1.0 : 0.0;
      });
  InfluenceEstimate e;
  e.site = site;
  e.p = p;
  e.pivotal_prob = summarize(piv, seed);
  e.density = normal_pdf(p, spec.sigma()(site, site));
  e.influence = e.pivotal_prob.mean * e.density;
  return e;
}

MCEstimate finite_difference_derivative(const ThresholdEvent& event, const GaussianSpec& spec, double p, double h,
                                        std::uint64_t n, std::uint64_t seed) {
  if (!(h > 0.0)) throw PreconditionError("finite difference step must be positive");
  const int d = spec.dim();
  const auto q = run_replicates(
      n, [d] { return DrawScratch(d); },
      [&](DrawScratch& s, std::uint64_t r) -> double {
        StreamRng rng(seed, r);
        spec.draw(rng, s.x, s.g);
        const double up = event(coloring_mask(s.x, p + h)) ? 1.0 : 0.0;
        const double down = event(coloring_mask(s.x, p - h)) ? 1.0 : 0.0;
        return (up - down) / (2.0 * h);
      });
  return summarize(q, seed);
}

RussoReport russo_check(const ThresholdEvent& event, const GaussianSpec& spec, double p, double h, std::uint64_t n,
                        std::uint64_t seed) {
  RussoReport rep;
  rep.p = p;
  rep.h = h;
  rep.influence_sum = influences(event, spec, p, n, derive_seed(seed, 11)).total;
  rep.finite_difference = finite_difference_derivative(event, spec, p, h, n, derive_seed(seed, 12));
  rep.combined_stderr = std::hypot(rep.influence_sum.std_error, rep.finite_difference.std_error);
  const double diff = rep.influence_sum.mean - rep.finite_difference.mean;
  rep.z_score = rep.combined_stderr > 0.0 ? diff / rep.combined_stderr : (diff == 0.0 ? 0.0 : INFINITY);
  rep.pass = std::abs(diff) <= 3.0 * rep.combined_stderr;
  return rep;
}

double log_plus(double t) { return t > 1.0 ? std::log(t) : 0.0; }

KklReport kkl_check(const ThresholdEvent& event, const GaussianSpec& spec, double p, std::uint64_t n,
                    std::uint64_t seed) {
  const InfluenceProfile prof = influences(event, spec, p, n, seed);
  KklReport rep;
  rep.event = event.name();
  rep.sum_influence = prof.total.mean;
  for (const auto& s : prof.sites) rep.max_influence = std::max(rep.max_influence, s.influence);
  rep.measure = prof.measure.mean;
  rep.op_norm = spec.sqrt_op_norm();
  rep.log_plus = rep.max_influence > 0.0 ? log_plus(1.0 / (rep.op_norm * rep.max_influence)) : INFINITY;
  rep.vacuous = rep.log_plus == 0.0;
  rep.rhs = rep.measure * (1.0 - rep.measure) * std::sqrt(rep.log_plus) / rep.op_norm;
  rep.implied_constant = rep.rhs > 0.0 && std::isfinite(rep.rhs) ? rep.sum_influence / rep.rhs : INFINITY;
  return rep;
}

// ---- Sublinearity ---------------------------------------------------------

namespace {

// Least-squares weights giving the intercept of y = I + c r.
std::vector<double> intercept_weights(std::span<const double> r) {
  const double k = static_cast<double>(r.size());
  const double s1 = std::accumulate(r.begin(), r.end(), 0.0);
  double s2 = 0.0;
  for (double x : r) s2 += x * x;
  const double det = k * s2 - s1 * s1;
  std::vector<double> w;
  for (double x : r) w.push_back(det > 0.0 ? (s2 - x * s1) / det : 1.0 / k);
  return w;
}

}  // namespace

SublinearityReport sublinearity_check(const RealEvent& a, bool increasing, const GaussianSpec& spec,
                                      std::span<const double> v, std::uint64_t n, std::uint64_t seed,
                                      std::vector<double> steps) {
  const int d = spec.dim();
  if (static_cast<int>(v.size()) != d) throw PreconditionError("direction and covariance dimensions differ");
  const bool nonneg = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  const bool nonpos = std::all_of(v.begin(), v.end(), [](double x) { return x <= 0.0; });
  if (!nonneg && !nonpos) throw PreconditionError("direction must be sign-definite");
  if (steps.empty()) throw PreconditionError("at least one enlargement step is required");
  for (double r : steps) {
    if (!(r > 0.0)) throw PreconditionError("enlargement steps must be positive");
  }
  const double sign = increasing ? 1.0 : -1.0;
  const std::vector<double> w = intercept_weights(steps);
  const std::size_t ns = steps.size();

  // Per replicate: raw quotients for v (ns values), then extrapolated
  // quotients for v and for each e_i.
  struct Row {
    std::vector<double> raw;
    double directional = 0.0;
    std::vector<double> coord;
  };
  const auto rows = run_replicates(
      n, [d] { return DrawScratch(d); },
      [&](DrawScratch& s, std::uint64_t r) {
        StreamRng rng(seed, r);
        spec.draw(rng, s.x, s.g);
        const bool base = a(s.x);
        Row row;
        auto quotient = [&](auto&& shift_dir, double step) {
          for (int i = 0; i < d; ++i) s.y[i] = s.x[i] + sign * step * shift_dir(i);
          return ((a(s.y) ? 1.0 : 0.0) - (base ? 1.0 : 0.0)) / step;
        };
        auto along_v = [&](int i) { return std::abs(v[i]); };
        for (std::size_t k = 0; k < ns; ++k) {
          const double q = quotient(along_v, steps[k]);
          row.raw.push_back(q);
          row.directional += w[k] * q;
        }
        row.coord.assign(d, 0.0);
        for (int c = 0; c < d; ++c) {
          auto along_e = [c](int i) { return i == c ? 1.0 : 0.0; };
          for (std::size_t k = 0; k < ns; ++k) row.coord[c] += w[k] * quotient(along_e, steps[k]);
        }
        return row;
      });

  SublinearityReport rep;
  rep.steps = steps;
  std::vector<Accumulator> raw(ns), coord(d);
  Accumulator dir, rhs;
  for (const Row& row : rows) {
    for (std::size_t k = 0; k < ns; ++k) raw[k].add(row.raw[k]);
    dir.add(row.directional);
    double weighted = 0.0;
    for (int c = 0; c < d; ++c) {
      coord[c].add(row.coord[c]);
      weighted += std::abs(v[c]) * row.coord[c];
    }
    rhs.add(weighted);
  }
  for (auto& acc : raw) rep.raw.push_back(acc.estimate(seed));
  for (auto& acc : coord) rep.coordinate.push_back(acc.estimate(seed));
  rep.directional = dir.estimate(seed);
  rep.rhs = rhs.mean();
  rep.rhs_stderr = rhs.stderr_of_mean();
  rep.pass = rep.directional.mean <= rep.rhs + 4.0 * std::hypot(rep.directional.std_error, rep.rhs_stderr);
  return rep;
}

// ---- Conditional monotonicity ---------------------------------------------

ConditionalMonotonicityReport conditional_monotonicity_check(const GaussianSpec& spec,
                                                             const std::function<double(std::span<const double>)>& phi,
                                                             std::span<const double> q_grid, double p,
                                                             std::uint64_t n, std::uint64_t seed) {
  const int d = spec.dim();
  if (d < 2) throw PreconditionError("conditioning needs at least two coordinates");
  for (int i = 1; i < d; ++i) {
    if (spec.sigma()(0, i) < 0.0) throw PreconditionError("covariances with coordinate 0 must be non-negative");
  }
  if (!std::is_sorted(q_grid.begin(), q_grid.end())) throw PreconditionError("q grid must be increasing");
  const std::size_t nq = q_grid.size();
  struct Row {
    std::vector<double> at_q;
    double at_level = 0.0;
    double above = 0.0;
    std::uint8_t above_valid = 0;
  };
  const auto rows = run_replicates(
      n, [d] { return DrawScratch(d); },
      [&](DrawScratch& s, std::uint64_t r) {
        StreamRng rng(seed, r);
        spec.draw(rng, s.x, s.g);
        Row row;
        auto eval_at = [&](double q) {
          std::copy(s.x.begin(), s.x.end(), s.y.begin());
          condition_on_site(s.y, 0, q, spec);
          return phi(std::span<const double>(s.y).subspan(1));
        };
        for (double q : q_grid) row.at_q.push_back(eval_at(q));
        row.at_level = eval_at(-p);
        if (s.x[0] >= -p) {
          row.above = phi(std::span<const double>(s.x).subspan(1));
          row.above_valid = 1;
        }
        return row;
      });
  ConditionalMonotonicityReport rep;
  rep.q.assign(q_grid.begin(), q_grid.end());
  std::vector<Accumulator> acc(nq);
  std::vector<Accumulator> steps(nq > 0 ? nq - 1 : 0);
  Accumulator level, above;
  for (const Row& row : rows) {
    for (std::size_t k = 0; k < nq; ++k) acc[k].add(row.at_q[k]);
    for (std::size_t k = 0; k + 1 < nq; ++k) steps[k].add(row.at_q[k + 1] - row.at_q[k]);
    level.add(row.at_level);
    if (row.above_valid) above.add(row.above);
  }
  for (auto& a : acc) rep.value.push_back(a.estimate(seed));
  // Common random numbers: judge each increment by its own stderr.
  rep.monotone = true;
  for (auto& s : steps) {
    if (s.mean() < -4.0 * s.stderr_of_mean()) rep.monotone = false;
  }
  rep.at_level = level.estimate(seed);
  rep.above_level = above.estimate(seed);
  rep.level_order =
      rep.at_level.mean <= rep.above_level.mean + 4.0 * std::hypot(rep.at_level.std_error, rep.above_level.std_error);
  return rep;
}

// ---- Pivotal decay --------------------------------------------------------

PivotalScan pivotal_decay_scan(const Kernel& kernel, double eps, std::span<const double> radii, double p,
                               std::uint64_t n, std::uint64_t seed) {
  if (!(std::abs(p) <= 8.0)) {
    throw PreconditionError("|p| > 8 makes every site the same color; pivotal probabilities are degenerate");
  }
  if (radii.empty()) throw PreconditionError("radius grid is empty");
  const SqrtKernel sk = build_lattice_sqrt_kernel(kernel, eps);
  PivotalScan scan;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double R = radii[k];
    const RegionGraph g = crossing_region(eps, R, 2.0);
    const HalfBox box = g.box();
    const Vec2 mid{0.25 * eps * (box.a0 + box.a1), 0.25 * eps * (box.b0 + box.b1)};
    int center = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(g.size()); ++i) {
      const Vec2 x = g.position(i);
      const double dist = std::hypot(x.x - mid.x, x.y - mid.y);
      if (dist < best) {
        best = dist;
        center = i;
      }
    }
    std::vector<double> column(g.size());
    const Vec2 xc = g.position(center);
    for (int i = 0; i < static_cast<int>(g.size()); ++i) {
      const Vec2 x = g.position(i);
      column[i] = eval_kappa(kernel, {x.x - xc.x, x.y - xc.y});
    }
    const ConvolutionSampler sampler(sk, g);
    struct Ws {
      ConvolutionSampler::Workspace conv;
      PercolationWorkspace perc;
      std::vector<double> field;
      std::vector<std::uint8_t> colors;
    };
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(k));
    const auto piv = run_replicates(
        n, [&] { return Ws{sampler.make_workspace(), {}, std::vector<double>(g.size()), {}}; },
        [&](Ws& ws, std::uint64_t r) -> double {
          sampler.sample_into(s, r, ws.conv, ws.field);
          const double shift = -p - ws.field[center];
          for (std::size_t i = 0; i < ws.field.size(); ++i) ws.field[i] += shift * column[i];
          ws.colors = color_sites(ws.field, p);
          ws.colors[center] = 1;
          const bool with = crossing(g, ws.colors, box, Direction::left_right, Color::black, &ws.perc);
          if (!with) return 0.0;
          ws.colors[center] = 0;
          return crossing(g, ws.colors, box, Direction::left_right, Color::black, &ws.perc) ? 0.0 : 1.0;
        });
    PivotalRow row;
    row.R = R;
    row.center_site = center;
    row.sites = g.size();
    row.pivotal = summarize(piv, s);
    scan.rows.push_back(row);
  }
  scan.non_increasing = true;
  for (std::size_t k = 1; k < scan.rows.size(); ++k) {
    if (scan.rows[k].pivotal.mean > scan.rows[k - 1].pivotal.mean) scan.non_increasing = false;
  }
  std::vector<double> lx, ly;
  for (const auto& row : scan.rows) {
    if (row.pivotal.mean > 0.0) {
      lx.push_back(std::log(row.R));
      ly.push_back(std::log(row.pivotal.mean));
    }
  }
  scan.loglog_slope = lx.size() >= 2 ? fit_line(lx, ly).slope : std::numeric_limits<double>::quiet_NaN();
  return scan;
}

}  // namespace gfperc
