// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gfperc/harness.hpp"
#include "gfperc/influence.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/sampler.hpp"
#include "gfperc/sprinkling.hpp"
#include "gfperc/sqrt_kernel.hpp"

using namespace gfperc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string est(const MCEstimate& e) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6g+-%.2g", e.mean, e.std_error);
  return buf;
}

// C1. (eta * eta)(m) by an explicit double sum over the stencil.
Outcome sqrt_kernel_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const Kernel bf = Kernel::bargmann_fock();
  double worst = 0.0;
  std::ostringstream d;
  for (double eps : {0.5, 0.25, 0.125}) {
    const SqrtKernel sk = build_sqrt_kernel(bf, eps, SpectralFrame::axis);
    const int M = sk.support_radius;
    double err = 0.0;
    for (int m2 = -20; m2 <= 20; ++m2) {
      for (int m1 = -20; m1 <= 20; ++m1) {
        double s = 0.0;
        for (int k2 = std::max(-M, m2 - M); k2 <= std::min(M, m2 + M); ++k2) {
          for (int k1 = std::max(-M, m1 - M); k1 <= std::min(M, m1 + M); ++k1) {
            s += sk.at(k1, k2) * sk.at(m1 - k1, m2 - k2);
          }
        }
        const double target = std::exp(-0.5 * eps * eps * (m1 * m1 + m2 * m2));
        err = std::max(err, std::abs(s - target));
      }
    }
    worst = std::max(worst, err);
    d << " eps=" << eps << ":M=" << M << ",N=" << sk.grid_order << ",err=" << fmt("%.2e", err);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  d << " time=" << fmt("%.1fs", secs);
  return {worst <= 1e-6 && secs < 30.0, d.str()};
}

// C2.
Outcome norm_diagnostic() {
  const std::vector<double> grid{0.5, 0.25, 0.125, 0.0625};
  const auto rows = op_norm_scan(Kernel::bargmann_fock(), grid);
  const double r0 = rows.front().ratio;
  bool ok = true;
  std::ostringstream d;
  for (const auto& r : rows) {
    ok = ok && r.ratio <= 3.0 * r0;
    d << " eps=" << r.eps << ":sum=" << fmt("%.4g", r.sum_abs) << ",ratio=" << fmt("%.4g", r.ratio);
  }
  d << " (upper bound 3x" << fmt("%.4g", r0) << "; min ratio / r0 = "
    << fmt("%.3g", std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.ratio < b.ratio; })->ratio / r0)
    << ")";
  return {ok, d.str()};
}

// C3. Probe pairs spread over [0, 10]^2, i.e. a 20 x 20 cell window at eps 0.5.
Outcome sampler_fidelity() {
  const std::vector<ProbePair> probes{
      {{0.0, 0.0}, {0.5, 0.0}},  {{0.0, 0.0}, {0.25, 0.25}}, {{2.0, 3.0}, {2.0, 4.0}},  {{5.0, 5.0}, {5.75, 5.25}},
      {{4.5, 7.0}, {6.0, 7.0}},  {{9.5, 0.5}, {10.0, 1.0}},  {{0.5, 9.5}, {1.0, 10.0}}, {{9.0, 9.0}, {10.0, 10.0}},
  };
  const auto rep = cross_validate_samplers(Kernel::bargmann_fock(), 0.5, 10000, 303, probes);
  bool ok = rep.ks_p_value > 0.01 && rep.pass;
  double zmax = 0.0;
  for (const PairCheck& p : rep.pairs) {
    for (const MCEstimate& e : {p.convolution, p.hermite}) {
      const double z = std::abs(e.mean - p.target) / e.std_error;
      zmax = std::max(zmax, z);
      ok = ok && z <= 4.0;
    }
  }
  std::ostringstream d;
  d << " pairs=" << rep.pairs.size() << " max|z| vs kappa=" << fmt("%.2f", zmax)
    << " max|z| conv-hermite=" << fmt("%.2f", rep.max_abs_z) << " KS p=" << fmt("%.3f", rep.ks_p_value);
  return {ok && rep.pairs.size() == 8, d.str()};
}

// C4.
Outcome duality() {
  const RegionGraph small = RegionGraph::rectangle(1.0, 3.0, 2.0);
  std::uint64_t bad = 0;
  PercolationWorkspace ws;
  std::vector<std::uint8_t> c(small.size());
  const std::uint64_t total = 1ull << small.size();
  for (std::uint64_t m = 0; m < total; ++m) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = (m >> i) & 1u;
    const bool b = crossing(small, c, small.box(), Direction::left_right, Color::black, &ws);
    const bool w = crossing(small, c, small.box(), Direction::top_bottom, Color::white, &ws);
    bad += b == w;
  }

  const std::uint64_t n = 100000;
  const RegionGraph g = RegionGraph::rectangle(0.5, 6.0, 4.0);
  const ConvolutionSampler s(build_lattice_sqrt_kernel(Kernel::bargmann_fock(), 0.5), g);
  const auto flags = run_replicates(
      n,
      [&] {
        return std::make_tuple(s.make_workspace(), PercolationWorkspace{}, std::vector<double>(g.size()));
      },
      [&](auto& w, std::uint64_t r) {
        auto& [sw, pw, field] = w;
        s.sample_into(404, r, sw, field);
        const double p = -0.3 + 0.6 * static_cast<double>(r % 7) / 6.0;
        const auto col = color_sites(field, p);
        const bool b = crossing(g, col, g.box(), Direction::left_right, Color::black, &pw);
        const bool wt = crossing(g, col, g.box(), Direction::top_bottom, Color::white, &pw);
        return static_cast<int>(b != wt);
      });
  std::uint64_t sampled_ok = 0;
  for (int f : flags) sampled_ok += f;
  std::ostringstream d;
  d << " exhaustive " << total - bad << "/" << total << " on " << small.size() << " sites; sampled " << sampled_ok
    << "/" << n << " on " << g.size() << " sites";
  return {bad == 0 && sampled_ok == n && small.size() <= 20, d.str()};
}

// C5.
Outcome self_dual_square() {
  bool ok = true;
  std::ostringstream d;
  for (double R : {10.0, 20.0}) {
    const MCEstimate e = estimate_crossing(Kernel::bargmann_fock(), 0.5, R, 1.0, 0.0, 10000, 505 + static_cast<int>(R));
    ok = ok && std::abs(e.mean - 0.5) <= 4.0 * e.std_error;
    d << " R=" << R << ":" << est(e);
  }
  return {ok, d.str()};
}

std::vector<Vec2> positions(const RegionGraph& g) {
  std::vector<Vec2> pts;
  for (int i = 0; i < static_cast<int>(g.size()); ++i) pts.push_back(g.position(i));
  return pts;
}

// C6.
Outcome russo() {
  const RegionGraph g = RegionGraph::rectangle(1.0, 2.0, 1.0);
  const GaussianSpec spec = GaussianSpec::from_kernel(Kernel::bargmann_fock(), positions(g));
  const ThresholdEvent ev = ThresholdEvent::crossing(g);
  bool ok = true;
  std::ostringstream d;
  d << " sites=" << g.size();
  for (double p : {0.0, 0.3}) {
    const RussoReport r = russo_check(ev, spec, p, 0.01, 1000000, 606);
    ok = ok && r.pass;
    d << " p=" << p << ": sum I=" << est(r.influence_sum) << " fd=" << est(r.finite_difference)
      << " z=" << fmt("%.2f", r.z_score);
  }
  return {ok, d.str()};
}

// C7. Six corners of [0, 2] x [0, 1] at eps 1, conditioned at corner 2.
Outcome conditioning() {
  std::vector<Vec2> pts{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}};
  const GaussianSpec spec = GaussianSpec::from_kernel(Kernel::bargmann_fock(), pts);
  const int dim = 6, site = 2;
  const double q = -0.3;
  const Eigen::MatrixXd& S = spec.sigma();
  Eigen::VectorXd mu = S.col(site) * (q / S(site, site));
  const Eigen::MatrixXd schur = S - S.col(site) * S.row(site) / S(site, site);

  const std::uint64_t n = 100000;
  const auto draws = run_replicates(n, no_workspace, [&](NoWorkspace&, std::uint64_t r) {
    StreamRng rng(707, r);
    std::vector<double> x(dim), scratch(dim);
    spec.draw(rng, x, scratch);
    condition_on_site(x, site, q, spec);
    return x;
  });
  double zmax = 0.0;
  bool ok = true;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      Accumulator acc;
      for (const auto& x : draws) acc.add((x[i] - mu[i]) * (x[j] - mu[j]));
      const double diff = std::abs(acc.mean() - schur(i, j));
      const double se = acc.stderr_of_mean();
      if (se == 0.0) {
        ok = ok && diff <= 1e-12;
        continue;
      }
      zmax = std::max(zmax, diff / se);
      ok = ok && diff <= 4.0 * se;
    }
  }
  return {ok, " max|z|=" + fmt("%.2f", zmax) + " over 21 entries"};
}

// C8.
Outcome sharp_threshold() {
  const Kernel bf = Kernel::bargmann_fock();
  const std::vector<double> radii{10, 20, 40};
  const std::vector<double> grid = parse_grid("-0.1:0.1:0.025");
  std::vector<double> slopes, failures;
  std::ostringstream d;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const std::uint64_t seed = derive_seed(808, k);
    const auto levels = sample_crossing_levels(bf, 0.5, radii[k], 2.0, 20000, seed);
    std::vector<MCEstimate> e;
    for (double p : grid) e.push_back(crossing_estimate_from_levels(levels, p, seed));
    const SlopeFit s = logit_slope(logit_curve(grid, e), 0.0, 0.1);
    const MCEstimate f = crossing_estimate_from_levels(levels, 0.5, seed);
    slopes.push_back(s.slope);
    failures.push_back(1.0 - f.mean);
    d << " R=" << radii[k] << ":slope=" << fmt("%.3f", s.slope) << "+-" << fmt("%.2f", s.slope_stderr)
      << ",1-P(0.5)=" << fmt("%.5f", 1.0 - f.mean) << "+-" << fmt("%.1e", f.std_error);
  }
  const bool ok = slopes[0] < slopes[1] && slopes[1] < slopes[2] && failures[0] > failures[1] &&
                  failures[1] > failures[2];
  return {ok, d.str()};
}

// C9.
Outcome pivotal_decay() {
  const std::vector<double> radii{5, 10, 20};
  const PivotalScan scan = pivotal_decay_scan(Kernel::bargmann_fock(), 0.5, radii, 0.0, 40000, 909);
  bool ok = scan.rows.size() == 3;
  std::ostringstream d;
  for (std::size_t i = 0; i < scan.rows.size(); ++i) {
    if (i > 0) ok = ok && scan.rows[i].pivotal.mean <= scan.rows[i - 1].pivotal.mean;
    d << " R=" << scan.rows[i].R << ":" << est(scan.rows[i].pivotal);
  }
  d << " loglog slope=" << fmt("%.3f", scan.loglog_slope);
  return {ok && scan.non_increasing, d.str()};
}

// C10.
Outcome fold_trend() {
  const Kernel bf = Kernel::bargmann_fock();
  const std::vector<double> eps{0.5, 0.35, 0.25};
  std::vector<double> m;
  std::ostringstream d;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const MCEstimate e = estimate_fold_probability(bf, {eps[k], 0.5, 16, 100000}, derive_seed(1010, k));
    m.push_back(e.mean);
    d << " eps=" << eps[k] << ":" << est(e);
  }
  const std::vector<int> ks{4, 16, 64};
  d << " | K refinement at eps=0.5:";
  for (const auto& row : fold_refinement_report(bf, 0.5, 0.5, ks, 20000, 1011)) {
    d << " K=" << row.K << ":" << est(row.estimate);
  }
  return {m[0] > m[1] && m[1] > m[2] && m[2] > 0.0, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

// C11. Each command runs twice with identical arguments apart from the thread
// count, into the same emptied directory; every file written must match byte
// for byte.
Outcome determinism(const std::string& cli, const fs::path& work) {
  const fs::path root = work / "determinism";
  fs::remove_all(root);
  const std::string sweep = (root / "sweep.csv").string();
  // Sweep for `report`, written once outside the compared directories.
  fs::create_directories(root);
  const std::string prep = "\"" + cli + "\" --seed 7 crossing-sweep --R 3,4,6 --p -0.2:0.2:0.1 --n 200 --out \"" +
                           sweep + "\" > /dev/null 2>&1";
  if (std::system(prep.c_str()) != 0) return {false, " could not prepare the report input"};

  const std::vector<std::pair<std::string, std::string>> cmds{
      {"kernel-sqrt", "kernel-sqrt --eps 0.25 --frame lattice --out OUT/k.json"},
      {"kernel-scan", "kernel-sqrt --scan 0.5,0.25 --out OUT/scan.csv"},
      {"sample", "sample --eps 0.25 --rect 3 2 --out OUT/f.bin"},
      {"sample-hermite", "sample --eps 0.25 --rect 2 1 --method hermite --stream 3 --out OUT/h.bin"},
      {"crossing-sweep", "crossing-sweep --R 3,5 --p -0.1:0.1:0.1 --n 300 --out OUT/s.csv"},
      {"influence", "influence --event cross --eps 1 --R 2 --rho 1 --p 0.1 --n 20000 --russo-h 0.05 --out OUT/i.json"},
      {"fold", "fold --eps 0.35 --K 16 --refine 4,8 --n 5000 --out OUT/fold.csv"},
      {"gap", "gap --eps 0.5 --R 3 --n 200 --out OUT/gap.json"},
      {"report", "report --in " + sweep + " --summability-k 1,2 --summability-n 200 --out OUT/r.json"},
      {"lattice-dump", "lattice-dump --eps 1 --annulus 0.5 0.5 0.5 1.5 --out OUT/a.txt"},
  };
  bool ok = true;
  std::ostringstream d;
  int identical = 0;
  for (const auto& [name, args] : cmds) {
    std::vector<std::map<std::string, std::string>> runs;
    bool ran = true;
    for (int k = 0; k < 2; ++k) {
      const fs::path out = root / name;
      fs::remove_all(out);
      fs::create_directories(out);
      std::string a = args;
      for (std::size_t pos; (pos = a.find("OUT")) != std::string::npos;) a.replace(pos, 3, out.string());
      const std::string cmd = "\"" + cli + "\" --seed 11 --threads " + std::to_string(1 + 2 * k) + " --cache-dir \"" +
                              (root / "cache").string() + "\" " + a + " > /dev/null 2>&1";
      ran = ran && std::system(cmd.c_str()) == 0;
      runs.push_back(dir_contents(out));
    }
    const bool same = ran && !runs[0].empty() && runs[0] == runs[1];
    identical += same;
    if (!same) d << " " << name << (ran ? " differs" : " failed");
    ok = ok && same;
  }
  d << " " << identical << "/" << cmds.size() << " commands byte-identical";
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gfperc acceptance"};
  std::string cli, workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the gfperc executable")->required();
  app.add_option("--workdir", workdir);
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"convolution square root", sqrt_kernel_oracle},
      {"norm diagnostic", norm_diagnostic},
      {"sampler fidelity", sampler_fidelity},
      {"duality complementarity", duality},
      {"self-dual square", self_dual_square},
      {"russo identity", russo},
      {"conditioning exactness", conditioning},
      {"sharp-threshold trend", sharp_threshold},
      {"pivotal decay", pivotal_decay},
      {"fold trend", fold_trend},
      {"determinism", [&] { return determinism(cli, workdir); }},
  };
  std::ofstream report(fs::path(workdir) / "acceptance_report.txt");
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string(" error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[k].first << "):" << o.detail << " ["
         << fmt("%.1f", secs) << " s]";
    std::cout << line.str() << std::endl;
    report << line.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
