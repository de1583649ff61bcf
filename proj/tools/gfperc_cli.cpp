#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gfperc/error.hpp"
#include "gfperc/harness.hpp"
#include "gfperc/influence.hpp"
#include "gfperc/kernel.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/rng.hpp"
#include "gfperc/sampler.hpp"
#include "gfperc/sprinkling.hpp"
#include "gfperc/sqrt_kernel.hpp"

using namespace gfperc;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int threads = 0;
  std::string cache_dir;
  bool record_timing = false;
};

// Counts accept scientific notation ("1e6") but must be whole numbers.
std::uint64_t parse_count(const std::string& text, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 1.0) || v != std::floor(v) || v > 1e15) {
    throw PreconditionError(std::string(what) + " must be a positive integer, got '" + text + "'");
  }
  return static_cast<std::uint64_t>(v);
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PreconditionError("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json estimate_json(const MCEstimate& e) {
  return json{{"mean", e.mean}, {"stderr", e.std_error}, {"n", e.n}, {"seed", e.seed_stream}};
}

SqrtBuildOptions build_options(int grid_order, int support_radius) {
  SqrtBuildOptions opt;
  if (grid_order > 0) opt.grid_order = grid_order;
  opt.support_radius = support_radius;
  return opt;
}

// ---------------------------------------------------------------------------

struct KernelSqrtArgs {
  std::string kernel = "bf";
  double eps = 0.0;
  std::string frame = "axis";
  int grid_order = 0;
  int support_radius = 0;
  std::string scan;
  std::string out;
};

void run_kernel_sqrt(const KernelSqrtArgs& a, const Globals& g) {
  const Kernel kernel = Kernel::parse(a.kernel);
  if (!a.scan.empty()) {
    const std::vector<double> grid = parse_grid(a.scan);
    const auto rows = op_norm_scan(kernel, grid);
    std::string csv = "kernel,eps,sum_abs,ratio,support_radius,grid_order,conv_residual\n";
    for (const auto& r : rows) {
      csv += kernel.name() + "," + short_num(r.eps) + "," + format_double(r.sum_abs) + "," + format_double(r.ratio) +
             "," + std::to_string(r.support_radius) + "," + std::to_string(r.grid_order) + "," +
             format_double(r.conv_residual) + "\n";
    }
    write_file(a.out, csv);
    return;
  }
  if (!(a.eps > 0.0)) throw PreconditionError("--eps must be positive (or pass --scan)");
  const SqrtKernel sk = load_or_build_sqrt_kernel(g.cache_dir, kernel, a.eps, parse_frame(a.frame),
                                                  build_options(a.grid_order, a.support_radius));
  save_sqrt_kernel(sk, a.out);
  std::cerr << "kernel-sqrt: M=" << sk.support_radius << " N=" << sk.grid_order << " residual=" << sk.conv_residual
            << " sum|eta|=" << sk.sum_abs << "\n";
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string kernel = "bf";
  double eps = 0.25;
  std::vector<double> rect;
  std::string method = "sqrt";
  std::uint64_t stream = 0;
  std::string out;
};

// Binary field layout (little endian):
//   char[4] "GFPF", u32 version = 1, u32 method (0 sqrt, 1 hermite), u32 name length,
//   f64 mesh, i32 u0, i32 v0, i32 nu, i32 nv, u64 seed, u64 stream, kernel name bytes,
//   then nv rows of nu f64 in rotated index order (u fastest), NaN off the region.
template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

void run_sample(const SampleArgs& a, const Globals& g) {
  if (a.rect.size() != 2) throw PreconditionError("--rect takes width and height");
  const Kernel kernel = Kernel::parse(a.kernel);
  const RegionGraph graph = RegionGraph::rectangle(a.eps, a.rect[0], a.rect[1]);
  FieldSample fs;
  std::uint32_t method = 0;
  if (a.method == "sqrt") {
    const SqrtKernel sk = load_or_build_sqrt_kernel(g.cache_dir, kernel, a.eps, SpectralFrame::lattice);
    fs = sample_sqrt_convolution(sk, graph, g.seed, a.stream);
  } else if (a.method == "hermite") {
    if (kernel.kind() != KernelKind::bargmann_fock) throw PreconditionError("hermite sampler needs the bf kernel");
    std::vector<Vec2> pts(graph.size());
    double radius = 0.0;
    for (int i = 0; i < static_cast<int>(graph.size()); ++i) {
      pts[i] = graph.position(i);
      radius = std::max({radius, std::abs(pts[i].x), std::abs(pts[i].y)});
    }
    fs = sample_hermite_series(hermite_truncation_for_radius(radius), pts, g.seed, a.stream);
    method = 1;
  } else {
    throw PreconditionError("--method must be sqrt or hermite");
  }

  const int nu = graph.u_extent(), nv = graph.v_extent();
  std::vector<double> grid(static_cast<std::size_t>(nu) * nv, std::nan(""));
  for (int i = 0; i < static_cast<int>(graph.size()); ++i) {
    const Z2Index z = graph.index(i);
    grid[static_cast<std::size_t>(z.v - graph.v_min()) * nu + (z.u - graph.u_min())] = fs.values[i];
  }
  const std::string name = kernel.name();
  std::string buf = "GFPF";
  put<std::uint32_t>(buf, 1);
  put<std::uint32_t>(buf, method);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
  put<double>(buf, a.eps);
  put<std::int32_t>(buf, graph.u_min());
  put<std::int32_t>(buf, graph.v_min());
  put<std::int32_t>(buf, nu);
  put<std::int32_t>(buf, nv);
  put<std::uint64_t>(buf, g.seed);
  put<std::uint64_t>(buf, a.stream);
  buf += name;
  for (double v : grid) put<double>(buf, v);
  write_file(a.out, buf);
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string kernel = "bf";
  double eps = 0.5;
  std::string eps_rule = "fixed";
  double rho = 2.0;
  std::string R;
  std::string p;
  std::string n = "2000";
  std::string out;
};

void run_crossing_sweep(const SweepArgs& a, const Globals& g) {
  const Timer timer;
  ExperimentConfig cfg;
  cfg.command = "crossing-sweep";
  cfg.kernel = Kernel::parse(a.kernel).name();
  cfg.eps = a.eps;
  if (a.eps_rule == "log") {
    cfg.eps_rule = EpsRule::log_cube_root;
  } else if (a.eps_rule != "fixed") {
    throw PreconditionError("--eps-rule must be fixed or log");
  }
  cfg.R = parse_grid(a.R);
  cfg.p = parse_grid(a.p);
  cfg.rho = a.rho;
  cfg.n = parse_count(a.n, "--n");
  cfg.seed = g.seed;
  cfg.output = a.out;
  cfg.validate();
  const Kernel kernel = Kernel::parse(cfg.kernel);

  double work = 0.0;
  for (double R : cfg.R) {
    work += static_cast<double>(cfg.n) * static_cast<double>(crossing_region(cfg.eps_for(R), R, cfg.rho).size());
  }
  check_work_budget(work);

  std::string csv = "kernel,eps,R,rho,p,n,mean,stderr,seed\n";
  json fits = json::array();
  for (std::size_t ri = 0; ri < cfg.R.size(); ++ri) {
    const double R = cfg.R[ri];
    const double eps = cfg.eps_for(R);
    const std::uint64_t seed = derive_seed(cfg.seed, ri);
    const auto levels = sample_crossing_levels(kernel, eps, R, cfg.rho, cfg.n, seed);
    std::vector<MCEstimate> est;
    for (double p : cfg.p) {
      const MCEstimate e = crossing_estimate_from_levels(levels, p, seed);
      est.push_back(e);
      csv += cfg.kernel + "," + short_num(eps) + "," + short_num(R) + "," + short_num(cfg.rho) + "," + short_num(p) +
             "," + std::to_string(e.n) + "," + format_double(e.mean) + "," + format_double(e.std_error) + "," +
             std::to_string(seed) + "\n";
    }
    const LogitCurve curve = logit_curve(cfg.p, est);
    json fit{{"R", R}, {"eps", eps}, {"censored", curve.censored}};
    try {
      const SlopeFit s = logit_slope(curve);
      fit["slope_at_0"] = s.slope;
      fit["slope_stderr"] = s.slope_stderr;
    } catch (const PreconditionError&) {
      fit["slope_at_0"] = nullptr;
    }
    fits.push_back(fit);
  }
  write_file(a.out, csv);
  write_manifest(manifest_path(a.out), cfg.to_json(), cfg.hash(), json{{"logit_fits", fits}}.dump(),
                 g.record_timing, timer.seconds());
}

// ---------------------------------------------------------------------------

struct InfluenceArgs {
  std::string event = "cross";
  std::string kernel = "bf";
  double eps = 1.0;
  double R = 3.0;
  double rho = 1.0;
  int dim = 5;
  double p = 0.0;
  std::string n = "100000";
  double russo_h = 0.0;
  std::string out;
};

void run_influence(const InfluenceArgs& a, const Globals& g) {
  const Timer timer;
  const Kernel kernel = Kernel::parse(a.kernel);
  const std::uint64_t n = parse_count(a.n, "--n");
  std::vector<Vec2> pts;
  std::optional<ThresholdEvent> event;
  if (a.event == "cross") {
    const RegionGraph graph = crossing_region(a.eps, a.R, a.rho);
    if (graph.size() > 64) throw ResourceError("crossing event has more than 64 sites; reduce --R or raise --eps");
    for (int i = 0; i < static_cast<int>(graph.size()); ++i) pts.push_back(graph.position(i));
    event = ThresholdEvent::crossing(graph);
  } else {
    if (a.dim < 1 || a.dim > 64) throw PreconditionError("--dim must be in [1, 64]");
    for (int i = 0; i < a.dim; ++i) pts.push_back({a.eps * i, 0.0});
    if (a.event == "majority") {
      event = ThresholdEvent::majority(a.dim);
    } else if (a.event == "dictator") {
      event = ThresholdEvent::dictator(a.dim, 0);
    } else if (a.event == "tribes") {
      event = ThresholdEvent::tribes(a.dim, std::max(1, static_cast<int>(std::lround(std::sqrt(a.dim)))));
    } else {
      throw PreconditionError("--event must be cross, majority, dictator or tribes");
    }
  }
  check_work_budget(static_cast<double>(n) * static_cast<double>(pts.size() * pts.size()));
  const GaussianSpec spec = GaussianSpec::from_kernel(kernel, pts);
  const InfluenceProfile prof = influences(*event, spec, a.p, n, g.seed);

  json sites = json::array();
  for (std::size_t i = 0; i < prof.sites.size(); ++i) {
    const auto& s = prof.sites[i];
    sites.push_back(json{{"site", i},
                         {"x", pts[i].x},
                         {"y", pts[i].y},
                         {"pivotal", estimate_json(s.pivotal_prob)},
                         {"density", s.density},
                         {"influence", s.influence}});
  }
  const KklReport kkl = kkl_check(*event, spec, a.p, n, g.seed);
  json doc{{"event", event->name()},
           {"kernel", kernel.name()},
           {"eps", a.eps},
           {"p", a.p},
           {"n", n},
           {"seed", g.seed},
           {"dim", spec.dim()},
           {"measure", estimate_json(prof.measure)},
           {"total_influence", estimate_json(prof.total)},
           {"sites", sites},
           {"kkl",
            {{"sum_influence", kkl.sum_influence},
             {"max_influence", kkl.max_influence},
             {"op_norm", kkl.op_norm},
             {"log_plus", kkl.log_plus},
             {"rhs", kkl.rhs},
             {"implied_constant", kkl.implied_constant},
             {"vacuous", kkl.vacuous}}}};
  if (a.russo_h > 0.0) {
    const RussoReport r = russo_check(*event, spec, a.p, a.russo_h, n, g.seed);
    doc["russo"] = {{"h", r.h},
                    {"influence_sum", estimate_json(r.influence_sum)},
                    {"finite_difference", estimate_json(r.finite_difference)},
                    {"z_score", r.z_score},
                    {"pass", r.pass}};
  }
  write_file(a.out, doc.dump(2) + "\n");
  if (g.record_timing) std::cerr << "influence: " << timer.seconds() << " s\n";
}

// ---------------------------------------------------------------------------

struct FoldArgs {
  std::string kernel = "bf";
  double eps = 0.35;
  double p = 0.5;
  int K = 16;
  std::string refine;
  std::string estimator = "importance";
  std::string n = "100000";
  std::string out;
};

void run_fold(const FoldArgs& a, const Globals& g) {
  const Kernel kernel = Kernel::parse(a.kernel);
  FoldEstimator est;
  if (a.estimator == "importance") {
    est = FoldEstimator::importance;
  } else if (a.estimator == "plain") {
    est = FoldEstimator::plain;
  } else {
    throw PreconditionError("--estimator must be importance or plain");
  }
  const std::uint64_t n = parse_count(a.n, "--n");
  std::vector<int> ks{a.K};
  if (!a.refine.empty()) {
    for (double k : parse_grid(a.refine)) {
      if (k != std::floor(k)) throw PreconditionError("--refine values must be integers");
      if (static_cast<int>(k) != a.K) ks.push_back(static_cast<int>(k));
    }
  }
  for (int k : ks) {
    if (k > 512) throw ResourceError("K above 512 is not supported");
  }
  const auto rows = fold_refinement_report(kernel, a.eps, a.p, ks, n, g.seed, est);
  std::string csv = "kernel,eps,p,K,n,estimator,mean,stderr,seed\n";
  for (const auto& r : rows) {
    csv += kernel.name() + "," + short_num(a.eps) + "," + short_num(a.p) + "," + std::to_string(r.K) + "," +
           std::to_string(r.estimate.n) + "," + a.estimator + "," + format_double(r.estimate.mean) + "," +
           format_double(r.estimate.std_error) + "," + std::to_string(r.estimate.seed_stream) + "\n";
  }
  write_file(a.out, csv);
}

// ---------------------------------------------------------------------------

struct GapArgs {
  std::string kernel = "bf";
  double eps = 0.5;
  double R = 4.0;
  double rho = 2.0;
  double p = 0.5;
  int fine_factor = 4;
  std::string n = "1000";
  std::string out;
};

void run_gap(const GapArgs& a, const Globals& g) {
  const Kernel kernel = Kernel::parse(a.kernel);
  const std::uint64_t n = parse_count(a.n, "--n");
  const RegionGraph coarse = crossing_region(a.eps, a.R, a.rho);
  check_work_budget(static_cast<double>(n) * static_cast<double>(coarse.size()) * a.fine_factor * a.fine_factor);
  const GapReport r = estimate_sprinkled_gap(kernel, a.eps, a.R, a.p, a.fine_factor, n, g.seed, a.rho);
  const json doc{{"kernel", kernel.name()},
                 {"eps", a.eps},
                 {"R", a.R},
                 {"rho", a.rho},
                 {"p", a.p},
                 {"fine_factor", a.fine_factor},
                 {"n", n},
                 {"seed", g.seed},
                 {"coarse_sites", r.coarse_sites},
                 {"fine_sites", r.fine_sites},
                 {"gap", estimate_json(r.gap)},
                 {"coarse_cross", estimate_json(r.coarse_cross)},
                 {"fine_cross", estimate_json(r.fine_cross)},
                 {"containment_checked", r.containment_checked},
                 {"containment_violations", r.containment_violations}};
  write_file(a.out, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string in;
  double decay_p = 0.5;
  double slope_window = 0.1;
  std::string summability_k;
  double summability_p = 1.0;
  double summability_eps = 0.5;
  std::string summability_n = "1000";
  std::string kernel = "bf";
  std::string out;
};

struct SweepRow {
  std::string kernel;
  double eps, R, rho, p;
  MCEstimate est;
};

std::vector<SweepRow> read_sweep(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "kernel,eps,R,rho,p,n,mean,stderr,seed") {
    throw PreconditionError("'" + path + "' is not a crossing-sweep CSV");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw PreconditionError("malformed sweep row: " + line);
    SweepRow r;
    r.kernel = f[0];
    r.eps = std::stod(f[1]);
    r.R = std::stod(f[2]);
    r.rho = std::stod(f[3]);
    r.p = std::stod(f[4]);
    r.est = {std::stod(f[6]), std::stod(f[7]), std::stoull(f[5]), std::stoull(f[8])};
    rows.push_back(r);
  }
  return rows;
}

void run_report(const ReportArgs& a, const Globals& g) {
  json doc{{"code_version", kCodeVersion}};
  if (!a.in.empty()) {
    const auto rows = read_sweep(a.in);
    std::map<double, std::vector<SweepRow>> by_R;
    for (const auto& r : rows) by_R[r.R].push_back(r);
    json curves = json::array();
    std::vector<double> decay_R, decay_fail, decay_se;
    for (const auto& [R, group] : by_R) {
      std::vector<double> ps;
      std::vector<MCEstimate> est;
      for (const auto& r : group) {
        ps.push_back(r.p);
        est.push_back(r.est);
        if (std::abs(r.p - a.decay_p) < 1e-9) {
          decay_R.push_back(R);
          decay_fail.push_back(1.0 - r.est.mean);
          decay_se.push_back(r.est.std_error);
        }
      }
      const LogitCurve curve = logit_curve(ps, est);
      json pts = json::array();
      for (const auto& pt : curve.points) {
        json j{{"p", pt.p}, {"P", pt.estimate.mean}, {"censored", pt.censored}};
        if (!pt.censored) {
          j["g"] = pt.g;
          j["g_stderr"] = pt.g_stderr;
        }
        pts.push_back(j);
      }
      json c{{"R", R}, {"eps", group.front().eps}, {"censored", curve.censored}, {"points", pts}};
      try {
        const SlopeFit s = logit_slope(curve, 0.0, a.slope_window);
        c["slope_at_0"] = s.slope;
        c["slope_stderr"] = s.slope_stderr;
      } catch (const PreconditionError&) {
        c["slope_at_0"] = nullptr;
      }
      curves.push_back(c);
    }
    doc["logit_curves"] = curves;
    json decay{{"p", a.decay_p}};
    try {
      const DecayFit f = decay_fit(decay_R, decay_fail, decay_se);
      decay["slope"] = f.slope;
      decay["slope_stderr"] = f.slope_stderr;
      decay["intercept"] = f.intercept;
      decay["censored"] = f.censored;
      decay["grid_ratio"] = f.grid_ratio;
      decay["decaying"] = f.decaying;
    } catch (const PreconditionError& e) {
      decay["rejected"] = e.what();
    }
    doc["decay_fit"] = decay;
  }
  if (!a.summability_k.empty()) {
    std::vector<int> ks;
    for (double k : parse_grid(a.summability_k)) ks.push_back(static_cast<int>(k));
    const std::uint64_t n = parse_count(a.summability_n, "--summability-n");
    const SummabilityReport s =
        summability_report(Kernel::parse(a.kernel), a.summability_eps, a.summability_p, ks, n, g.seed);
    json rows = json::array();
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      const auto& r = s.rows[i];
      json j{{"k", r.k}, {"R", r.R}, {"failure", estimate_json(r.failure)}, {"partial_sum", r.partial_sum}};
      // Both sides of a_{k+1} <= 49 a_k^2, reported only.
      if (i + 1 < s.rows.size() && s.rows[i + 1].k == r.k + 1) {
        j["next_failure"] = s.rows[i + 1].failure.mean;
        j["recursion_bound"] = 49.0 * r.failure.mean * r.failure.mean;
      }
      rows.push_back(j);
    }
    doc["summability"] = {{"p", s.p}, {"eps", a.summability_eps}, {"rows", rows}, {"decreasing", s.decreasing},
                          {"increasing", s.increasing}};
  }
  if (doc.size() == 1) throw PreconditionError("report needs --in and/or --summability-k");
  write_file(a.out, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct DumpArgs {
  double eps = 1.0;
  std::vector<double> rect;
  std::vector<double> annulus;
  std::string out;
};

void run_lattice_dump(const DumpArgs& a) {
  if (a.rect.empty() == a.annulus.empty()) throw PreconditionError("pass exactly one of --rect or --annulus");
  const RegionGraph g = a.rect.empty()
                            ? RegionGraph::annulus(a.eps, {a.annulus[0], a.annulus[1]}, a.annulus[2], a.annulus[3])
                            : RegionGraph::rectangle(a.eps, a.rect[0], a.rect[1]);
  write_file(a.out, g.dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Excursion-set percolation of planar Gaussian fields"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)");
  app.add_option("--cache-dir", g.cache_dir, "Directory for square-root kernel tables");
  app.add_flag("--record-timing", g.record_timing, "Store wall time in run manifests");

  KernelSqrtArgs ks;
  auto* c_ks = app.add_subcommand("kernel-sqrt", "Build the convolution square root of a kernel");
  c_ks->add_option("--kernel", ks.kernel)->capture_default_str();
  c_ks->add_option("--eps", ks.eps, "Mesh");
  c_ks->add_option("--frame", ks.frame, "axis or lattice")->capture_default_str();
  c_ks->add_option("--grid-order", ks.grid_order, "Quadrature order N (0 = automatic)");
  c_ks->add_option("--support-radius", ks.support_radius, "Support radius M (0 = automatic)");
  c_ks->add_option("--scan", ks.scan, "Eps grid; writes the norm diagnostic CSV instead");
  c_ks->add_option("--out", ks.out)->required();

  SampleArgs sa;
  auto* c_sa = app.add_subcommand("sample", "Draw one field on a rectangle");
  c_sa->add_option("--kernel", sa.kernel)->capture_default_str();
  c_sa->add_option("--eps", sa.eps)->capture_default_str();
  c_sa->add_option("--rect", sa.rect, "Width and height")->expected(2)->required();
  c_sa->add_option("--method", sa.method, "sqrt or hermite")->capture_default_str();
  c_sa->add_option("--stream", sa.stream, "Replicate stream")->capture_default_str();
  c_sa->add_option("--out", sa.out)->required();

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("crossing-sweep", "Left-right crossing probabilities over R and p grids");
  c_sw->add_option("--kernel", sw.kernel)->capture_default_str();
  c_sw->add_option("--eps", sw.eps)->capture_default_str();
  c_sw->add_option("--eps-rule", sw.eps_rule, "fixed or log (eps = log(R)^(-1/3))")->capture_default_str();
  c_sw->add_option("--rho", sw.rho, "Aspect ratio")->capture_default_str();
  c_sw->add_option("--R", sw.R, "Heights, list or a:b:step")->required();
  c_sw->add_option("--p", sw.p, "Levels, list or a:b:step")->required();
  c_sw->add_option("--n", sw.n)->capture_default_str();
  c_sw->add_option("--out", sw.out)->required();

  InfluenceArgs in;
  auto* c_in = app.add_subcommand("influence", "Influences of a threshold event");
  c_in->add_option("--event", in.event, "cross, majority, dictator or tribes")->capture_default_str();
  c_in->add_option("--kernel", in.kernel)->capture_default_str();
  c_in->add_option("--eps", in.eps)->capture_default_str();
  c_in->add_option("--R", in.R, "Crossing region height")->capture_default_str();
  c_in->add_option("--rho", in.rho, "Crossing region aspect")->capture_default_str();
  c_in->add_option("--dim", in.dim, "Points for non-crossing events")->capture_default_str();
  c_in->add_option("--p", in.p)->capture_default_str();
  c_in->add_option("--n", in.n)->capture_default_str();
  c_in->add_option("--russo-h", in.russo_h, "Also compare against a finite difference with this step");
  c_in->add_option("--out", in.out)->required();

  FoldArgs fo;
  auto* c_fo = app.add_subcommand("fold", "Probability of a fold on one lattice edge");
  c_fo->add_option("--kernel", fo.kernel)->capture_default_str();
  c_fo->add_option("--eps", fo.eps)->capture_default_str();
  c_fo->add_option("--p", fo.p)->capture_default_str();
  c_fo->add_option("--K", fo.K, "Interior points")->capture_default_str();
  c_fo->add_option("--refine", fo.refine, "Extra K values for the refinement report");
  c_fo->add_option("--estimator", fo.estimator, "importance or plain")->capture_default_str();
  c_fo->add_option("--n", fo.n)->capture_default_str();
  c_fo->add_option("--out", fo.out)->required();

  GapArgs ga;
  auto* c_ga = app.add_subcommand("gap", "Coarse-versus-fine crossing gap");
  c_ga->add_option("--kernel", ga.kernel)->capture_default_str();
  c_ga->add_option("--eps", ga.eps)->capture_default_str();
  c_ga->add_option("--R", ga.R)->capture_default_str();
  c_ga->add_option("--rho", ga.rho)->capture_default_str();
  c_ga->add_option("--p", ga.p)->capture_default_str();
  c_ga->add_option("--fine-factor", ga.fine_factor)->capture_default_str();
  c_ga->add_option("--n", ga.n)->capture_default_str();
  c_ga->add_option("--out", ga.out)->required();

  ReportArgs re;
  auto* c_re = app.add_subcommand("report", "Logit curves, decay fit and summability from sweeps");
  c_re->add_option("--in", re.in, "crossing-sweep CSV");
  c_re->add_option("--decay-p", re.decay_p)->capture_default_str();
  c_re->add_option("--slope-window", re.slope_window)->capture_default_str();
  c_re->add_option("--summability-k", re.summability_k, "k grid; runs Cross(2^(k+1), 2^k)");
  c_re->add_option("--summability-p", re.summability_p)->capture_default_str();
  c_re->add_option("--summability-eps", re.summability_eps)->capture_default_str();
  c_re->add_option("--summability-n", re.summability_n)->capture_default_str();
  c_re->add_option("--kernel", re.kernel)->capture_default_str();
  c_re->add_option("--out", re.out)->required();

  DumpArgs du;
  auto* c_du = app.add_subcommand("lattice-dump", "Write sites, marks and edges of a region");
  c_du->add_option("--eps", du.eps)->capture_default_str();
  c_du->add_option("--rect", du.rect, "Width and height")->expected(2);
  c_du->add_option("--annulus", du.annulus, "cx cy r1 r2")->expected(4);
  c_du->add_option("--out", du.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (g.threads < 0) throw PreconditionError("--threads must be >= 0");
    if (g.threads > 0) set_thread_count(g.threads);
    if (*c_ks) run_kernel_sqrt(ks, g);
    if (*c_sa) run_sample(sa, g);
    if (*c_sw) run_crossing_sweep(sw, g);
    if (*c_in) run_influence(in, g);
    if (*c_fo) run_fold(fo, g);
    if (*c_ga) run_gap(ga, g);
    if (*c_re) run_report(re, g);
    if (*c_du) run_lattice_dump(du);
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
