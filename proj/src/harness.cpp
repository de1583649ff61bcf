#include "gfperc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "gfperc/error.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/rng.hpp"
#include "gfperc/sampler.hpp"

namespace gfperc {

double logit(double q) { return std::log(q / (1.0 - q)); }

LogitCurve logit_curve(std::span<const double> p, std::span<const MCEstimate> estimates) {
  if (p.size() != estimates.size()) throw PreconditionError("logit_curve: grid and estimates differ in length");
  LogitCurve curve;
  for (std::size_t i = 0; i < p.size(); ++i) {
    LogitPoint pt;
    pt.p = p[i];
    pt.estimate = estimates[i];
    const double q = estimates[i].mean;
    if (!(q > 0.0 && q < 1.0)) {
      pt.censored = true;
      pt.g = q <= 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
      ++curve.censored;
    } else {
      pt.g = logit(q);
      pt.g_stderr = estimates[i].std_error / (q * (1.0 - q));
    }
    curve.points.push_back(pt);
  }
  return curve;
}

SlopeFit logit_slope(const LogitCurve& curve, double center, double half_width) {
  std::vector<double> x, y;
  for (const auto& pt : curve.points) {
    if (pt.censored || std::abs(pt.p - center) > half_width + 1e-12) continue;
    x.push_back(pt.p);
    y.push_back(pt.g);
  }
  if (x.size() < 2) throw PreconditionError("logit_slope: fewer than two uncensored points in the window");
  const LineFit f = fit_line(x, y);
  return {f.slope, f.slope_stderr, x.size()};
}

DecayFit decay_fit(std::span<const double> R, std::span<const double> failure,
                   std::span<const double> failure_stderr) {
  if (R.size() != failure.size()) throw PreconditionError("decay_fit: grids differ in length");
  if (!failure_stderr.empty() && failure_stderr.size() != failure.size()) {
    throw PreconditionError("decay_fit: stderr grid differs in length");
  }
  DecayFit out;
  std::vector<double> x, y, sy;
  for (std::size_t i = 0; i < R.size(); ++i) {
    if (failure[i] > 0.0 && failure[i] < 1.0) {
      x.push_back(R[i]);
      y.push_back(std::log(failure[i]));
      if (!failure_stderr.empty()) sy.push_back(failure_stderr[i] / failure[i]);
    } else {
      ++out.censored;
    }
  }
  if (x.size() < 2) throw PreconditionError("decay_fit: fewer than two uncensored failure estimates");
  const LineFit f = fit_line(x, y);
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.slope_stderr = f.slope_stderr;
  if (!sy.empty()) {
    double xbar = 0.0;
    for (double v : x) xbar += v;
    xbar /= static_cast<double>(x.size());
    double sxx = 0.0;
    for (double v : x) sxx += (v - xbar) * (v - xbar);
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) var += std::pow((x[i] - xbar) / sxx * sy[i], 2);
    out.slope_stderr = std::sqrt(var);
  }
  out.used = x.size();
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  out.grid_ratio = std::exp(f.slope * (*hi - *lo));
  out.decaying = f.slope < 0.0 && f.slope + 3.0 * out.slope_stderr < 0.0 && out.grid_ratio <= 0.5;
  return out;
}

SummabilityReport summability_report(const Kernel& kernel, double eps, double p, std::span<const int> ks,
                                     std::uint64_t n, std::uint64_t seed) {
  SummabilityReport rep;
  rep.p = p;
  double partial = 0.0;
  for (int k : ks) {
    if (k < 0) throw PreconditionError("summability: k must be >= 0");
    const double R = std::ldexp(1.0, k);
    // Heights up to 32 / eps, i.e. k <= 6 at eps = 0.5.
    if (R * eps > 32.0 + 1e-9) {
      throw ResourceError("summability: 2^k = " + format_double(R) + " exceeds the cap 32 / eps");
    }
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(k));
    const auto levels = sample_crossing_levels(kernel, eps, R, 2.0, n, s);
    MCEstimate cross = crossing_estimate_from_levels(levels, p, s);
    SummabilityRow row;
    row.k = k;
    row.R = R;
    row.failure = {1.0 - cross.mean, cross.std_error, cross.n, s};
    partial += row.failure.mean;
    row.partial_sum = partial;
    rep.rows.push_back(row);
  }
  rep.decreasing = rep.increasing = rep.rows.size() >= 2;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (!(rep.rows[i].failure.mean < rep.rows[i - 1].failure.mean)) rep.decreasing = false;
    if (!(rep.rows[i].failure.mean > rep.rows[i - 1].failure.mean)) rep.increasing = false;
  }
  return rep;
}

SymmetryCheck symmetry_check(const Kernel& kernel, double eps, double R, double rho, double p, std::uint64_t n,
                             std::uint64_t seed) {
  const RegionGraph g = crossing_region(eps, R, rho);
  const ConvolutionSampler sampler(build_lattice_sqrt_kernel(kernel, eps), g);
  struct Ws {
    ConvolutionSampler::Workspace conv;
    PercolationWorkspace perc;
    std::vector<double> field;
  };
  struct Row {
    std::uint8_t lr = 0, tb = 0;
  };
  const auto rows = run_replicates(
      n, [&] { return Ws{sampler.make_workspace(), {}, std::vector<double>(g.size())}; },
      [&](Ws& ws, std::uint64_t r) {
        sampler.sample_into(seed, r, ws.conv, ws.field);
        Row row;
        row.lr = crossing(g, color_sites(ws.field, p), g.box(), Direction::left_right, Color::black, &ws.perc);
        for (double& v : ws.field) v = -v;
        row.tb = crossing(g, color_sites(ws.field, -p), g.box(), Direction::top_bottom, Color::black, &ws.perc);
        return row;
      });
  SymmetryCheck out;
  Accumulator a, b;
  for (const Row& row : rows) {
    ++out.samples;
    if (row.lr + row.tb != 1) ++out.violations;
    a.add(row.lr);
    b.add(row.tb);
  }
  out.black_lr = a.estimate(seed);
  out.negated_tb = b.estimate(seed);
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw PreconditionError("cannot parse number '" + s + "' in grid '" + text + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw PreconditionError("cannot parse number '" + s + "' in grid '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw PreconditionError("range grid must be start:stop:step, got '" + text + "'");
    const double a = to_double(parts[0]), b = to_double(parts[1]), step = to_double(parts[2]);
    if (!(step > 0.0) || b < a) throw PreconditionError("range grid needs step > 0 and stop >= start");
    const auto count = static_cast<long long>(std::floor((b - a) / step + 1e-9)) + 1;
    if (count > 100000) throw ResourceError("grid has more than 1e5 points");
    for (long long k = 0; k < count; ++k) {
      // Rounded to 12 decimals so that 0.1 + 2 * 0.05 prints as 0.2.
      const double v = a + static_cast<double>(k) * step;
      out.push_back(std::round(v * 1e12) / 1e12);
    }
  } else {
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(to_double(part));
    }
  }
  if (out.empty()) throw PreconditionError("empty grid '" + text + "'");
  return out;
}

void check_work_budget(double site_replicates) {
  if (site_replicates > kMaxSiteReplicates) {
    throw ResourceError("requested work of " + format_double(site_replicates) +
                        " site-replicates exceeds the cap of " + format_double(kMaxSiteReplicates));
  }
}

double ExperimentConfig::eps_for(double R) const {
  if (eps_rule == EpsRule::fixed) return eps;
  if (!(R > std::exp(1.0))) throw PreconditionError("eps rule log(R)^(-1/3) needs R > e");
  return std::pow(std::log(R), -1.0 / 3.0);
}

void ExperimentConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("eps must be positive");
  if (R.empty()) throw PreconditionError("R grid is empty");
  for (double r : R) eps_for(r);
  if (p.empty()) throw PreconditionError("p grid is empty");
  if (n < 100) throw PreconditionError("n must be >= 100 for meaningful standard errors");
  for (double r : R) {
    if (!(r > 0.0)) throw PreconditionError("R values must be positive");
  }
  if (!(rho > 0.0)) throw PreconditionError("rho must be positive");
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["kernel"] = kernel;
  j["eps"] = eps;
  j["eps_rule"] = eps_rule == EpsRule::fixed ? "fixed" : "log_cube_root";
  j["R"] = R;
  j["p"] = p;
  j["rho"] = rho;
  j["n"] = n;
  j["seed"] = seed;
  j["output"] = output;
  return j.dump();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json()); }

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_manifest(const std::filesystem::path& path, const std::string& config_json, const std::string& config_hash,
                    const std::string& results_json, bool record_timing, double wall_seconds) {
  nlohmann::ordered_json j;
  j["format"] = "gfperc-manifest";
  j["version"] = 1;
  j["code_version"] = kCodeVersion;
  j["csv_schema"] = kCsvSchemaVersion;
  j["config"] = nlohmann::ordered_json::parse(config_json);
  j["config_hash"] = config_hash;
  j["results"] = results_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(results_json);
  if (record_timing) j["wall_seconds"] = wall_seconds;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace gfperc
