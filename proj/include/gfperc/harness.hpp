#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gfperc/kernel.hpp"
#include "gfperc/stats.hpp"

namespace gfperc {

inline constexpr const char* kCodeVersion = "gfperc 0.1.0";
inline constexpr int kCsvSchemaVersion = 1;

double logit(double q);

struct LogitPoint {
  double p = 0.0;
  MCEstimate estimate;
  double g = 0.0;
  double g_stderr = 0.0;  // delta method: stderr / (P (1 - P))
  bool censored = false;  // P in {0, 1}
};

struct LogitCurve {
  std::vector<LogitPoint> points;
  std::size_t censored = 0;
};

/// g(p) = log(P / (1 - P)) per point; points with P outside (0, 1) are
/// flagged and counted.
LogitCurve logit_curve(std::span<const double> p, std::span<const MCEstimate> estimates);

struct SlopeFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
  std::size_t used = 0;
};
/// Least-squares slope of g over uncensored points with |p - center| <= half_width.
SlopeFit logit_slope(const LogitCurve& curve, double center = 0.0, double half_width = 0.1);

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t used = 0;
  std::size_t censored = 0;
  double grid_ratio = 1.0;  // fitted failure(R_max) / failure(R_min)
  /// slope < 0, slope + 3 stderr < 0 and grid_ratio <= 1/2; otherwise the
  /// failure probability is not seen to tend to 0 and the fit is rejected.
  bool decaying = false;
};
/// Least squares of log(failure) against R. With failure_stderr the slope
/// stderr is propagated from the Monte Carlo errors (delta method), else it
/// comes from the residuals. Throws PreconditionError when fewer than two
/// failures are strictly inside (0, 1).
DecayFit decay_fit(std::span<const double> R, std::span<const double> failure,
                   std::span<const double> failure_stderr = {});

struct SummabilityRow {
  int k = 0;
  double R = 0.0;  // 2^k
  MCEstimate failure;  // 1 - P[Cross_p(2^{k+1}, 2^k)]
  double partial_sum = 0.0;
};
struct SummabilityReport {
  double p = 0.0;
  std::vector<SummabilityRow> rows;
  bool decreasing = false;
  bool increasing = false;
};
/// Throws ResourceError when 2^k > 32 / eps.
SummabilityReport summability_report(const Kernel& kernel, double eps, double p, std::span<const int> ks,
                                     std::uint64_t n, std::uint64_t seed);

struct SymmetryCheck {
  std::uint64_t samples = 0;
  std::uint64_t violations = 0;
  MCEstimate black_lr;      // P_p[black LR crossing of f]
  MCEstimate negated_tb;    // P_{-p}[black TB crossing of -f]
};
/// Per shared sample: 1{black LR of f at p} + 1{black TB of -f at -p} = 1
/// (negation maps the second to a white TB crossing of f, the dual event).
SymmetryCheck symmetry_check(const Kernel& kernel, double eps, double R, double rho, double p, std::uint64_t n,
                             std::uint64_t seed);

/// "a:b:s" inclusive grid or comma list.
std::vector<double> parse_grid(const std::string& text);

/// Upper bound on replicates x sites for one command.
inline constexpr double kMaxSiteReplicates = 5e11;
/// Throws ResourceError when site_replicates exceeds kMaxSiteReplicates.
void check_work_budget(double site_replicates);

enum class EpsRule {
  fixed,
  log_cube_root,  // eps(R) = log(R)^(-1/3)
};

struct ExperimentConfig {
  std::string command;
  std::string kernel = "bf";
  double eps = 0.5;
  EpsRule eps_rule = EpsRule::fixed;
  std::vector<double> R;
  std::vector<double> p;
  double rho = 2.0;
  std::uint64_t n = 1000;
  std::uint64_t seed = 1;
  std::string output;

  /// Grids non-empty, n >= 100, eps > 0. Throws PreconditionError.
  void validate() const;
  double eps_for(double R) const;
  std::string to_json() const;
  /// FNV-1a of to_json(), as 16 hex digits.
  std::string hash() const;
};

/// Run manifest beside an output file. Wall time is included only when
/// record_timing is set, so reruns are byte-identical by default.
void write_manifest(const std::filesystem::path& path, const std::string& config_json, const std::string& config_hash,
                    const std::string& results_json, bool record_timing, double wall_seconds);

std::string fnv1a_hex(const std::string& text);
std::string format_double(double v);

}  // namespace gfperc
