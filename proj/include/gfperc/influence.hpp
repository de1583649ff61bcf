#pragma once

// Influences of threshold events under a correlated Gaussian vector.
//
// For X ~ N(0, Sigma) on R^n and an increasing event B on colorings
// omega_i = 1{X_i >= -p}, the influence of coordinate i is
//
//     I_i = P[Piv_i(B) | X_i = -p] * phi_{Sigma_ii}(p),
//
// and d/dp P[omega in B] = sum_i I_i. Conditioning on X_i = q is exact:
// X' = X + (q - X_i) Sigma(., i) / Sigma_ii.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gfperc/kernel.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/rng.hpp"
#include "gfperc/stats.hpp"

namespace gfperc {

class GaussianSpec {
 public:
  /// Throws PreconditionError unless Sigma is symmetric with positive
  /// diagonal. The symmetric square root is computed by eigendecomposition;
  /// eigenvalues below -1e-10 * max |lambda| are an error, smaller negative
  /// ones are clamped to 0.
  explicit GaussianSpec(Eigen::MatrixXd sigma);
  /// Covariance kappa(x_i - x_j) at the given points.
  static GaussianSpec from_kernel(const Kernel& kernel, std::span<const Vec2> points);
  static GaussianSpec identity(int n);

  int dim() const { return static_cast<int>(sigma_.rows()); }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& sqrt_sigma() const { return sqrt_; }
  /// Max over rows of sum_j |sqrt(Sigma)_ij|.
  double sqrt_op_norm() const;
  /// max |sqrt(Sigma)^2 - Sigma|.
  double sqrt_residual() const;
  /// Sigma * lambda, with the square root scaled by sqrt(lambda).
  GaussianSpec scaled(double lambda) const;

  /// X = sqrt(Sigma) G with G iid N(0,1) drawn from rng.
  void draw(StreamRng& rng, std::span<double> out, std::span<double> scratch) const;

 private:
  GaussianSpec() = default;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd sqrt_;
};

/// Replaces x by the exact conditional draw given X_i = q.
void condition_on_site(std::span<double> x, int i, double q, const GaussianSpec& spec);

/// Bit i of the mask is omega_i.
using ColoringMask = std::uint64_t;

/// A Boolean function of colorings of at most 64 sites, tabulated when the
/// dimension is small.
class ThresholdEvent {
 public:
  ThresholdEvent(int n, std::function<bool(ColoringMask)> fn, std::string name, bool increasing = true);
  bool operator()(ColoringMask mask) const {
    return table_.empty() ? fn_(mask) : table_[static_cast<std::size_t>(mask)] != 0;
  }
  int dim() const { return n_; }
  const std::string& name() const { return name_; }
  bool increasing() const { return increasing_; }

  static ThresholdEvent dictator(int n, int i);
  static ThresholdEvent majority(int n);
  /// Disjoint blocks of `width` coordinates; true if some block is all black.
  static ThresholdEvent tribes(int n, int width);
  /// Black crossing of a rectangle region graph (size <= 64).
  static ThresholdEvent crossing(const RegionGraph& g, bool left_right = true);

 private:
  int n_;
  std::function<bool(ColoringMask)> fn_;
  std::string name_;
  bool increasing_;
  std::vector<std::uint8_t> table_;
};

ColoringMask coloring_mask(std::span<const double> x, double p);

struct InfluenceEstimate {
  int site = 0;
  double p = 0.0;
  MCEstimate pivotal_prob;
  double density = 0.0;  // phi_{Sigma_ii}(p)
  double influence = 0.0;
};

struct InfluenceProfile {
  std::vector<InfluenceEstimate> sites;
  MCEstimate total;  // sum_i I_i with stderr from the per-replicate sum
  MCEstimate measure;  // P[omega^p in B] from the unconditioned draws
};

/// All coordinates from the same n base draws (replicate r: stream r of seed).
InfluenceProfile influences(const ThresholdEvent& event, const GaussianSpec& spec, double p, std::uint64_t n,
                            std::uint64_t seed);
InfluenceEstimate influence_of_site(const ThresholdEvent& event, const GaussianSpec& spec, int site, double p,
                                    std::uint64_t n, std::uint64_t seed);

/// Central difference (P(p + h) - P(p - h)) / 2h with common random numbers.
MCEstimate finite_difference_derivative(const ThresholdEvent& event, const GaussianSpec& spec, double p, double h,
                                        std::uint64_t n, std::uint64_t seed);

struct RussoReport {
  double p = 0.0;
  double h = 0.0;
  MCEstimate influence_sum;
  MCEstimate finite_difference;
  double combined_stderr = 0.0;
  double z_score = 0.0;
  bool pass = false;  // |difference| <= 3 combined stderr
};
RussoReport russo_check(const ThresholdEvent& event, const GaussianSpec& spec, double p, double h, std::uint64_t n,
                        std::uint64_t seed);

struct KklReport {
  std::string event;
  double sum_influence = 0.0;
  double max_influence = 0.0;
  double measure = 0.0;
  double op_norm = 0.0;
  double log_plus = 0.0;
  double rhs = 0.0;  // bound without the absolute constant
  double implied_constant = 0.0;  // sum_influence / rhs
  bool vacuous = false;  // log_+ factor is 0
};
/// log_+(t) = max(log t, 0).
double log_plus(double t);
KklReport kkl_check(const ThresholdEvent& event, const GaussianSpec& spec, double p, std::uint64_t n,
                    std::uint64_t seed);

using RealEvent = std::function<bool(std::span<const double>)>;

struct SublinearityReport {
  std::vector<double> steps;
  std::vector<MCEstimate> raw;  // enlargement quotients per step
  MCEstimate directional;  // extrapolated to r = 0
  std::vector<MCEstimate> coordinate;  // extrapolated I_i
  double rhs = 0.0;  // sum_i |v_i| I_i
  double rhs_stderr = 0.0;
  bool pass = false;  // directional <= rhs + 4 joint stderr
};
/// Minkowski-enlargement influence in direction v of a monotone set A. v must
/// be sign-definite; for increasing A the enlargement by [-r, r] v is
/// {x : x + r |v| in A}. The quotient (mu(A_r) - mu(A)) / r is fitted as
/// I + c r over the steps and extrapolated per sample.
SublinearityReport sublinearity_check(const RealEvent& a, bool increasing, const GaussianSpec& spec,
                                      std::span<const double> v, std::uint64_t n, std::uint64_t seed,
                                      std::vector<double> steps = {0.05, 0.02, 0.01});

struct ConditionalMonotonicityReport {
  std::vector<double> q;
  std::vector<MCEstimate> value;  // E[phi(X) | X_0 = q]
  bool monotone = false;  // each step >= previous - 4 joint stderr
  MCEstimate at_level;  // E[phi | X_0 = -p]
  MCEstimate above_level;  // E[phi | X_0 >= -p]
  bool level_order = false;  // at_level <= above_level + 4 joint stderr
};
/// Coordinate 0 is conditioned; phi sees the remaining n - 1 coordinates.
/// Requires Sigma(0, i) >= 0.
ConditionalMonotonicityReport conditional_monotonicity_check(const GaussianSpec& spec,
                                                             const std::function<double(std::span<const double>)>& phi,
                                                             std::span<const double> q_grid, double p,
                                                             std::uint64_t n, std::uint64_t seed);

struct PivotalRow {
  double R = 0.0;
  int center_site = 0;
  std::size_t sites = 0;
  MCEstimate pivotal;
};
struct PivotalScan {
  std::vector<PivotalRow> rows;
  double loglog_slope = 0.0;
  bool non_increasing = false;
};
/// P[center site pivotal for the black LR crossing of [0, 2R] x [0, R] |
/// f(center) = -p], the field being conditioned exactly by the kernel column.
PivotalScan pivotal_decay_scan(const Kernel& kernel, double eps, std::span<const double> radii, double p,
                               std::uint64_t n, std::uint64_t seed);

}  // namespace gfperc
