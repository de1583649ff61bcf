#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gfperc/kernel.hpp"
#include "gfperc/lattice.hpp"
#include "gfperc/sqrt_kernel.hpp"
#include "gfperc/stats.hpp"

namespace gfperc {

enum class SamplerMethod { sqrt_convolution, hermite_series };
std::string to_string(SamplerMethod m);

/// Field values, one per site of a region graph (or per point for the
/// Hermite sampler), in the graph's site order.
struct FieldSample {
  std::vector<double> values;
  double mesh_eps = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  SamplerMethod method = SamplerMethod::sqrt_convolution;
  Kernel kernel = Kernel::bargmann_fock();
};

enum class ConvolutionPath {
  automatic,  // separable when the stencil factors, else FFT above 128^2 window points, else direct
  direct,     // per-site stencil sum; the serial reference
  separable,  // two 1-d passes (requires a factored stencil)
  fft,        // circular convolution on the noise window
};
std::string to_string(ConvolutionPath p);

/// Resource cap on the noise window (points).
inline constexpr std::size_t kMaxWindowPoints = 16'000'000;

/// f = eta * W on the rotated index lattice. W is iid N(0,1) on the bounding
/// box of the region's rotated indices enlarged by M on each side, drawn in
/// row-major order from StreamRng(seed, stream); every path consumes the same
/// noise, so paths agree up to rounding.
class ConvolutionSampler {
 public:
  ConvolutionSampler(SqrtKernel sqrt_kernel, const RegionGraph& graph,
                     ConvolutionPath path = ConvolutionPath::automatic);
  ~ConvolutionSampler();
  ConvolutionSampler(ConvolutionSampler&&) noexcept;
  ConvolutionSampler& operator=(ConvolutionSampler&&) noexcept;

  /// Scratch buffers (and FFT plans) for one thread.
  class Workspace;
  Workspace make_workspace() const;

  /// Writes one value per site into out (size == graph.size()).
  void sample_into(std::uint64_t seed, std::uint64_t stream, Workspace& ws, std::span<double> out) const;
  FieldSample sample(std::uint64_t seed, std::uint64_t stream) const;

  /// Fills the full noise window; exposed for tests.
  void draw_noise(std::uint64_t seed, std::uint64_t stream, std::span<double> noise) const;

  ConvolutionPath path() const { return path_; }
  const SqrtKernel& sqrt_kernel() const { return sk_; }
  int window_u() const { return wu_; }
  int window_v() const { return wv_; }
  std::size_t window_points() const { return static_cast<std::size_t>(wu_) * wv_; }

 private:
  void convolve_direct(std::span<const double> noise, std::span<double> out) const;
  void convolve_separable(std::span<const double> noise, Workspace& ws, std::span<double> out) const;
  void convolve_fft(std::span<const double> noise, Workspace& ws, std::span<double> out) const;

  SqrtKernel sk_;
  ConvolutionPath path_;
  Kernel kernel_;
  double mesh_ = 0.0;
  int radius_ = 0;
  int nu_ = 0, nv_ = 0;  // region index box
  int wu_ = 0, wv_ = 0;  // noise window = box + 2M
  std::vector<int> site_u_, site_v_;  // site index box coordinates
  struct FftData;
  std::shared_ptr<const FftData> fft_;
};

class ConvolutionSampler::Workspace {
 public:
  Workspace();
  ~Workspace();
  Workspace(Workspace&&) noexcept;
  Workspace& operator=(Workspace&&) noexcept;

 private:
  friend class ConvolutionSampler;
  std::vector<double> noise;
  std::vector<double> tmp;
  struct FftScratch;
  std::unique_ptr<FftScratch> fft;
};

/// Sample on `graph` with a convenience one-off workspace.
FieldSample sample_sqrt_convolution(const SqrtKernel& sqrt_kernel, const RegionGraph& graph, std::uint64_t seed,
                                    std::uint64_t stream = 0);

// Truncated Bargmann-Fock series
//   f_N(x) = sum_{i,j <= N} a_ij w_i(x1) w_j(x2),  w_i(t) = e^{-t^2/2} t^i / sqrt(i!).
// w_i(t)^2 is the Poisson(t^2) mass at i, so Var f_N(x) = P1 P2 with P_k the
// Poisson(x_k^2) distribution function at N.

/// 1 - Var f_N(x), computed without cancellation.
double hermite_tail_variance(int truncation, Vec2 x);
/// Smallest N with hermite_tail_variance(N, x) <= tol for all |x|_inf <= radius.
int hermite_truncation_for_radius(double radius, double tol = 1e-10);

/// Throws PreconditionError naming the required N when a point's tail
/// variance exceeds 1e-10.
FieldSample sample_hermite_series(int truncation, std::span<const Vec2> points, std::uint64_t seed,
                                  std::uint64_t stream = 0);

/// Reusable Hermite evaluator for many replicates at fixed points.
class HermiteSampler {
 public:
  HermiteSampler(int truncation, std::vector<Vec2> points, double tail_tol = 1e-10);
  void sample_into(std::uint64_t seed, std::uint64_t stream, std::span<double> out) const;
  std::size_t size() const { return points_.size(); }
  int truncation() const { return n_; }

 private:
  int n_;
  std::vector<Vec2> points_;
  std::vector<double> w1_, w2_;  // (N+1) weights per point and axis
};

struct ProbePair {
  Vec2 x;
  Vec2 y;
};

struct PairCheck {
  ProbePair pair;
  double target = 0.0;  // kappa(x - y)
  MCEstimate convolution;
  MCEstimate hermite;
  double z_score = 0.0;  // (conv - hermite) / joint stderr
};

struct CrossValidationReport {
  double ks_statistic = 0.0;
  double ks_p_value = 0.0;
  std::vector<PairCheck> pairs;  // sorted by (x, y) for an order-independent report
  double max_abs_z = 0.0;
  bool pass = false;
};

/// Draws n replicates of both samplers at the probe points (lattice sites of
/// mesh eps) and compares the f(0) laws by KS and the pair covariances by z
/// score. pass = KS p > 0.01 and every |z| < 4.
CrossValidationReport cross_validate_samplers(const Kernel& kernel, double eps, std::uint64_t n, std::uint64_t seed,
                                              std::vector<ProbePair> probes = {});

/// Default probe pairs at mesh eps: all within a few eps of the origin.
std::vector<ProbePair> default_probe_pairs(double eps);

}  // namespace gfperc
