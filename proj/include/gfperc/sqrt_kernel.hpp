#pragma once

// Convolution square root of a lattice-restricted covariance.
//
// For a kernel kappa and a lattice map P : Z^2 -> R^2 (P m = h m on the axis
// frame, P m = h R_{pi/4} m on the face-centered lattice frame) we build an
// even table eta on Z^2 with
//
//     (eta * eta)(m) = kappa(P m).
//
// eta is the Fourier series of lambda(xi) = sqrt(sum_k kappa_hat(P^{-T}(xi - 2 pi k))),
// scaled by 1 / (2 pi h), and is evaluated by trapezoidal quadrature on an
// N x N grid of the torus (an FFT). The resulting table is what the
// convolution sampler uses as its stencil, and sum |eta| is the infinity
// operator norm of the symmetric square root of the infinite covariance matrix.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gfperc/kernel.hpp"

namespace gfperc {

enum class SpectralFrame {
  axis,     // Z^2 with spacing mesh: target kappa(mesh * m)
  lattice,  // rotated Z^2 indexing of the face-centered lattice of mesh `mesh`
};

std::string to_string(SpectralFrame frame);
SpectralFrame parse_frame(std::string_view name);

struct SqrtKernel {
  Kernel kernel = Kernel::bargmann_fock();
  double mesh_eps = 0.0;
  SpectralFrame frame = SpectralFrame::axis;
  int grid_order = 0;
  int support_radius = 0;
  /// (2M+1)^2 values, row-major in m2: index (m2 + M) * (2M + 1) + (m1 + M).
  std::vector<double> table;
  /// When non-empty, table(m1, m2) == factor(m1) * factor(m2).
  std::vector<double> factor;
  double sum_abs = 0.0;
  double conv_residual = 0.0;
  /// Minimum over the quadrature grid of the periodized spectral density.
  double symbol_min = 0.0;

  int width() const { return 2 * support_radius + 1; }
  bool separable() const { return !factor.empty(); }
  double at(int m1, int m2) const;
  /// Spacing of the Z^2 index lattice (mesh for axis, mesh / sqrt 2 for lattice).
  double spacing() const;
  /// Physical displacement P m of an index offset.
  Vec2 displacement(int m1, int m2) const;
  /// kappa(P m).
  double target(int m1, int m2) const;

  /// Wraps a caller-provided table (used for identity stencils and tests).
  static SqrtKernel from_table(const Kernel& kernel, double mesh, SpectralFrame frame, int support_radius,
                               std::vector<double> table);
};

struct SqrtBuildOptions {
  int grid_order = 64;      // initial quadrature grid per axis (power of two)
  int support_radius = 0;   // 0 = choose from the discarded tail mass
  int max_grid_order = 4096;
  double residual_tol = 1e-6;
  double tail_tol = 1e-8;   // discarded mass relative to sum |eta|
  bool force_2d = false;    // skip the separable 1-d construction
};

/// Axis-frame construction with explicit quadrature order and stencil
/// radius. grid_order must be a power of two >= 2 * support_radius; it is
/// doubled until conv_residual < 1e-6 or the 4096 cap is reached.
SqrtKernel build_sqrt_kernel(const Kernel& kernel, double eps, int grid_order, int support_radius);

SqrtKernel build_sqrt_kernel(const Kernel& kernel, double mesh, SpectralFrame frame,
                             const SqrtBuildOptions& options = {});

/// Stencil for sampling on the face-centered lattice of mesh eps.
inline SqrtKernel build_lattice_sqrt_kernel(const Kernel& kernel, double eps) {
  return build_sqrt_kernel(kernel, eps, SpectralFrame::lattice);
}

struct OpNormRow {
  double eps = 0.0;
  double sum_abs = 0.0;
  double ratio = 0.0;  // sum_abs * eps / log(1/eps)
  int support_radius = 0;
  int grid_order = 0;
  double conv_residual = 0.0;
};

std::vector<OpNormRow> op_norm_scan(const Kernel& kernel, std::span<const double> eps_grid);

/// Versioned JSON persistence.
std::string sqrt_kernel_to_json(const SqrtKernel& sk);
SqrtKernel sqrt_kernel_from_json(const std::string& text);
void save_sqrt_kernel(const SqrtKernel& sk, const std::filesystem::path& path);
SqrtKernel load_sqrt_kernel(const std::filesystem::path& path);

/// Builds, or loads from `cache_dir` when a table with the same
/// (kernel, mesh, frame, options) key exists. An empty cache_dir disables caching.
SqrtKernel load_or_build_sqrt_kernel(const std::filesystem::path& cache_dir, const Kernel& kernel, double mesh,
                                     SpectralFrame frame, const SqrtBuildOptions& options = {});
std::string sqrt_kernel_cache_key(const Kernel& kernel, double mesh, SpectralFrame frame,
                                  const SqrtBuildOptions& options);

}  // namespace gfperc
