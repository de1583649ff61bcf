#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "gfperc/error.hpp"
#include "gfperc/kernel.hpp"
#include "gfperc/sqrt_kernel.hpp"

using namespace gfperc;

namespace {

// Direct double sum (eta * eta)(m) over the whole stored table.
double self_convolution(const SqrtKernel& sk, int m1, int m2) {
  const int M = sk.support_radius;
  double acc = 0.0;
  for (int k2 = -M; k2 <= M; ++k2) {
    for (int k1 = -M; k1 <= M; ++k1) {
      const int j1 = m1 - k1, j2 = m2 - k2;
      if (std::abs(j1) > M || std::abs(j2) > M) continue;
      acc += sk.at(k1, k2) * sk.at(j1, j2);
    }
  }
  return acc;
}

double max_conv_error(const SqrtKernel& sk, int radius) {
  double worst = 0.0;
  for (int m2 = -radius; m2 <= radius; ++m2) {
    for (int m1 = -radius; m1 <= radius; ++m1) {
      worst = std::max(worst, std::abs(self_convolution(sk, m1, m2) - eval_kappa(sk.kernel, sk.displacement(m1, m2))));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("sqrt_kernel") {

TEST_CASE("bargmann-fock at eps 0.5 with M = 32 matches the direct sum") {
  const SqrtKernel sk = build_sqrt_kernel(Kernel::bargmann_fock(), 0.5, 128, 32);
  CHECK(sk.support_radius == 32);
  CHECK(max_conv_error(sk, 20) <= 1e-6);
  CHECK(self_convolution(sk, 0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tables are exactly even") {
  for (const SpectralFrame frame : {SpectralFrame::axis, SpectralFrame::lattice}) {
    for (const Kernel k : {Kernel::bargmann_fock(), Kernel::rational(3)}) {
      const SqrtKernel sk = build_sqrt_kernel(k, 0.5, frame);
      const int M = sk.support_radius;
      for (int m2 = -M; m2 <= M; ++m2) {
        for (int m1 = -M; m1 <= M; ++m1) CHECK(sk.at(m1, m2) == sk.at(-m1, -m2));
      }
      CHECK(sk.sum_abs >= std::abs(sk.at(0, 0)));
      CHECK(std::isfinite(sk.sum_abs));
    }
  }
}

TEST_CASE("lattice frame reproduces kappa at rotated displacements") {
  const SqrtKernel sk = build_lattice_sqrt_kernel(Kernel::bargmann_fock(), 0.5);
  CHECK(sk.frame == SpectralFrame::lattice);
  CHECK(sk.spacing() == doctest::Approx(0.5 / std::sqrt(2.0)));
  const Vec2 d = sk.displacement(1, 0);
  CHECK(d.x == doctest::Approx(0.25));
  CHECK(d.y == doctest::Approx(0.25));
  CHECK(max_conv_error(sk, 10) <= 1e-6);
}

TEST_CASE("rational kernel square root") {
  const SqrtKernel sk = build_sqrt_kernel(Kernel::rational(3), 0.5, SpectralFrame::axis);
  CHECK(std::isfinite(sk.sum_abs));
  CHECK(max_conv_error(sk, 6) <= 1e-6);
  const SqrtKernel lat = build_lattice_sqrt_kernel(Kernel::rational(3), 0.5);
  CHECK_FALSE(lat.separable());
  CHECK(max_conv_error(lat, 4) <= 1e-6);
}

TEST_CASE("separable and two-dimensional constructions agree") {
  SqrtBuildOptions sep;
  SqrtBuildOptions full;
  full.force_2d = true;
  const SqrtKernel a = build_sqrt_kernel(Kernel::bargmann_fock(), 0.5, SpectralFrame::lattice, sep);
  const SqrtKernel b = build_sqrt_kernel(Kernel::bargmann_fock(), 0.5, SpectralFrame::lattice, full);
  CHECK(a.separable());
  CHECK_FALSE(b.separable());
  const int M = std::min(a.support_radius, b.support_radius);
  double worst = 0.0;
  for (int m2 = -M; m2 <= M; ++m2) {
    for (int m1 = -M; m1 <= M; ++m1) worst = std::max(worst, std::abs(a.at(m1, m2) - b.at(m1, m2)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("json round trip and cache") {
  const SqrtKernel sk = build_lattice_sqrt_kernel(Kernel::bargmann_fock(), 0.35);
  const SqrtKernel back = sqrt_kernel_from_json(sqrt_kernel_to_json(sk));
  CHECK(back.table == sk.table);
  CHECK(back.factor == sk.factor);
  CHECK(back.mesh_eps == sk.mesh_eps);
  CHECK(back.frame == sk.frame);
  CHECK(back.kernel == sk.kernel);

  const auto dir = std::filesystem::temp_directory_path() / "gfperc_cache_test";
  std::filesystem::remove_all(dir);
  const SqrtKernel first = load_or_build_sqrt_kernel(dir, Kernel::bargmann_fock(), 0.35, SpectralFrame::lattice);
  const auto key = sqrt_kernel_cache_key(Kernel::bargmann_fock(), 0.35, SpectralFrame::lattice, {});
  CHECK(std::filesystem::exists(dir / key));
  const SqrtKernel second = load_or_build_sqrt_kernel(dir, Kernel::bargmann_fock(), 0.35, SpectralFrame::lattice);
  CHECK(first.table == second.table);
  SqrtBuildOptions other;
  other.force_2d = true;
  CHECK(sqrt_kernel_cache_key(Kernel::bargmann_fock(), 0.35, SpectralFrame::lattice, other) != key);
  CHECK(sqrt_kernel_cache_key(Kernel::bargmann_fock(), 0.25, SpectralFrame::lattice, {}) != key);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(sqrt_kernel_from_json("{\"format\":\"other\"}"));
}

TEST_CASE("norm diagnostic ratio stays bounded") {
  const std::vector<double> grid{0.5, 0.25, 0.125};
  const auto rows = op_norm_scan(Kernel::bargmann_fock(), grid);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.ratio <= 3.0 * rows[0].ratio);
    CHECK(r.conv_residual <= 1e-6);
  }
}

TEST_CASE("preconditions") {
  CHECK_THROWS_AS(build_sqrt_kernel(Kernel::bargmann_fock(), -1.0, 64, 8), PreconditionError);
  CHECK_THROWS_AS(build_sqrt_kernel(Kernel::bargmann_fock(), 0.5, 48, 8), PreconditionError);
  CHECK_THROWS_AS(build_sqrt_kernel(Kernel::bargmann_fock(), 0.5, 8, 8), PreconditionError);
}

}
