#pragma once

// Discretization error of lattice crossings.
//
// Fold(e): an edge e = [x, y] with f(x) >= -p/2 and f(y) >= -p/2 but
// f(z) < -p for some z on e. The continuum edge is replaced by K equally
// spaced interior points.

#include <cstdint>
#include <span>
#include <vector>

#include "gfperc/kernel.hpp"
#include "gfperc/stats.hpp"

namespace gfperc {

struct FoldSpec {
  double eps = 0.5;  // edge length
  double p = 0.5;
  int K = 16;
  std::uint64_t n = 100000;
};

enum class FoldEstimator {
  importance,  // conditional sampling inside each one-dip wedge
  plain,       // direct Monte Carlo
};

/// The fold event is the union over interior points z_j of the wedges
/// {f(x) >= -p/2, f(y) >= -p/2, f(z_j) <= -p}. The importance estimator draws
/// (f(x), f(y), f(z_j)) inside wedge j with exponential slacks, completes the
/// field from the exact conditional law, and combines wedges as
/// sum_j E_j[weight / #wedges containing the draw]. K = 0 returns exactly 0.
MCEstimate estimate_fold_probability(const Kernel& kernel, const FoldSpec& spec, std::uint64_t seed,
                                     FoldEstimator estimator = FoldEstimator::importance);

struct FoldRefinementRow {
  int K = 0;
  MCEstimate estimate;
};
/// Estimates at several K from independent streams.
std::vector<FoldRefinementRow> fold_refinement_report(const Kernel& kernel, double eps, double p,
                                                      std::span<const int> ks, std::uint64_t n, std::uint64_t seed,
                                                      FoldEstimator estimator = FoldEstimator::importance);

struct GapReport {
  MCEstimate gap;           // P[coarse crossing at p/2 and no fine crossing at p]
  MCEstimate coarse_cross;  // P[coarse crossing at p/2]
  MCEstimate fine_cross;    // P[fine crossing at p]
  std::uint64_t containment_checked = 0;     // samples with a fold-free coarse crossing
  std::uint64_t containment_violations = 0;  // of those, samples without a fine crossing
  std::size_t coarse_sites = 0;
  std::size_t fine_sites = 0;
};

class RegionGraph;
/// Fine index of every coarse site when the fine mesh is the coarse mesh
/// divided by fine_factor (coarse (a, b) is fine (ff a, ff b)).
std::vector<int> coarse_sites_in_fine(const RegionGraph& coarse, const RegionGraph& fine, int fine_factor);

/// Coarse lattice of mesh eps and fine lattice of mesh eps / fine_factor on
/// [0, rho R] x [0, R]. One fine field is drawn per replicate; the coarse
/// field is its restriction.
GapReport estimate_sprinkled_gap(const Kernel& kernel, double eps, double R, double p, int fine_factor,
                                 std::uint64_t n, std::uint64_t seed, double rho = 2.0);

}  // namespace gfperc
