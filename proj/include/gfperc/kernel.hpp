#pragma once

#include <string>
#include <string_view>

namespace gfperc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

enum class KernelKind { bargmann_fock, rational };

struct KernelSymmetry {
  bool even = true;
  bool quarter_turn_invariant = true;
  bool axis_reflection_invariant = true;
  bool rotation_invariant = false;
};

/// Stationary covariance kappa of a planar Gaussian field, normalized so
/// that kappa(0) = 1.
///
///   bargmann_fock : kappa(x) = exp(-|x|^2 / 2)
///   rational(n)   : kappa(x) = ((1 + x1^2)(1 + x2^2))^(-n)
///
/// Fourier convention: kappa_hat(xi) = (2 pi)^-2 \int e^{-i<xi,x>} kappa(x) dx,
/// so that \int kappa_hat = kappa(0) = 1.
class Kernel {
 public:
  static Kernel bargmann_fock() { return Kernel(KernelKind::bargmann_fock, 0); }
  static Kernel rational(int n);
  /// Accepts "bf", "bargmann_fock", "rational<n>" and "rational:<n>".
  static Kernel parse(std::string_view name);

  KernelKind kind() const { return kind_; }
  /// Exponent n of the rational kernel; 0 for Bargmann-Fock.
  int order() const { return order_; }
  /// Polynomial decay exponent; +inf for Bargmann-Fock.
  double alpha() const;
  KernelSymmetry symmetry() const;
  /// Short stable name used in file formats ("bf", "rational3").
  std::string name() const;

  friend bool operator==(const Kernel&, const Kernel&) = default;

 private:
  Kernel(KernelKind kind, int order) : kind_(kind), order_(order) {}
  KernelKind kind_;
  int order_;
};

double eval_kappa(const Kernel& kernel, Vec2 x);
double eval_kappa_hat(const Kernel& kernel, Vec2 xi);

/// One-dimensional factors: kappa(x) = k1(x1) k1(x2) and
/// kappa_hat(xi) = g1(xi1) g1(xi2) for both supported kernels in the axis
/// frame. g1 uses the (2 pi)^-1 convention.
double eval_kappa_1d(const Kernel& kernel, double t);
double eval_kappa_hat_1d(const Kernel& kernel, double s);

}  // namespace gfperc
