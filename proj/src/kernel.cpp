#include "gfperc/kernel.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

#include "gfperc/error.hpp"

namespace gfperc {

namespace {
constexpr int kMaxRationalOrder = 16;
}

Kernel Kernel::rational(int n) {
  if (n < 1 || n > kMaxRationalOrder) {
    throw PreconditionError("rational kernel order must be in [1, " + std::to_string(kMaxRationalOrder) + "], got " +
                            std::to_string(n));
  }
  return Kernel(KernelKind::rational, n);
}

Kernel Kernel::parse(std::string_view name) {
  if (name == "bf" || name == "bargmann_fock" || name == "bargmann-fock") return bargmann_fock();
  constexpr std::string_view prefix = "rational";
  if (name.substr(0, prefix.size()) == prefix) {
    auto rest = name.substr(prefix.size());
    if (!rest.empty() && (rest.front() == ':' || rest.front() == '(')) rest.remove_prefix(1);
    if (!rest.empty() && rest.back() == ')') rest.remove_suffix(1);
    int n = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
    if (ec == std::errc{} && ptr == rest.data() + rest.size()) return rational(n);
  }
  throw PreconditionError("unsupported kernel '" + std::string(name) + "' (expected bf or rational<n>)");
}

double Kernel::alpha() const {
  if (kind_ == KernelKind::bargmann_fock) return std::numeric_limits<double>::infinity();
  return 2.0 * order_;
}

KernelSymmetry Kernel::symmetry() const {
  KernelSymmetry s;
  s.rotation_invariant = kind_ == KernelKind::bargmann_fock;
  return s;
}

std::string Kernel::name() const {
  if (kind_ == KernelKind::bargmann_fock) return "bf";
  return "rational" + std::to_string(order_);
}

double eval_kappa_1d(const Kernel& kernel, double t) {
  if (kernel.kind() == KernelKind::bargmann_fock) return std::exp(-0.5 * t * t);
  return std::pow(1.0 + t * t, -kernel.order());
}

double eval_kappa_hat_1d(const Kernel& kernel, double s) {
  if (kernel.kind() == KernelKind::bargmann_fock) {
    return std::exp(-0.5 * s * s) / std::sqrt(2.0 * std::numbers::pi);
  }
  // (2 pi)^-1 \int e^{-ist} (1+t^2)^-n dt
  //   = e^{-|s|} / (2^{2n-1} (n-1)!) * sum_{k<n} (2n-2-k)! / (k! (n-1-k)!) (2|s|)^k
  const int n = kernel.order();
  const double a = std::abs(s);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double log_coef = std::lgamma(2.0 * n - 1.0 - k) - std::lgamma(k + 1.0) - std::lgamma(static_cast<double>(n - k));
    sum += std::exp(log_coef) * std::pow(2.0 * a, k);
  }
  const double log_norm = (2.0 * n - 1.0) * std::numbers::ln2 + std::lgamma(static_cast<double>(n));
  return std::exp(-a - log_norm) * sum;
}

double eval_kappa(const Kernel& kernel, Vec2 x) {
  if (kernel.kind() == KernelKind::bargmann_fock) return std::exp(-0.5 * (x.x * x.x + x.y * x.y));
  return eval_kappa_1d(kernel, x.x) * eval_kappa_1d(kernel, x.y);
}

double eval_kappa_hat(const Kernel& kernel, Vec2 xi) {
  if (kernel.kind() == KernelKind::bargmann_fock) {
    return std::exp(-0.5 * (xi.x * xi.x + xi.y * xi.y)) / (2.0 * std::numbers::pi);
  }
  return eval_kappa_hat_1d(kernel, xi.x) * eval_kappa_hat_1d(kernel, xi.y);
}

}  // namespace gfperc
