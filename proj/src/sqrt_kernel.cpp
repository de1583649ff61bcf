#include "gfperc/sqrt_kernel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include "json.hpp"
#include <sstream>

#include "gfperc/error.hpp"
#include "gfperc/fft.hpp"

namespace gfperc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kFormatVersion = 1;

bool is_pow2(int n) { return n > 0 && std::has_single_bit(static_cast<unsigned>(n)); }

int next_pow2(int n) { return static_cast<int>(std::bit_ceil(static_cast<unsigned>(std::max(n, 1)))); }

double wrap_angle(double xi) { return xi - kTwoPi * std::round(xi / kTwoPi); }

/// Maps a torus frequency to the argument of kappa_hat: P^{-T} zeta.
Vec2 dual_map(SpectralFrame frame, double mesh, Vec2 zeta) {
  if (frame == SpectralFrame::axis) return {zeta.x / mesh, zeta.y / mesh};
  return {(zeta.x - zeta.y) / mesh, (zeta.x + zeta.y) / mesh};
}

double frame_spacing(SpectralFrame frame, double mesh) {
  return frame == SpectralFrame::axis ? mesh : mesh / std::numbers::sqrt2;
}

bool separable_in_frame(const Kernel& kernel, SpectralFrame frame) {
  return kernel.kind() == KernelKind::bargmann_fock || frame == SpectralFrame::axis;
}

// Periodized spectral density. Image shells |k|_inf = s are added until a
// shell contributes less than 1e-14 of the running total (at least s <= 1).
double symbol_2d(const Kernel& kernel, SpectralFrame frame, double mesh, Vec2 xi) {
  const Vec2 base{wrap_angle(xi.x), wrap_angle(xi.y)};
  double total = 0.0;
  for (int s = 0; s <= 256; ++s) {
    double shell = 0.0;
    for (int k1 = -s; k1 <= s; ++k1) {
      for (int k2 = -s; k2 <= s; ++k2) {
        if (std::max(std::abs(k1), std::abs(k2)) != s) continue;
        shell += eval_kappa_hat(kernel, dual_map(frame, mesh, {base.x - kTwoPi * k1, base.y - kTwoPi * k2}));
      }
    }
    total += shell;
    if (s >= 1 && shell <= 1e-14 * total) break;
  }
  return total;
}

// One-dimensional factor of the symbol for separable kernels.
double symbol_1d(const Kernel& kernel, double spacing, double s_in) {
  const double base = wrap_angle(s_in);
  double total = 0.0;
  for (int s = 0; s <= 4096; ++s) {
    double shell = eval_kappa_hat_1d(kernel, (base - kTwoPi * s) / spacing);
    if (s > 0) shell += eval_kappa_hat_1d(kernel, (base + kTwoPi * s) / spacing);
    total += shell;
    if (s >= 1 && shell <= 1e-14 * total) break;
  }
  return total;
}

struct Coefficients {
  int grid_order = 0;
  // Separable: factor over j in [-N/2, N/2]. Otherwise full 2-d table over
  // the same range in both axes.
  std::vector<double> factor;
  std::vector<double> full;
  double symbol_min = 0.0;

  int half() const { return grid_order / 2; }
  double at(int m1, int m2) const {
    const int w = grid_order + 1;
    if (!factor.empty()) return factor[m1 + half()] * factor[m2 + half()];
    return full[(m2 + half()) * w + (m1 + half())];
  }
};

Coefficients coefficients_1d(const Kernel& kernel, SpectralFrame frame, double mesh, int n) {
  const double h = frame_spacing(frame, mesh);
  std::vector<double> ell(n);
  double min_sym = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double sym = symbol_1d(kernel, h, kTwoPi * i / n);
    min_sym = std::min(min_sym, sym);
    ell[i] = std::sqrt(std::max(sym, 0.0));
  }
  Coefficients c;
  c.grid_order = n;
  c.symbol_min = min_sym * min_sym;
  const int half = n / 2;
  c.factor.assign(n + 1, 0.0);
  const double scale = kTwoPi / n / std::sqrt(kTwoPi * h);
  for (int j = 0; j <= half; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      // Exact integer phase reduction keeps cos() arguments small.
      const long long phase = (static_cast<long long>(j) * i) % n;
      acc += ell[i] * std::cos(kTwoPi * static_cast<double>(phase) / n);
    }
    c.factor[half + j] = scale * acc;
    c.factor[half - j] = scale * acc;
  }
  return c;
}

Coefficients coefficients_2d(const Kernel& kernel, SpectralFrame frame, double mesh, int n) {
  const double h = frame_spacing(frame, mesh);
  const int nc = n / 2 + 1;
  FftwReal in(static_cast<std::size_t>(n) * n);
  FftwComplex out(static_cast<std::size_t>(n) * nc);
  double min_sym = std::numeric_limits<double>::infinity();
  for (int i0 = 0; i0 < n; ++i0) {
    for (int i1 = 0; i1 < n; ++i1) {
      const double sym = symbol_2d(kernel, frame, mesh, {kTwoPi * i1 / n, kTwoPi * i0 / n});
      min_sym = std::min(min_sym, sym);
      in[static_cast<std::size_t>(i0) * n + i1] = std::sqrt(std::max(sym, 0.0));
    }
  }
  {
    FftwPlan plan = FftwPlan::r2c_2d(n, n, in.data(), out.data());
    plan.execute();
  }
  Coefficients c;
  c.grid_order = n;
  c.symbol_min = min_sym;
  const int half = n / 2;
  const int w = n + 1;
  c.full.assign(static_cast<std::size_t>(w) * w, 0.0);
  const double scale = kTwoPi / (h * static_cast<double>(n) * n);
  auto wrap = [n](int m) { return ((m % n) + n) % n; };
  for (int m2 = -half; m2 <= half; ++m2) {
    for (int m1 = -half; m1 <= half; ++m1) {
      double re = 0.0;
      if (m1 >= 0) {
        re = out[static_cast<std::size_t>(wrap(m2)) * nc + m1][0];
      } else {
        re = out[static_cast<std::size_t>(wrap(-m2)) * nc + (-m1)][0];
      }
      c.full[(m2 + half) * w + (m1 + half)] = scale * re;
    }
  }
  // Exact evenness.
  for (int m2 = -half; m2 <= half; ++m2) {
    for (int m1 = -half; m1 <= half; ++m1) {
      double& a = c.full[(m2 + half) * w + (m1 + half)];
      double& b = c.full[(-m2 + half) * w + (-m1 + half)];
      const double avg = 0.5 * (a + b);
      a = avg;
      b = avg;
    }
  }
  return c;
}

// Smallest radius whose discarded tail is below tail_tol * total mass.
int choose_radius(const Coefficients& c, double tail_tol) {
  const int half = c.half();
  std::vector<double> shell(half + 1, 0.0);
  if (!c.factor.empty()) {
    // |eta| mass inside the square of radius s is (sum_{|j|<=s} |f_j|)^2.
    std::vector<double> inside(half + 1, 0.0);
    double acc = 0.0;
    for (int s = 0; s <= half; ++s) {
      acc += std::abs(c.factor[half + s]) + (s > 0 ? std::abs(c.factor[half - s]) : 0.0);
      inside[s] = acc * acc;
    }
    const double total = inside[half];
    for (int s = 0; s <= half; ++s) {
      if (total - inside[s] < tail_tol * total) return std::max(s, 1);
    }
    return half + 1;
  }
  double total = 0.0;
  for (int m2 = -half; m2 <= half; ++m2) {
    for (int m1 = -half; m1 <= half; ++m1) {
      const double v = std::abs(c.at(m1, m2));
      shell[std::max(std::abs(m1), std::abs(m2))] += v;
      total += v;
    }
  }
  double tail = total;
  for (int s = 0; s <= half; ++s) {
    tail -= shell[s];
    if (tail < tail_tol * total) return std::max(s, 1);
  }
  return half + 1;
}

double conv_residual_separable(const SqrtKernel& sk) {
  const int m = sk.support_radius;
  const int check = std::max(1, m / 2);
  std::vector<double> c1(2 * check + 1, 0.0);
  for (int j = -check; j <= check; ++j) {
    double acc = 0.0;
    for (int i = -m; i <= m; ++i) {
      const int k = j - i;
      if (k < -m || k > m) continue;
      acc += sk.factor[i + m] * sk.factor[k + m];
    }
    c1[j + check] = acc;
  }
  double worst = 0.0;
  for (int m2 = -check; m2 <= check; ++m2) {
    for (int m1 = -check; m1 <= check; ++m1) {
      worst = std::max(worst, std::abs(c1[m1 + check] * c1[m2 + check] - sk.target(m1, m2)));
    }
  }
  return worst;
}

double conv_residual_fft(const SqrtKernel& sk) {
  const int m = sk.support_radius;
  const int check = std::max(1, m / 2);
  const int l = next_pow2(4 * m + 2);
  const int lc = l / 2 + 1;
  FftwReal buf(static_cast<std::size_t>(l) * l);
  FftwComplex spec(static_cast<std::size_t>(l) * lc);
  std::fill(buf.begin(), buf.end(), 0.0);
  auto wrap = [l](int v) { return ((v % l) + l) % l; };
  for (int m2 = -m; m2 <= m; ++m2) {
    for (int m1 = -m; m1 <= m; ++m1) {
      buf[static_cast<std::size_t>(wrap(m2)) * l + wrap(m1)] = sk.at(m1, m2);
    }
  }
  {
    FftwPlan fwd = FftwPlan::r2c_2d(l, l, buf.data(), spec.data());
    fwd.execute();
  }
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::complex<double> z(spec[i][0], spec[i][1]);
    const std::complex<double> sq = z * z;
    spec[i][0] = sq.real();
    spec[i][1] = sq.imag();
  }
  {
    FftwPlan inv = FftwPlan::c2r_2d(l, l, spec.data(), buf.data());
    inv.execute();
  }
  const double norm = 1.0 / (static_cast<double>(l) * l);
  double worst = 0.0;
  for (int m2 = -check; m2 <= check; ++m2) {
    for (int m1 = -check; m1 <= check; ++m1) {
      const double conv = buf[static_cast<std::size_t>(wrap(m2)) * l + wrap(m1)] * norm;
      worst = std::max(worst, std::abs(conv - sk.target(m1, m2)));
    }
  }
  return worst;
}

SqrtKernel assemble(const Kernel& kernel, double mesh, SpectralFrame frame, const Coefficients& c, int radius) {
  SqrtKernel sk;
  sk.kernel = kernel;
  sk.mesh_eps = mesh;
  sk.frame = frame;
  sk.grid_order = c.grid_order;
  sk.support_radius = radius;
  sk.symbol_min = c.symbol_min;
  const int w = sk.width();
  if (!c.factor.empty()) {
    sk.factor.resize(w);
    for (int j = -radius; j <= radius; ++j) sk.factor[j + radius] = c.factor[j + c.half()];
  }
  sk.table.resize(static_cast<std::size_t>(w) * w);
  double sum = 0.0;
  for (int m2 = -radius; m2 <= radius; ++m2) {
    for (int m1 = -radius; m1 <= radius; ++m1) {
      const double v = c.at(m1, m2);
      sk.table[static_cast<std::size_t>(m2 + radius) * w + (m1 + radius)] = v;
      sum += std::abs(v);
    }
  }
  sk.sum_abs = sum;
  sk.conv_residual = sk.separable() ? conv_residual_separable(sk) : conv_residual_fft(sk);
  return sk;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(SpectralFrame frame) { return frame == SpectralFrame::axis ? "axis" : "lattice"; }

SpectralFrame parse_frame(std::string_view name) {
  if (name == "axis") return SpectralFrame::axis;
  if (name == "lattice") return SpectralFrame::lattice;
  throw PreconditionError("unknown spectral frame '" + std::string(name) + "'");
}

double SqrtKernel::at(int m1, int m2) const {
  const int r = support_radius;
  if (std::abs(m1) > r || std::abs(m2) > r) return 0.0;
  return table[static_cast<std::size_t>(m2 + r) * width() + (m1 + r)];
}

double SqrtKernel::spacing() const { return frame_spacing(frame, mesh_eps); }

Vec2 SqrtKernel::displacement(int m1, int m2) const {
  if (frame == SpectralFrame::axis) return {mesh_eps * m1, mesh_eps * m2};
  return {0.5 * mesh_eps * (m1 - m2), 0.5 * mesh_eps * (m1 + m2)};
}

double SqrtKernel::target(int m1, int m2) const { return eval_kappa(kernel, displacement(m1, m2)); }

SqrtKernel SqrtKernel::from_table(const Kernel& kernel, double mesh, SpectralFrame frame, int support_radius,
                                  std::vector<double> table) {
  const auto w = static_cast<std::size_t>(2 * support_radius + 1);
  if (support_radius < 0 || table.size() != w * w) throw PreconditionError("from_table: table size mismatch");
  SqrtKernel sk;
  sk.kernel = kernel;
  sk.mesh_eps = mesh;
  sk.frame = frame;
  sk.support_radius = support_radius;
  sk.table = std::move(table);
  for (double v : sk.table) sk.sum_abs += std::abs(v);
  return sk;
}

SqrtKernel build_sqrt_kernel(const Kernel& kernel, double eps, int grid_order, int support_radius) {
  if (!(eps > 0.0)) throw PreconditionError("build_sqrt_kernel: eps must be positive");
  if (support_radius < 1) throw PreconditionError("build_sqrt_kernel: support_radius must be >= 1");
  if (!is_pow2(grid_order) || grid_order < 2 * support_radius) {
    throw PreconditionError("build_sqrt_kernel: grid_order must be a power of two >= 2 * support_radius");
  }
  SqrtBuildOptions options;
  options.grid_order = grid_order;
  options.support_radius = support_radius;
  return build_sqrt_kernel(kernel, eps, SpectralFrame::axis, options);
}

SqrtKernel build_sqrt_kernel(const Kernel& kernel, double mesh, SpectralFrame frame,
                             const SqrtBuildOptions& options) {
  if (!(mesh > 0.0) || !std::isfinite(mesh)) throw PreconditionError("build_sqrt_kernel: mesh must be positive");
  if (!is_pow2(options.grid_order) || !is_pow2(options.max_grid_order)) {
    throw PreconditionError("build_sqrt_kernel: grid orders must be powers of two");
  }
  if (options.support_radius < 0) throw PreconditionError("build_sqrt_kernel: negative support_radius");

  const bool separable = separable_in_frame(kernel, frame) && !options.force_2d;
  int n = options.grid_order;
  if (options.support_radius > 0) n = std::max(n, next_pow2(2 * options.support_radius));

  double previous_residual = std::numeric_limits<double>::infinity();
  for (;;) {
    if (n > options.max_grid_order) {
      throw NumericalError("build_sqrt_kernel: quadrature grid cap reached without resolving the stencil",
                           previous_residual);
    }
    const Coefficients c =
        separable ? coefficients_1d(kernel, frame, mesh, n) : coefficients_2d(kernel, frame, mesh, n);
    // The Bargmann-Fock density underflows to 0 near the torus corner for
    // fine meshes; that is harmless. A negative value is not.
    if (!(c.symbol_min >= 0.0)) {
      throw NumericalError("build_sqrt_kernel: periodized spectral density is negative", c.symbol_min);
    }
    int radius = options.support_radius;
    if (radius == 0) {
      radius = choose_radius(c, options.tail_tol);
      if (radius > n / 4) {
        n *= 2;
        continue;
      }
    }
    SqrtKernel sk = assemble(kernel, mesh, frame, c, radius);
    if (sk.conv_residual <= options.residual_tol) return sk;
    const bool stalled = options.support_radius > 0 && sk.conv_residual > 0.5 * previous_residual;
    previous_residual = sk.conv_residual;
    if (stalled || 2 * n > options.max_grid_order) {
      throw NumericalError("build_sqrt_kernel: convolution residual " + format_double(sk.conv_residual) +
                               " above tolerance at grid_order " + std::to_string(n),
                           sk.conv_residual);
    }
    n *= 2;
  }
}

std::vector<OpNormRow> op_norm_scan(const Kernel& kernel, std::span<const double> eps_grid) {
  std::vector<OpNormRow> rows;
  rows.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    const SqrtKernel sk = build_sqrt_kernel(kernel, eps, SpectralFrame::axis);
    OpNormRow row;
    row.eps = eps;
    row.sum_abs = sk.sum_abs;
    const double log_inv = std::log(1.0 / eps);
    row.ratio = log_inv > 0.0 ? sk.sum_abs * eps / log_inv : std::numeric_limits<double>::infinity();
    row.support_radius = sk.support_radius;
    row.grid_order = sk.grid_order;
    row.conv_residual = sk.conv_residual;
    rows.push_back(row);
  }
  return rows;
}

std::string sqrt_kernel_to_json(const SqrtKernel& sk) {
  nlohmann::ordered_json j;
  j["format"] = "gfperc-sqrt-kernel";
  j["version"] = kFormatVersion;
  j["kernel"] = sk.kernel.name();
  j["mesh_eps"] = sk.mesh_eps;
  j["frame"] = to_string(sk.frame);
  j["grid_order"] = sk.grid_order;
  j["support_radius"] = sk.support_radius;
  j["sum_abs"] = sk.sum_abs;
  j["conv_residual"] = sk.conv_residual;
  j["symbol_min"] = sk.symbol_min;
  j["factor"] = sk.factor;
  j["table"] = sk.table;
  return j.dump();
}

SqrtKernel sqrt_kernel_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "gfperc-sqrt-kernel") throw PreconditionError("not a sqrt-kernel file");
  if (j.at("version").get<int>() != kFormatVersion) {
    throw PreconditionError("unsupported sqrt-kernel file version " + std::to_string(j.at("version").get<int>()));
  }
  SqrtKernel sk = SqrtKernel::from_table(Kernel::parse(j.at("kernel").get<std::string>()),
                                         j.at("mesh_eps").get<double>(), parse_frame(j.at("frame").get<std::string>()),
                                         j.at("support_radius").get<int>(), j.at("table").get<std::vector<double>>());
  sk.grid_order = j.at("grid_order").get<int>();
  sk.sum_abs = j.at("sum_abs").get<double>();
  sk.conv_residual = j.at("conv_residual").get<double>();
  sk.symbol_min = j.at("symbol_min").get<double>();
  sk.factor = j.at("factor").get<std::vector<double>>();
  if (!sk.factor.empty() && static_cast<int>(sk.factor.size()) != sk.width()) {
    throw PreconditionError("sqrt-kernel file: factor size mismatch");
  }
  return sk;
}

void save_sqrt_kernel(const SqrtKernel& sk, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << sqrt_kernel_to_json(sk) << '\n';
}

SqrtKernel load_sqrt_kernel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sqrt_kernel_from_json(ss.str());
}

std::string sqrt_kernel_cache_key(const Kernel& kernel, double mesh, SpectralFrame frame,
                                  const SqrtBuildOptions& options) {
  char mesh_hex[32];
  std::snprintf(mesh_hex, sizeof mesh_hex, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(mesh)));
  std::ostringstream key;
  key << "sqrt-" << kernel.name() << '-' << to_string(frame) << '-' << mesh_hex << "-N" << options.grid_order << "-M"
      << options.support_radius << (options.force_2d ? "-2d" : "") << ".json";
  return key.str();
}

SqrtKernel load_or_build_sqrt_kernel(const std::filesystem::path& cache_dir, const Kernel& kernel, double mesh,
                                     SpectralFrame frame, const SqrtBuildOptions& options) {
  if (cache_dir.empty()) return build_sqrt_kernel(kernel, mesh, frame, options);
  const auto path = cache_dir / sqrt_kernel_cache_key(kernel, mesh, frame, options);
  if (std::filesystem::exists(path)) return load_sqrt_kernel(path);
  SqrtKernel sk = build_sqrt_kernel(kernel, mesh, frame, options);
  std::filesystem::create_directories(cache_dir);
  // Write-then-rename so concurrent readers never see a partial file.
  auto tmp = path;
  tmp += ".tmp";
  save_sqrt_kernel(sk, tmp);
  std::filesystem::rename(tmp, path);
  return sk;
}

}  // namespace gfperc
