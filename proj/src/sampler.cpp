#include "gfperc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <tuple>

#include "gfperc/error.hpp"
#include "gfperc/fft.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/rng.hpp"

namespace gfperc {

namespace {

constexpr std::size_t kDirectWindowLimit = 128 * 128;

// FFT sizes with only small prime factors.
int smooth_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace

std::string to_string(SamplerMethod m) {
  return m == SamplerMethod::sqrt_convolution ? "sqrt_convolution" : "hermite_series";
}

std::string to_string(ConvolutionPath p) {
  switch (p) {
    case ConvolutionPath::automatic: return "automatic";
    case ConvolutionPath::direct: return "direct";
    case ConvolutionPath::separable: return "separable";
    case ConvolutionPath::fft: return "fft";
  }
  return "unknown";
}

struct ConvolutionSampler::FftData {
  int l0 = 0, l1 = 0;  // rows (v) and columns (u) of the transform
  std::vector<std::complex<double>> kernel_spectrum;  // l0 * (l1/2 + 1), pre-scaled by 1/(l0 l1)
};

struct ConvolutionSampler::Workspace::FftScratch {
  FftwReal real;
  FftwComplex spec;
  FftwPlan forward;
  FftwPlan inverse;
  FftScratch(int l0, int l1)
      : real(static_cast<std::size_t>(l0) * l1),
        spec(static_cast<std::size_t>(l0) * (l1 / 2 + 1)),
        forward(FftwPlan::r2c_2d(l0, l1, real.data(), spec.data())),
        inverse(FftwPlan::c2r_2d(l0, l1, spec.data(), real.data())) {}
};

ConvolutionSampler::Workspace::Workspace() = default;
ConvolutionSampler::Workspace::~Workspace() = default;
ConvolutionSampler::Workspace::Workspace(Workspace&&) noexcept = default;
ConvolutionSampler::Workspace& ConvolutionSampler::Workspace::operator=(Workspace&&) noexcept = default;

ConvolutionSampler::~ConvolutionSampler() = default;
ConvolutionSampler::ConvolutionSampler(ConvolutionSampler&&) noexcept = default;
ConvolutionSampler& ConvolutionSampler::operator=(ConvolutionSampler&&) noexcept = default;

ConvolutionSampler::ConvolutionSampler(SqrtKernel sqrt_kernel, const RegionGraph& graph, ConvolutionPath path)
    : sk_(std::move(sqrt_kernel)), path_(path), kernel_(sk_.kernel), mesh_(graph.mesh()) {
  if (sk_.frame != SpectralFrame::lattice) {
    throw PreconditionError("sampler needs a lattice-frame square root kernel");
  }
  if (std::abs(sk_.mesh_eps - graph.mesh()) > 1e-12 * graph.mesh()) {
    throw PreconditionError("square root kernel mesh " + std::to_string(sk_.mesh_eps) +
                            " does not match region mesh " + std::to_string(graph.mesh()));
  }
  radius_ = sk_.support_radius;
  nu_ = graph.u_extent();
  nv_ = graph.v_extent();
  wu_ = nu_ + 2 * radius_;
  wv_ = nv_ + 2 * radius_;
  if (static_cast<double>(wu_) * wv_ > static_cast<double>(kMaxWindowPoints)) {
    throw ResourceError("noise window of " + std::to_string(wu_) + " x " + std::to_string(wv_) +
                        " points exceeds the cap of " + std::to_string(kMaxWindowPoints));
  }
  site_u_.resize(graph.size());
  site_v_.resize(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const Z2Index z = graph.index(static_cast<int>(i));
    site_u_[i] = z.u - graph.u_min();
    site_v_[i] = z.v - graph.v_min();
  }
  if (path_ == ConvolutionPath::automatic) {
    if (sk_.separable()) {
      path_ = ConvolutionPath::separable;
    } else if (window_points() > kDirectWindowLimit) {
      path_ = ConvolutionPath::fft;
    } else {
      path_ = ConvolutionPath::direct;
    }
  }
  if (path_ == ConvolutionPath::separable && !sk_.separable()) {
    throw PreconditionError("separable path requested for a stencil that does not factor");
  }
  if (path_ == ConvolutionPath::fft) {
    auto data = std::make_shared<FftData>();
    data->l0 = smooth_size(wv_);
    data->l1 = smooth_size(wu_);
    const int l0 = data->l0, l1 = data->l1, lc = l1 / 2 + 1;
    FftwReal buf(static_cast<std::size_t>(l0) * l1);
    FftwComplex spec(static_cast<std::size_t>(l0) * lc);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int m2 = -radius_; m2 <= radius_; ++m2) {
      for (int m1 = -radius_; m1 <= radius_; ++m1) {
        const int r = ((m2 % l0) + l0) % l0;
        const int c = ((m1 % l1) + l1) % l1;
        buf[static_cast<std::size_t>(r) * l1 + c] += sk_.at(m1, m2);
      }
    }
    FftwPlan plan = FftwPlan::r2c_2d(l0, l1, buf.data(), spec.data());
    plan.execute();
    const double scale = 1.0 / (static_cast<double>(l0) * l1);
    data->kernel_spectrum.resize(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
      data->kernel_spectrum[i] = std::complex<double>(spec[i][0], spec[i][1]) * scale;
    }
    fft_ = std::move(data);
  }
}

ConvolutionSampler::Workspace ConvolutionSampler::make_workspace() const {
  Workspace ws;
  ws.noise.resize(window_points());
  if (path_ == ConvolutionPath::separable) ws.tmp.resize(static_cast<std::size_t>(wv_) * nu_);
  if (path_ == ConvolutionPath::fft) ws.fft = std::make_unique<Workspace::FftScratch>(fft_->l0, fft_->l1);
  return ws;
}

void ConvolutionSampler::draw_noise(std::uint64_t seed, std::uint64_t stream, std::span<double> noise) const {
  if (noise.size() != window_points()) throw PreconditionError("draw_noise: buffer size mismatch");
  StreamRng rng(seed, stream);
  for (double& w : noise) w = rng.normal();
}

void ConvolutionSampler::sample_into(std::uint64_t seed, std::uint64_t stream, Workspace& ws,
                                     std::span<double> out) const {
  if (out.size() != site_u_.size()) throw PreconditionError("sample_into: output size mismatch");
  if (ws.noise.size() != window_points()) ws = make_workspace();
  draw_noise(seed, stream, ws.noise);
  switch (path_) {
    case ConvolutionPath::direct: convolve_direct(ws.noise, out); break;
    case ConvolutionPath::separable: convolve_separable(ws.noise, ws, out); break;
    case ConvolutionPath::fft: convolve_fft(ws.noise, ws, out); break;
    case ConvolutionPath::automatic: break;
  }
}

FieldSample ConvolutionSampler::sample(std::uint64_t seed, std::uint64_t stream) const {
  FieldSample s;
  s.values.resize(site_u_.size());
  s.mesh_eps = mesh_;
  s.seed = seed;
  s.stream = stream;
  s.method = SamplerMethod::sqrt_convolution;
  s.kernel = kernel_;
  Workspace ws = make_workspace();
  sample_into(seed, stream, ws, s.values);
  return s;
}

// Site (u, v) of the box sits at window point (u + M, v + M); f there is
// sum_m eta(m) W(u + M - m1, v + M - m2).
void ConvolutionSampler::convolve_direct(std::span<const double> noise, std::span<double> out) const {
  const int m = radius_;
  const int w = sk_.width();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int cu = site_u_[i] + m;
    const int cv = site_v_[i] + m;
    double acc = 0.0;
    for (int m2 = -m; m2 <= m; ++m2) {
      const double* row = noise.data() + static_cast<std::size_t>(cv - m2) * wu_ + cu;
      const double* eta = sk_.table.data() + static_cast<std::size_t>(m2 + m) * w + m;
      for (int m1 = -m; m1 <= m; ++m1) acc += eta[m1] * row[-m1];
    }
    out[i] = acc;
  }
}

void ConvolutionSampler::convolve_separable(std::span<const double> noise, Workspace& ws,
                                            std::span<double> out) const {
  const int m = radius_;
  const double* f = sk_.factor.data() + m;
  // Along u for every window row.
  for (int v = 0; v < wv_; ++v) {
    const double* row = noise.data() + static_cast<std::size_t>(v) * wu_;
    double* dst = ws.tmp.data() + static_cast<std::size_t>(v) * nu_;
    for (int u = 0; u < nu_; ++u) {
      double acc = 0.0;
      const double* center = row + u + m;
      for (int j = -m; j <= m; ++j) acc += f[j] * center[-j];
      dst[u] = acc;
    }
  }
  // Along v, only where sites are.
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int u = site_u_[i];
    const int cv = site_v_[i] + m;
    double acc = 0.0;
    for (int j = -m; j <= m; ++j) acc += f[j] * ws.tmp[static_cast<std::size_t>(cv - j) * nu_ + u];
    out[i] = acc;
  }
}

void ConvolutionSampler::convolve_fft(std::span<const double> noise, Workspace& ws, std::span<double> out) const {
  const int l0 = fft_->l0, l1 = fft_->l1;
  auto& sc = *ws.fft;
  std::fill(sc.real.begin(), sc.real.end(), 0.0);
  for (int v = 0; v < wv_; ++v) {
    std::copy_n(noise.data() + static_cast<std::size_t>(v) * wu_, wu_, sc.real.data() + static_cast<std::size_t>(v) * l1);
  }
  sc.forward.execute();
  for (std::size_t i = 0; i < sc.spec.size(); ++i) {
    const std::complex<double> z = std::complex<double>(sc.spec[i][0], sc.spec[i][1]) * fft_->kernel_spectrum[i];
    sc.spec[i][0] = z.real();
    sc.spec[i][1] = z.imag();
  }
  sc.inverse.execute();
  // Interior window points never wrap because l >= window size.
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sc.real[static_cast<std::size_t>(site_v_[i] + radius_) * l1 + (site_u_[i] + radius_)];
  }
  (void)l0;
}

FieldSample sample_sqrt_convolution(const SqrtKernel& sqrt_kernel, const RegionGraph& graph, std::uint64_t seed,
                                    std::uint64_t stream) {
  return ConvolutionSampler(sqrt_kernel, graph).sample(seed, stream);
}

// ---- Hermite series -------------------------------------------------------

namespace {

// Poisson(lambda) upper tail P[X > n], summed from the mode outward so that
// tiny tails are not lost to cancellation.
double poisson_upper_tail(int n, double lambda) {
  if (lambda <= 0.0) return 0.0;
  if (n + 1 < lambda) {
    // Below the mode: 1 - P[X <= n], the lower tail summed downward from n.
    double term = std::exp(-lambda + n * std::log(lambda) - std::lgamma(n + 1.0));
    double lower = 0.0;
    for (int k = n; k >= 0; --k) {
      lower += term;
      term *= k / lambda;
      if (term < 1e-18 * lower) break;
    }
    return std::max(0.0, 1.0 - lower);
  }
  // log pmf at k = n + 1, then forward recursion.
  double log_pmf = -lambda + (n + 1) * std::log(lambda) - std::lgamma(n + 2.0);
  double term = std::exp(log_pmf);
  double total = 0.0;
  for (int k = n + 1; k < n + 100000; ++k) {
    total += term;
    term *= lambda / (k + 1);
    if (term < 1e-18 * total || term == 0.0) break;
  }
  return std::min(total, 1.0);
}

void hermite_weights(int n, double t, std::vector<double>& w) {
  w.resize(n + 1);
  if (t == 0.0) {
    std::fill(w.begin(), w.end(), 0.0);
    w[0] = 1.0;
    return;
  }
  // Log space: e^{-t^2/2} alone underflows for |t| > 38.
  const double lt = std::log(std::abs(t));
  for (int i = 0; i <= n; ++i) {
    const double mag = std::exp(-0.5 * t * t + i * lt - 0.5 * std::lgamma(i + 1.0));
    w[i] = (t < 0.0 && (i & 1)) ? -mag : mag;
  }
}

}  // namespace

double hermite_tail_variance(int truncation, Vec2 x) {
  if (truncation < 0) throw PreconditionError("hermite truncation must be >= 0");
  const double q1 = poisson_upper_tail(truncation, x.x * x.x);
  const double q2 = poisson_upper_tail(truncation, x.y * x.y);
  // 1 - (1 - q1)(1 - q2)
  return q1 + q2 - q1 * q2;
}

int hermite_truncation_for_radius(double radius, double tol) {
  if (!(radius >= 0.0)) throw PreconditionError("radius must be >= 0");
  // The tail grows with |x_k| on each axis, so the corner is the worst point.
  for (int n = 0; n < 100000; ++n) {
    if (hermite_tail_variance(n, {radius, radius}) <= tol) return n;
  }
  throw ResourceError("hermite truncation for radius " + std::to_string(radius) + " exceeds 1e5");
}

HermiteSampler::HermiteSampler(int truncation, std::vector<Vec2> points, double tail_tol)
    : n_(truncation), points_(std::move(points)) {
  if (truncation < 0) throw PreconditionError("hermite truncation must be >= 0");
  const double work = static_cast<double>(points_.size()) * (n_ + 1.0) * (n_ + 1.0);
  if (work > 2e10) throw ResourceError("hermite sampler needs " + std::to_string(work) + " operations per draw");
  for (const Vec2 x : points_) {
    if (hermite_tail_variance(n_, x) > tail_tol) {
      const double r = std::max(std::abs(x.x), std::abs(x.y));
      throw PreconditionError("point (" + std::to_string(x.x) + ", " + std::to_string(x.y) +
                              ") lies outside the certified radius of truncation " + std::to_string(n_) +
                              "; it needs N >= " + std::to_string(hermite_truncation_for_radius(r, tail_tol)));
    }
  }
  const std::size_t k = static_cast<std::size_t>(n_) + 1;
  w1_.resize(points_.size() * k);
  w2_.resize(points_.size() * k);
  std::vector<double> w;
  for (std::size_t p = 0; p < points_.size(); ++p) {
    hermite_weights(n_, points_[p].x, w);
    std::copy(w.begin(), w.end(), w1_.begin() + p * k);
    hermite_weights(n_, points_[p].y, w);
    std::copy(w.begin(), w.end(), w2_.begin() + p * k);
  }
}

void HermiteSampler::sample_into(std::uint64_t seed, std::uint64_t stream, std::span<double> out) const {
  if (out.size() != points_.size()) throw PreconditionError("hermite sample_into: output size mismatch");
  const std::size_t k = static_cast<std::size_t>(n_) + 1;
  std::vector<double> a(k * k);
  StreamRng rng(seed, stream);
  for (double& c : a) c = rng.normal();  // a[i * k + j] multiplies x1^i x2^j
  for (std::size_t p = 0; p < points_.size(); ++p) {
    const double* w1 = w1_.data() + p * k;
    const double* w2 = w2_.data() + p * k;
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (w1[i] == 0.0) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < k; ++j) row += a[i * k + j] * w2[j];
      acc += w1[i] * row;
    }
    out[p] = acc;
  }
}

FieldSample sample_hermite_series(int truncation, std::span<const Vec2> points, std::uint64_t seed,
                                  std::uint64_t stream) {
  HermiteSampler sampler(truncation, std::vector<Vec2>(points.begin(), points.end()));
  FieldSample s;
  s.values.resize(points.size());
  s.seed = seed;
  s.stream = stream;
  s.method = SamplerMethod::hermite_series;
  sampler.sample_into(seed, stream, s.values);
  return s;
}

// ---- Cross validation -----------------------------------------------------

std::vector<ProbePair> default_probe_pairs(double eps) {
  const double h = 0.5 * eps;
  return {
      {{0, 0}, {eps, 0}},         {{0, 0}, {0, eps}},         {{0, 0}, {h, h}},
      {{0, 0}, {2 * eps, 0}},     {{eps, eps}, {3 * h, h}},   {{0, 0}, {2 * eps, 2 * eps}},
      {{eps, 0}, {eps, 3 * eps}}, {{h, h}, {3 * h, 5 * h}},
  };
}

CrossValidationReport cross_validate_samplers(const Kernel& kernel, double eps, std::uint64_t n, std::uint64_t seed,
                                              std::vector<ProbePair> probes) {
  if (kernel.kind() != KernelKind::bargmann_fock) {
    throw PreconditionError("cross validation needs the Bargmann-Fock kernel (the only one with a series sampler)");
  }
  if (n < 2) throw PreconditionError("cross validation needs n >= 2");
  if (probes.empty()) probes = default_probe_pairs(eps);
  auto key = [](const ProbePair& p) { return std::make_tuple(p.x.x, p.x.y, p.y.x, p.y.y); };
  std::sort(probes.begin(), probes.end(), [&](const ProbePair& l, const ProbePair& r) { return key(l) < key(r); });

  // Distinct probe points; the origin is always first.
  std::vector<LatticeSite> sites{{0, 0}};
  auto point_slot = [&](Vec2 x) {
    const LatticeSite s = site_at(eps, x);
    if (s.a < 0 || s.b < 0) throw PreconditionError("probe points must have non-negative coordinates");
    auto it = std::find(sites.begin(), sites.end(), s);
    if (it != sites.end()) return static_cast<int>(it - sites.begin());
    sites.push_back(s);
    return static_cast<int>(sites.size() - 1);
  };
  std::vector<std::pair<int, int>> slots;
  for (const ProbePair& p : probes) slots.emplace_back(point_slot(p.x), point_slot(p.y));

  int amax = 0, bmax = 0;
  for (const LatticeSite s : sites) {
    amax = std::max(amax, s.a);
    bmax = std::max(bmax, s.b);
  }
  const RegionGraph graph = RegionGraph::rectangle_cells(eps, std::max(1, (amax + 1) / 2), std::max(1, (bmax + 1) / 2));
  std::vector<int> graph_index;
  std::vector<Vec2> points;
  double radius = 0.0;
  for (const LatticeSite s : sites) {
    graph_index.push_back(graph.find(s));
    points.push_back(site_position(eps, s));
    radius = std::max({radius, points.back().x, points.back().y});
  }
  const ConvolutionSampler conv(build_lattice_sqrt_kernel(kernel, eps), graph);
  const HermiteSampler herm(hermite_truncation_for_radius(radius), points);

  const std::uint64_t conv_seed = derive_seed(seed, 1);
  const std::uint64_t herm_seed = derive_seed(seed, 2);
  struct Draw {
    std::vector<double> c, h;
  };
  struct Ws {
    ConvolutionSampler::Workspace conv;
    std::vector<double> field;
  };
  const auto draws = run_replicates(
      n, [&] { return Ws{conv.make_workspace(), std::vector<double>(graph.size())}; },
      [&](Ws& ws, std::uint64_t r) {
        Draw d;
        conv.sample_into(conv_seed, r, ws.conv, ws.field);
        d.c.resize(sites.size());
        for (std::size_t k = 0; k < sites.size(); ++k) d.c[k] = ws.field[graph_index[k]];
        d.h.resize(sites.size());
        herm.sample_into(herm_seed, r, d.h);
        return d;
      });

  CrossValidationReport report;
  std::vector<double> c0, h0;
  c0.reserve(n);
  h0.reserve(n);
  for (const Draw& d : draws) {
    c0.push_back(d.c[0]);
    h0.push_back(d.h[0]);
  }
  const KsResult ks = ks_two_sample(c0, h0);
  report.ks_statistic = ks.statistic;
  report.ks_p_value = ks.p_value;
  for (std::size_t q = 0; q < probes.size(); ++q) {
    Accumulator ac, ah;
    for (const Draw& d : draws) {
      ac.add(d.c[slots[q].first] * d.c[slots[q].second]);
      ah.add(d.h[slots[q].first] * d.h[slots[q].second]);
    }
    PairCheck pc;
    pc.pair = probes[q];
    pc.target = eval_kappa(kernel, {probes[q].x.x - probes[q].y.x, probes[q].x.y - probes[q].y.y});
    pc.convolution = ac.estimate(conv_seed);
    pc.hermite = ah.estimate(herm_seed);
    const double se = std::hypot(pc.convolution.std_error, pc.hermite.std_error);
    pc.z_score = se > 0.0 ? (pc.convolution.mean - pc.hermite.mean) / se : 0.0;
    report.max_abs_z = std::max(report.max_abs_z, std::abs(pc.z_score));
    report.pairs.push_back(pc);
  }
  report.pass = report.ks_p_value > 0.01 && report.max_abs_z < 4.0;
  return report;
}

}  // namespace gfperc
