#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "gfperc/error.hpp"
#include "gfperc/harness.hpp"
#include "gfperc/percolation.hpp"

using namespace gfperc;

TEST_SUITE("harness") {

TEST_CASE("logit values and censoring") {
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(std::exp(1.0) / (1.0 + std::exp(1.0))) == doctest::Approx(1.0));
  const std::vector<double> p{-0.1, 0.0, 0.1, 0.2};
  const std::vector<MCEstimate> e{{0.0, 0.0, 100, 0}, {0.5, 0.05, 100, 0}, {0.7, 0.04, 100, 0}, {1.0, 0.0, 100, 0}};
  const LogitCurve c = logit_curve(p, e);
  CHECK(c.censored == 2);
  CHECK(c.points[0].censored);
  CHECK(c.points[1].g == 0.0);
  CHECK(c.points[1].g_stderr == doctest::Approx(0.05 / 0.25));
  const SlopeFit s = logit_slope(c, 0.0, 0.1);
  CHECK(s.used == 2);
  CHECK(s.slope == doctest::Approx(logit(0.7) / 0.1));
}

TEST_CASE("decay fit recovers a synthetic rate") {
  const std::vector<double> R{4, 8, 12, 16, 20};
  std::vector<double> f;
  for (double r : R) f.push_back(std::exp(-0.3 * r));
  const DecayFit d = decay_fit(R, f);
  CHECK(std::abs(d.slope + 0.3) <= 1e-6);
  CHECK(d.decaying);
  CHECK(d.censored == 0);
}

TEST_CASE("decay fit rejects flat or censored failures") {
  const std::vector<double> R{10, 20, 40};
  const std::vector<double> flat{0.70, 0.69, 0.70};
  const std::vector<double> se{0.005, 0.005, 0.005};
  CHECK_FALSE(decay_fit(R, flat, se).decaying);
  const std::vector<double> censored{0.2, 0.0, 0.0};
  CHECK_THROWS_AS(decay_fit(R, censored), PreconditionError);
}

TEST_CASE("decay fit on simulated crossings") {
  const Kernel bf = Kernel::bargmann_fock();
  const std::vector<double> R{4, 8, 12};
  std::vector<double> f0, s0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    const MCEstimate e = estimate_crossing(bf, 0.5, R[i], 2.0, 0.0, 2000, 10 + i);
    f0.push_back(1.0 - e.mean);
    s0.push_back(e.std_error);
  }
  CHECK_FALSE(decay_fit(R, f0, s0).decaying);

  const std::vector<double> R2{8, 12, 16, 20};
  std::vector<double> f1, s1;
  for (std::size_t i = 0; i < R2.size(); ++i) {
    const MCEstimate e = estimate_crossing(bf, 0.25, R2[i], 2.0, 0.5, 600, 20 + i);
    f1.push_back(1.0 - e.mean);
    s1.push_back(e.std_error);
  }
  CHECK(decay_fit(R2, f1, s1).slope < 0.0);
}

TEST_CASE("summability report") {
  const Kernel bf = Kernel::bargmann_fock();
  const std::vector<int> ks{2, 3, 4};
  const SummabilityReport up = summability_report(bf, 0.5, 1.0, ks, 1000, 1);
  CHECK(up.decreasing);
  CHECK(up.rows.back().partial_sum == doctest::Approx(
                                          up.rows[0].failure.mean + up.rows[1].failure.mean + up.rows[2].failure.mean));
  const SummabilityReport down = summability_report(bf, 0.5, -0.5, ks, 1000, 1);
  CHECK(down.increasing);
  CHECK(down.rows.back().failure.mean > 0.9);
  const SummabilityReport mid = summability_report(bf, 0.5, 0.0, ks, 1000, 1);
  for (const auto& r : mid.rows) CHECK(r.failure.mean > 0.25);
  const std::vector<int> big{7};
  CHECK_THROWS_AS(summability_report(bf, 0.5, 1.0, big, 100, 1), ResourceError);
}

TEST_CASE("duality and negation hold on every shared sample") {
  const SymmetryCheck s = symmetry_check(Kernel::bargmann_fock(), 0.5, 4.0, 2.0, 0.2, 2000, 3);
  CHECK(s.samples == 2000);
  CHECK(s.violations == 0);
  CHECK(s.black_lr.mean + s.negated_tb.mean == doctest::Approx(1.0));
}

TEST_CASE("grids") {
  CHECK(parse_grid("-0.2:0.2:0.05") == std::vector<double>{-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2});
  CHECK(parse_grid("10,20,40") == std::vector<double>{10, 20, 40});
  CHECK_THROWS_AS(parse_grid("1:0:0.1"), PreconditionError);
  CHECK_THROWS_AS(parse_grid("a,b"), PreconditionError);
  CHECK_THROWS_AS(parse_grid(""), PreconditionError);
}

TEST_CASE("experiment config") {
  ExperimentConfig c;
  c.R = {10, 20};
  c.p = {0.0};
  c.n = 100;
  CHECK_NOTHROW(c.validate());
  const std::string h = c.hash();
  CHECK(h.size() == 16);
  CHECK(c.hash() == h);
  c.seed = 2;
  CHECK(c.hash() != h);
  c.n = 99;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c.n = 100;
  c.p.clear();
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c.p = {0.0};
  c.eps_rule = EpsRule::log_cube_root;
  CHECK(c.eps_for(20.0) == doctest::Approx(std::pow(std::log(20.0), -1.0 / 3.0)));
  c.R = {2.0};
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  CHECK_THROWS_AS(check_work_budget(1e12), ResourceError);
}

TEST_CASE("manifests omit wall time unless asked") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "gfperc_manifest_a.json", b = dir / "gfperc_manifest_b.json";
  ExperimentConfig c;
  c.R = {1};
  c.p = {0};
  write_manifest(a, c.to_json(), c.hash(), "{\"x\":1}", false, 12.5);
  write_manifest(b, c.to_json(), c.hash(), "{\"x\":1}", true, 12.5);
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return nlohmann::json::parse(ss.str());
  };
  const auto ja = read(a), jb = read(b);
  CHECK_FALSE(ja.contains("wall_seconds"));
  CHECK(jb["wall_seconds"] == 12.5);
  CHECK(ja["config_hash"] == c.hash());
  CHECK(ja["csv_schema"] == kCsvSchemaVersion);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

}
