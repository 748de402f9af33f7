#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "easi/calibration.hpp"
#include "easi/datagen.hpp"

using namespace easi;
using namespace easi::datagen;

namespace {

SynthConfig recovery_config(std::int64_t n, std::uint64_t seed, double eps_sd) {
  SynthConfig c;
  c.n = n;
  c.seed = seed;
  c.x_mean = 0.0;
  c.x_sd = 0.5;
  c.eps_sd = eps_sd;
  auto market = [](std::initializer_list<double> p, const char* s, double prob) {
    Market m;
    m.log_prices = Vec(p.size());
    int i = 0;
    for (double v : p) m.log_prices(i++) = v;
    m.stratum = s;
    m.probability = prob;
    return m;
  };
  c.markets = {market({0, 0, 0}, "4", 0.25), market({0.10, -0.05, 0.03}, "4", 0.20),
               market({-0.08, 0.06, -0.02}, "5", 0.20),
               market({0.05, 0.10, -0.07}, "5", 0.20),
               market({-0.12, -0.04, 0.09}, "6", 0.15)};
  ZSpec z1;
  z1.kind = ZSpec::Kind::Uniform;
  z1.lo = -1.0;
  z1.hi = 1.0;
  ZSpec z2;
  z2.kind = ZSpec::Kind::Categorical;
  z2.values = {-0.3, 0.7};
  z2.probs = {0.7, 0.3};
  c.z = {z1, z2};
  return c;
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generation is deterministic and thread-count invariant") {
  EasiParams truth = calibration::recovery_truth();
  SynthConfig cfg = recovery_config(2000, 42, 0.02);
  SynthResult a = generate_population(cfg, truth, true);
  SynthResult b = generate_population(cfg, truth, true);
  SynthResult serial = generate_population(cfg, truth, false);
  REQUIRE(a.households.size() == 2000);
  for (std::size_t i = 0; i < a.households.size(); ++i) {
    CHECK(a.households[i].x == b.households[i].x);
    CHECK((a.households[i].w - b.households[i].w).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.households[i].x == serial.households[i].x);
    CHECK((a.households[i].w - serial.households[i].w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.households[i].eps - serial.households[i].eps).cwiseAbs().maxCoeff() == 0.0);
  }

  // Byte-identical CSV on rerun.
  write_model_csv("/tmp/easi_dg_a.csv", a.households, truth.J, truth.L);
  write_model_csv("/tmp/easi_dg_b.csv", b.households, truth.J, truth.L);
  CHECK(file_bytes("/tmp/easi_dg_a.csv") == file_bytes("/tmp/easi_dg_b.csv"));
  std::remove("/tmp/easi_dg_a.csv");
  std::remove("/tmp/easi_dg_b.csv");
}

TEST_CASE("shares sum to one and eps adds to zero per household") {
  EasiParams truth = calibration::recovery_truth();
  SynthConfig cfg = recovery_config(3000, 7, 0.02);
  SynthResult r = generate_population(cfg, truth);
  for (const auto& h : r.households) {
    CHECK(std::abs(h.w.sum() - 1.0) < 1e-9);
    CHECK(std::abs(h.eps.sum()) == 0.0);
  }
}

TEST_CASE("engel-curve-only regime: p = 0, eps_sd = 0 gives exact shares") {
  EasiParams truth = calibration::recovery_truth();
  SynthConfig cfg = recovery_config(500, 11, 0.0);
  cfg.markets = {cfg.markets[0]};  // single market at base prices
  cfg.markets[0].probability = 1.0;
  SynthResult r = generate_population(cfg, truth);
  for (const auto& h : r.households) {
    Vec expect = Vec::Zero(3);
    for (int q = 0; q <= truth.R; ++q) expect += std::pow(h.x, q) * truth.b.row(q).transpose();
    expect += truth.C.transpose() * h.z + (truth.D.transpose() * h.z) * h.x;
    CHECK((h.w - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("law of large numbers: eps component means shrink as 3 sd/sqrt(N)") {
  EasiParams truth = calibration::recovery_truth();
  const std::int64_t N = 50000;
  SynthConfig cfg = recovery_config(N, 123, 0.05);
  SynthResult r = generate_population(cfg, truth);
  Vec mean = Vec::Zero(3);
  for (const auto& h : r.households) mean += h.eps;
  mean /= static_cast<double>(N);
  double bound = 3.0 * 0.05 / std::sqrt(static_cast<double>(N));
  for (int j = 0; j < 3; ++j) CHECK(std::abs(mean(j)) < bound);

  // Adding-up forces the sample covariance rows to sum to ~0.
  Mat cov = Mat::Zero(3, 3);
  for (const auto& h : r.households) cov += (h.eps - mean) * (h.eps - mean).transpose();
  cov /= static_cast<double>(N - 1);
  CHECK(cov.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("out-of-range shares are flagged, kept, and optionally renormalized") {
  EasiParams truth = calibration::recovery_truth();
  SynthConfig cfg = recovery_config(4000, 19, 0.35);  // noisy enough to cross 0
  SynthResult r = generate_population(cfg, truth);
  REQUIRE(r.households.size() == 4000);
  CHECK(!r.flagged.empty());
  bool any_negative = false;
  for (auto idx : r.flagged)
    if ((r.households[idx].w.array() < 0).any()) any_negative = true;
  CHECK(any_negative);

  cfg.truncate_renormalize = true;
  SynthResult t = generate_population(cfg, truth);
  for (auto idx : t.flagged) {
    CHECK((t.households[idx].w.array() >= 0).all());
    CHECK(std::abs(t.households[idx].w.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("solver failures carry the household index") {
  EasiParams bad = EasiParams::zeros(2, 0, 1);
  bad.b.row(0) = Vec{{0.5, 0.5}}.transpose();
  bad.B = sym_from_free(Vec{{0.5}}, 2);
  bad.validate();
  SynthConfig cfg;
  cfg.n = 3;
  cfg.seed = 1;
  Market m;
  m.log_prices = Vec(2);
  m.log_prices << 1.0, -1.0;  // denominator exactly zero
  m.stratum = "4";
  m.probability = 1.0;
  cfg.markets = {m};
  cfg.x_sd = 0.1;
  CHECK_THROWS_WITH_AS(generate_population(cfg, bad),
                       doctest::Contains("household 0"), NoConvergence);
}

TEST_CASE("model csv round trip preserves values exactly") {
  EasiParams truth = calibration::recovery_truth();
  SynthConfig cfg = recovery_config(200, 5, 0.02);
  SynthResult r = generate_population(cfg, truth);
  write_model_csv("/tmp/easi_dg_rt.csv", r.households, truth.J, truth.L);
  int J = 0, L = 0;
  auto back = read_model_csv("/tmp/easi_dg_rt.csv", J, L);
  REQUIRE(J == truth.J);
  REQUIRE(L == truth.L);
  REQUIRE(back.size() == r.households.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].x == r.households[i].x);
    CHECK((back[i].w - r.households[i].w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back[i].p - r.households[i].p).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back[i].stratum == r.households[i].stratum);
  }
  std::remove("/tmp/easi_dg_rt.csv");
}

TEST_CASE("synth config json round trip and validation") {
  SynthConfig cfg = recovery_config(100, 9, 0.01);
  SynthConfig back = SynthConfig::from_json(cfg.to_json());
  CHECK(back.n == cfg.n);
  CHECK(back.seed == cfg.seed);
  CHECK(back.markets.size() == cfg.markets.size());
  CHECK(back.z.size() == cfg.z.size());
  CHECK(back.eps_sd == cfg.eps_sd);

  SynthConfig bad = cfg;
  bad.markets[0].probability = 0.5;  // probabilities no longer sum to 1
  CHECK_THROWS_AS(bad.validate(), DataError);
}
