// Benchmark of the OpenMP kernels against their serial reference
// implementations. Each kernel pair must agree bit-for-bit; timings show the
// parallel speedup on this machine.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "easi/calibration.hpp"
#include "easi/datagen.hpp"
#include "easi/estimator.hpp"
#include "easi/parallel.hpp"
#include "easi/taxopt.hpp"
#include "easi/welfare.hpp"

using namespace easi;

namespace {

double time_once(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const std::string& name, double serial, double parallel, bool equal) {
  std::printf("%-28s %9.3fs %9.3fs %7.2fx  %s\n", name.c_str(), serial, parallel,
              serial / parallel, equal ? "identical" : "MISMATCH");
}

datagen::SynthConfig bench_config(std::int64_t n) {
  datagen::SynthConfig c;
  c.n = n;
  c.seed = 99;
  c.x_sd = 0.5;
  c.eps_sd = 0.02;
  auto market = [](std::initializer_list<double> p, const char* s, double prob) {
    datagen::Market m;
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
  datagen::ZSpec z1;
  z1.kind = datagen::ZSpec::Kind::Uniform;
  z1.lo = -1;
  z1.hi = 1;
  datagen::ZSpec z2;
  z2.kind = datagen::ZSpec::Kind::Normal;
  z2.sd = 0.5;
  c.z = {z1, z2};
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  std::int64_t n = argc > 1 ? std::atoll(argv[1]) : 200000;
  std::printf("kernel benchmark, n = %lld households, %d threads\n",
              static_cast<long long>(n), max_threads());
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial", "parallel", "speedup");

  EasiParams truth = calibration::recovery_truth();
  datagen::SynthConfig cfg = bench_config(n);

  // Population generation.
  datagen::SynthResult pop_s, pop_p;
  double ts = time_once([&] { pop_s = datagen::generate_population(cfg, truth, false); });
  double tp = time_once([&] { pop_p = datagen::generate_population(cfg, truth, true); });
  bool eq = true;
  for (std::size_t i = 0; i < pop_s.households.size() && eq; ++i)
    eq = pop_s.households[i].x == pop_p.households[i].x &&
         (pop_s.households[i].w - pop_p.households[i].w).cwiseAbs().maxCoeff() == 0.0;
  row("generate_population", ts, tp, eq);

  // Moment accumulation.
  est::FitConfig fc;
  fc.R = 2;
  est::DesignMap map(3, 2, 2, false);
  est::EstimationData data = est::prepare_data(pop_s.households, map, fc);
  Vec y(data.households.size());
  for (std::size_t i = 0; i < data.households.size(); ++i)
    y(i) = data.households[i].x - data.households[i].p.dot(data.households[i].w);
  est::Moments mom_s, mom_p;
  ts = time_once([&] { mom_s = est::accumulate_moments(data, map, y, false); });
  tp = time_once([&] { mom_p = est::accumulate_moments(data, map, y, true); });
  eq = (mom_s.Mhh - mom_p.Mhh).cwiseAbs().maxCoeff() == 0.0;
  for (std::size_t e = 0; e < mom_s.G.size(); ++e)
    eq = eq && (mom_s.G[e] - mom_p.G[e]).cwiseAbs().maxCoeff() == 0.0;
  row("accumulate_moments", ts, tp, eq);

  // Population EV.
  welfare::TaxScenario sc;
  sc.tax_good = 0;
  for (const char* label : {"4", "5", "6"}) {
    welfare::StratumScenario s;
    s.label = label;
    s.theta = 0.0076;
    s.price0 = 0.16;
    s.q0 = 150;
    s.users = 1;
    s.eps_m = -0.7;
    s.x_rep = 70;
    s.w0 = truth.b.row(0).transpose();
    sc.strata.push_back(s);
  }
  welfare::PopulationEv ev_s, ev_p;
  ts = time_once([&] {
    ev_s = welfare::aggregate_population(pop_s.households, truth, sc, welfare::EvMode::Exact,
                                         false);
  });
  tp = time_once([&] {
    ev_p = welfare::aggregate_population(pop_s.households, truth, sc, welfare::EvMode::Exact,
                                         true);
  });
  row("aggregate_population(EV)", ts, tp, ev_s.total == ev_p.total);

  // Optimizer grid.
  EasiParams prm = calibration::colombian_utilities();
  welfare::TaxScenario t11 = calibration::electricity_tax_scenario(prm);
  taxopt::OptimizerConfig ocfg;
  ocfg.grid_n = 400;
  taxopt::OptimizeResult or_s, or_p;
  ts = time_once([&] { or_s = taxopt::optimize(t11, prm, ocfg, false); });
  tp = time_once([&] { or_p = taxopt::optimize(t11, prm, ocfg, true); });
  row("optimize(grid 400x400)", ts, tp,
      or_s.theta == or_p.theta && or_s.objective == or_p.objective);

  return 0;
}
