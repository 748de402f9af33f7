// easi_lab: synth -> ingest -> fit -> elasticities -> welfare -> optimize ->
// report pipeline driver. Every subcommand takes --manifest for a
// reproducibility record and returns 0 on success, 2 on usage errors, 3 on
// data errors, 4 on numerical failures.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "easi/calibration.hpp"
#include "easi/csv.hpp"
#include "easi/datagen.hpp"
#include "easi/elasticity.hpp"
#include "easi/estimator.hpp"
#include "easi/ingest.hpp"
#include "easi/parallel.hpp"
#include "easi/runmeta.hpp"
#include "easi/taxopt.hpp"
#include "easi/welfare.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace easi;

namespace {

struct ManifestScope {
  RunManifest m;
  std::string path;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  ~ManifestScope() {
    if (path.empty()) return;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
      m.save(path);
    } catch (const std::exception& e) {
      std::cerr << "manifest: " << e.what() << "\n";
    }
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << text;
  if (text.empty() || text.back() != '\n') os << "\n";
}

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

EasiParams load_params_arg(const std::string& spec) {
  if (spec == "builtin" || spec == "builtin:colombia") return calibration::colombian_utilities();
  if (spec == "builtin:recovery") return calibration::recovery_truth();
  if (spec == "builtin:concave") return calibration::concave_calibrated();
  return EasiParams::load(spec);
}

datagen::SynthConfig default_synth_config(const EasiParams& prm) {
  datagen::SynthConfig c;
  c.n = 1000;
  c.seed = 1;
  c.x_sd = 0.5;
  c.eps_sd = 0.02;
  auto market = [&](std::vector<double> delta, const char* s, double prob) {
    datagen::Market m;
    m.log_prices = Vec::Zero(prm.J);
    for (int j = 0; j < prm.J && j < static_cast<int>(delta.size()); ++j)
      m.log_prices(j) = delta[j];
    m.stratum = s;
    m.probability = prob;
    return m;
  };
  c.markets = {market({0, 0, 0, 0}, "4", 0.25),
               market({0.08, -0.05, 0.03, -0.02}, "4", 0.20),
               market({-0.06, 0.07, -0.02, 0.04}, "5", 0.20),
               market({0.05, 0.09, -0.06, 0.02}, "5", 0.20),
               market({-0.10, -0.04, 0.08, -0.05}, "6", 0.15)};
  for (int l = 0; l < prm.L; ++l) {
    datagen::ZSpec z;
    z.kind = datagen::ZSpec::Kind::Uniform;
    z.lo = -1.0;
    z.hi = 1.0;
    c.z.push_back(z);
  }
  return c;
}

int run_synth(const std::string& params_spec, const std::string& config_path,
              std::int64_t n, std::int64_t seed, double eps_sd, const std::string& out,
              const std::string& truth_out, const std::string& report_path,
              ManifestScope& ms) {
  EasiParams prm = load_params_arg(params_spec);
  datagen::SynthConfig cfg;
  if (!config_path.empty()) {
    cfg = datagen::SynthConfig::load(config_path);
    ms.m.add_input(config_path);
  } else {
    cfg = default_synth_config(prm);
  }
  if (n > 0) cfg.n = n;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (eps_sd >= 0) cfg.eps_sd = eps_sd;
  ms.m.seed = cfg.seed;
  ms.m.config_hash = hash_bytes(cfg.to_json());

  datagen::SynthResult res = datagen::generate_population(cfg, prm);
  datagen::write_model_csv(out, res.households, prm.J, prm.L);
  ms.m.add_output(out);
  if (!truth_out.empty()) {
    prm.save(truth_out);
    ms.m.add_output(truth_out);
  }
  if (!report_path.empty()) {
    json r;
    r["n"] = res.households.size();
    r["flagged_out_of_range"] = res.flagged;
    r["config"] = json::parse(cfg.to_json());
    write_text(report_path, r.dump(2));
    ms.m.add_output(report_path);
  }
  std::cout << "synth: wrote " << res.households.size() << " households to " << out << " ("
            << res.flagged.size() << " flagged)\n";
  return 0;
}

int run_ingest(const std::string& households, const std::string& tariffs,
               const std::string& providers, const std::string& deflators, double fx,
               const std::string& out, const std::string& report_path, ManifestScope& ms) {
  auto records = ingest::read_households_csv(households);
  auto schedules = ingest::read_tariffs_csv(tariffs);
  ms.m.add_input(households);
  ms.m.add_input(tariffs);
  ingest::ProviderMap pmap;
  if (!providers.empty()) {
    pmap = ingest::read_providers_csv(providers);
    ms.m.add_input(providers);
  }
  ingest::IngestOptions opt;
  opt.fx_rate = fx;
  if (!deflators.empty()) {
    csv::Table t = csv::read(deflators);
    for (std::size_t i = 0; i < t.rows(); ++i)
      opt.deflators[t.cell(i, "month")] = t.num(i, "factor");
    ms.m.add_input(deflators);
  }
  ingest::IngestResult res = ingest::build_households(records, schedules, pmap, opt);
  datagen::write_model_csv(out, res.analysis, ingest::kNumUtilities,
                           static_cast<int>(res.z_names.size()));
  ms.m.add_output(out);
  if (!report_path.empty()) {
    write_text(report_path, res.to_report_json());
    ms.m.add_output(report_path);
  }
  std::cout << "ingest: " << res.analysis.size() << " analysis households, "
            << res.excluded_zero_share.size() << " zero-share and "
            << res.excluded_underflow.size() << " underflow exclusions\n";
  return 0;
}

int run_fit(const std::string& input, const std::string& config_path, int R, int drop_good,
            double ridge, const std::string& ingest_report, const std::string& out,
            const std::string& diag, ManifestScope& ms) {
  est::FitConfig cfg;
  if (!config_path.empty()) {
    cfg = est::FitConfig::load(config_path);
    ms.m.add_input(config_path);
  }
  if (R > 0) cfg.R = R;
  if (drop_good >= 0) cfg.drop_good = drop_good;
  if (ridge >= 0) cfg.ridge = ridge;
  ms.m.config_hash = hash_bytes(cfg.to_json());

  int J = 0, L = 0;
  auto hh = datagen::read_model_csv(input, J, L);
  ms.m.add_input(input);
  est::FitResult res = est::fit(hh, cfg);
  if (!ingest_report.empty()) {
    // Carry the representative-household centering from the ingest stage
    // into the fitted parameter set.
    json r = json::parse(read_text(ingest_report));
    ms.m.add_input(ingest_report);
    if (r.contains("z_center"))
      for (int l = 0; l < res.params.L && l < static_cast<int>(r["z_center"].size()); ++l)
        res.params.z_center(l) = r["z_center"][l].get<double>();
    if (r.contains("reference_expenditure_usd"))
      res.params.x_center = std::log(r["reference_expenditure_usd"].get<double>());
    if (r.contains("z_names")) res.params.z_names = r["z_names"].get<std::vector<std::string>>();
    res.params.good_names = {"electricity", "water", "sewerage", "gas"};
  }
  res.params.save(out);
  ms.m.add_output(out);
  if (!diag.empty()) {
    write_text(diag, res.diagnostics_json());
    ms.m.add_output(diag);
  }
  std::cout << "fit: converged in " << res.outer_iterations << " outer iterations over "
            << res.n_used << " households (max|dy| "
            << (res.y_path_norms.empty() ? 0.0 : res.y_path_norms.back()) << ")\n";
  return 0;
}

int run_elasticities(const std::string& params_path, const std::string& at,
                     const std::string& household, const std::string& input, double at_y,
                     bool has_at_y, const std::string& out, ManifestScope& ms) {
  EasiParams prm = load_params_arg(params_path);
  if (fs::exists(params_path)) ms.m.add_input(params_path);

  EvalPoint pt = EvalPoint::at_x(Vec::Zero(prm.J), Vec::Zero(prm.L), 0.0);
  if (has_at_y) {
    pt = EvalPoint::at_y(Vec::Zero(prm.J), Vec::Zero(prm.L), at_y);
  } else if (!household.empty()) {
    if (input.empty()) throw DataError("--household requires --input model.csv");
    int J = 0, L = 0;
    auto hh = datagen::read_model_csv(input, J, L);
    ms.m.add_input(input);
    auto it = std::find_if(hh.begin(), hh.end(),
                           [&](const Household& h) { return h.id == household; });
    if (it == hh.end()) throw DataError("household " + household + " not found in " + input);
    pt = EvalPoint::at_x(it->p, it->z, it->x);
  } else if (at != "representative") {
    throw DataError("unknown --at mode '" + at + "'");
  }

  ElasticityReport rep = evaluate_elasticities(pt, prm);
  write_text(out, rep.to_json(prm));
  ms.m.add_output(out);
  std::cout << "elasticities: evaluated at y = " << rep.y << ", concave = "
            << (rep.concave ? "yes" : "no") << "\n";
  return 0;
}

void write_welfare_csv(const std::string& path, const welfare::WelfareReport& rep) {
  std::ostringstream os;
  os << csv::full_precision;
  os << "stratum,theta,price1,q1,users_collection_usd,ev_household_usd,ev_total_usd,"
        "ev_over_expenditure\n";
  for (const auto& s : rep.strata)
    os << s.label << "," << s.theta << "," << s.price1 << "," << s.q1 << "," << s.collection
       << "," << s.ev_household << "," << s.ev_total << "," << s.ev_over_exp << "\n";
  os << "total,,,," << rep.total_collection << ",," << rep.total_ev << ",\n";
  write_text(path, os.str());
}

int run_welfare(const std::string& params_path, const std::string& scenario_path,
                const std::string& population, const std::string& mode_str,
                const std::string& out, const std::string& csv_out,
                const std::string& ev_csv, ManifestScope& ms) {
  EasiParams prm = load_params_arg(params_path);
  if (fs::exists(params_path)) ms.m.add_input(params_path);
  welfare::TaxScenario sc = scenario_path == "builtin:tax-scenario"
                                ? calibration::electricity_tax_scenario(prm)
                                : welfare::TaxScenario::load(scenario_path);
  if (fs::exists(scenario_path)) ms.m.add_input(scenario_path);
  ms.m.config_hash = hash_bytes(sc.to_json());

  if (population.empty()) {
    welfare::EvMode mode = welfare::ev_mode_from_string(mode_str.empty() ? "linearized" : mode_str);
    welfare::WelfareReport rep = welfare::evaluate_representative(sc, prm, {}, mode, true);
    write_text(out, rep.to_json());
    ms.m.add_output(out);
    if (!csv_out.empty()) {
      write_welfare_csv(csv_out, rep);
      ms.m.add_output(csv_out);
    }
    std::cout << "welfare: total EV " << rep.total_ev << " USD/month, collection "
              << rep.total_collection << " USD/month\n";
  } else {
    welfare::EvMode mode = welfare::ev_mode_from_string(mode_str.empty() ? "exact" : mode_str);
    int J = 0, L = 0;
    auto hh = datagen::read_model_csv(population, J, L);
    ms.m.add_input(population);
    welfare::PopulationEv agg = welfare::aggregate_population(hh, prm, sc, mode);

    // Per-stratum EV summary (mean, sd, min, max, EV over expenditure).
    auto stats_block = [&](auto pred) {
      double wsum = 0, m1 = 0, m2 = 0, mn = 0, mx = 0, ratio = 0;
      bool first = true;
      for (std::size_t i = 0; i < hh.size(); ++i) {
        if (!pred(hh[i])) continue;
        double ev = agg.ev[i], wt = hh[i].weight;
        wsum += wt;
        m1 += wt * ev;
        m2 += wt * ev * ev;
        ratio += wt * ev / std::exp(hh[i].x);
        mn = first ? ev : std::min(mn, ev);
        mx = first ? ev : std::max(mx, ev);
        first = false;
      }
      json b;
      if (wsum > 0) {
        double mean = m1 / wsum;
        b["mean"] = mean;
        b["sd"] = std::sqrt(std::max(m2 / wsum - mean * mean, 0.0));
        b["min"] = mn;
        b["max"] = mx;
        b["mean_ev_over_expenditure"] = ratio / wsum;
        b["weight"] = wsum;
      }
      return b;
    };
    json j;
    j["households"] = hh.size();
    j["total_ev_level_units"] = agg.total;
    j["total_weight"] = agg.total_weight;
    j["mean_ev_level_units"] = agg.total / std::max(agg.total_weight, 1e-300);
    json by = json::object();
    by["complete"] = stats_block([](const Household&) { return true; });
    for (const auto& s : sc.strata)
      by["stratum " + s.label] =
          stats_block([&](const Household& h) { return h.stratum == s.label; });
    j["ev_stats"] = by;
    write_text(out, j.dump(2));
    ms.m.add_output(out);
    if (!ev_csv.empty()) {
      std::ostringstream os;
      os << csv::full_precision << "hid,stratum,x,ev\n";
      for (std::size_t i = 0; i < hh.size(); ++i)
        os << hh[i].id << "," << hh[i].stratum << "," << hh[i].x << "," << agg.ev[i] << "\n";
      write_text(ev_csv, os.str());
      ms.m.add_output(ev_csv);
    }
    std::cout << "welfare: population of " << hh.size() << ", weighted EV total " << agg.total
              << " (level units)\n";
  }
  return 0;
}

int run_optimize(const std::string& params_path, const std::string& scenario_path,
                 const std::string& config_path, const std::string& out,
                 const std::string& report_path, ManifestScope& ms) {
  EasiParams prm = load_params_arg(params_path);
  if (fs::exists(params_path)) ms.m.add_input(params_path);
  welfare::TaxScenario sc = scenario_path == "builtin:tax-scenario"
                                ? calibration::electricity_tax_scenario(prm)
                                : welfare::TaxScenario::load(scenario_path);
  if (fs::exists(scenario_path)) ms.m.add_input(scenario_path);
  taxopt::OptimizerConfig cfg;
  if (!config_path.empty()) {
    cfg = taxopt::OptimizerConfig::load(config_path);
    ms.m.add_input(config_path);
  }
  ms.m.config_hash = hash_bytes(cfg.to_json());

  taxopt::OptimizeResult res = taxopt::optimize(sc, prm, cfg);
  write_text(out, res.to_json());
  ms.m.add_output(out);
  if (!report_path.empty()) {
    write_text(report_path, taxopt::compare_scenarios_csv(res.baseline, res.alternative));
    ms.m.add_output(report_path);
  }
  std::cout << "optimize: theta =";
  for (double t : res.theta) std::cout << " " << t * 100 << "%";
  std::cout << ", objective " << res.objective << " vs baseline " << res.baseline_objective
            << "\n";
  return 0;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

int run_report(const std::string& params_path, const std::string& welfare_path,
               const std::string& optimize_path, const std::string& ev_csv,
               const std::string& out_dir, ManifestScope& ms) {
  fs::create_directories(out_dir);
  EasiParams prm = load_params_arg(params_path);
  if (fs::exists(params_path)) ms.m.add_input(params_path);
  auto gname = [&](int j) {
    return j < static_cast<int>(prm.good_names.size()) ? prm.good_names[j]
                                                       : "good" + std::to_string(j + 1);
  };

  // Engel curves in plot-ready long format.
  {
    std::vector<double> grid;
    for (int i = 0; i <= 60; ++i) grid.push_back(-1.5 + i * 0.05);
    Mat curves = engel_curve(prm, Vec::Zero(prm.L), Vec::Zero(prm.J), grid);
    std::ostringstream os;
    os << "x,series,value\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (int j = 0; j < prm.J; ++j)
        os << fmt(grid[i], 2) << "," << gname(j) << "," << fmt(curves(i, j), 6) << "\n";
    write_text(out_dir + "/engel_curves.csv", os.str());
    ms.m.add_output(out_dir + "/engel_curves.csv");
  }

  // Elasticity tables at the representative point.
  {
    ElasticityReport rep =
        evaluate_elasticities(EvalPoint::at_x(Vec::Zero(prm.J), Vec::Zero(prm.L), 0.0), prm);
    std::ostringstream os;
    os << "good,b_own,slutsky_own";
    for (int j = 0; j < prm.J; ++j) os << "," << gname(j);
    os << "\n";
    for (int i = 0; i < prm.J; ++i) {
      os << gname(i) << "," << fmt(prm.B(i, i)) << "," << fmt(rep.slutsky(i, i));
      for (int j = 0; j < prm.J; ++j)
        os << "," << (j <= i ? fmt(rep.gamma(i, j)) : std::string());
      os << "\n";
    }
    write_text(out_dir + "/price_effects.csv", os.str());
    ms.m.add_output(out_dir + "/price_effects.csv");

    std::ostringstream os2;
    os2 << "good,real_expenditure_semi,ope,ee\n";
    for (int j = 0; j < prm.J; ++j)
      os2 << gname(j) << "," << fmt(rep.real_exp_semi(j)) << "," << fmt(rep.ope(j)) << ","
          << fmt(rep.ee(j)) << "\n";
    write_text(out_dir + "/expenditure_and_elasticities.csv", os2.str());
    ms.m.add_output(out_dir + "/expenditure_and_elasticities.csv");

    std::ostringstream os3;
    os3 << "demographic";
    for (int j = 0; j < prm.J; ++j) os3 << "," << gname(j);
    os3 << "\n";
    for (int l = 0; l < prm.L; ++l) {
      os3 << (l < static_cast<int>(prm.z_names.size()) ? prm.z_names[l]
                                                       : "z" + std::to_string(l + 1));
      for (int j = 0; j < prm.J; ++j) os3 << "," << fmt(rep.demo_semi(l, j));
      os3 << "\n";
    }
    write_text(out_dir + "/demographic_semi.csv", os3.str());
    ms.m.add_output(out_dir + "/demographic_semi.csv");
  }

  // Welfare table rounded for display: per-stratum outcomes from a
  // representative run, or EV summary stats from a population run.
  if (!welfare_path.empty()) {
    json w = json::parse(read_text(welfare_path));
    ms.m.add_input(welfare_path);
    std::ostringstream os;
    if (w.contains("strata")) {
      os << "stratum,theta_pct,price_cents,q1,ev_household_cents,ev_total_thousand,"
            "collection_thousand,ev_over_expenditure_pct\n";
      for (const auto& s : w["strata"])
        os << s["label"].get<std::string>() << "," << fmt(s["theta"].get<double>() * 100, 2)
           << "," << fmt(s["price1"].get<double>() * 100, 2) << ","
           << fmt(s["q1"].get<double>(), 2) << ","
           << fmt(s["ev_household"].get<double>() * 100, 2) << ","
           << fmt(s["ev_total"].get<double>() / 1000, 2) << ","
           << fmt(s["collection"].get<double>() / 1000, 2) << ","
           << fmt(s["ev_over_expenditure"].get<double>() * 100, 2) << "\n";
      os << "total,,,,," << fmt(w["total_ev"].get<double>() / 1000, 2) << ","
         << fmt(w["total_collection"].get<double>() / 1000, 2) << ",\n";
    } else if (w.contains("ev_stats")) {
      os << "group,mean,sd,min,max,mean_ev_over_expenditure_pct\n";
      for (auto& [group, s] : w["ev_stats"].items()) {
        if (!s.contains("mean")) continue;
        os << group << "," << fmt(s["mean"].get<double>(), 4) << ","
           << fmt(s["sd"].get<double>(), 4) << "," << fmt(s["min"].get<double>(), 4) << ","
           << fmt(s["max"].get<double>(), 4) << ","
           << fmt(s["mean_ev_over_expenditure"].get<double>() * 100, 3) << "\n";
      }
    }
    write_text(out_dir + "/welfare_table.csv", os.str());
    ms.m.add_output(out_dir + "/welfare_table.csv");
  }

  // Comparison table from an optimize run.
  if (!optimize_path.empty()) {
    json o = json::parse(read_text(optimize_path));
    ms.m.add_input(optimize_path);
    std::ostringstream os;
    os << "scope,metric,baseline,alternative,delta\n";
    auto block = [&](const json& b, const json& a) {
      os << "complete,total_ev_thousand," << fmt(b["total_ev"].get<double>() / 1000, 2) << ","
         << fmt(a["total_ev"].get<double>() / 1000, 2) << ","
         << fmt((a["total_ev"].get<double>() - b["total_ev"].get<double>()) / 1000, 2) << "\n";
      for (std::size_t k = 0; k < b["strata"].size(); ++k) {
        const auto& bs = b["strata"][k];
        const auto& as = a["strata"][k];
        std::string scope = "stratum " + bs["label"].get<std::string>();
        os << scope << ",theta_pct," << fmt(bs["theta"].get<double>() * 100, 2) << ","
           << fmt(as["theta"].get<double>() * 100, 2) << ","
           << fmt((as["theta"].get<double>() - bs["theta"].get<double>()) * 100, 2) << "\n";
        os << scope << ",ev_household_cents," << fmt(bs["ev_household"].get<double>() * 100, 2)
           << "," << fmt(as["ev_household"].get<double>() * 100, 2) << ","
           << fmt((as["ev_household"].get<double>() - bs["ev_household"].get<double>()) * 100, 2)
           << "\n";
        os << scope << ",collection_thousand," << fmt(bs["collection"].get<double>() / 1000, 2)
           << "," << fmt(as["collection"].get<double>() / 1000, 2) << ","
           << fmt((as["collection"].get<double>() - bs["collection"].get<double>()) / 1000, 2)
           << "\n";
      }
    };
    block(o["baseline"], o["alternative"]);
    write_text(out_dir + "/compare_table.csv", os.str());
    ms.m.add_output(out_dir + "/compare_table.csv");
  }

  // EV scatter in long format from a per-household EV file.
  if (!ev_csv.empty()) {
    csv::Table t = csv::read(ev_csv);
    ms.m.add_input(ev_csv);
    std::ostringstream os;
    os << "x,series,value\n";
    for (std::size_t i = 0; i < t.rows(); ++i)
      os << t.cell(i, "x") << ",ev_stratum_" << t.cell(i, "stratum") << ","
         << t.cell(i, "ev") << "\n";
    write_text(out_dir + "/ev_scatter.csv", os.str());
    ms.m.add_output(out_dir + "/ev_scatter.csv");
  }

  std::cout << "report: tables written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"EASI demand-system workbench"};
  app.require_subcommand(1);

  ManifestScope ms;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic population");
  std::string sy_params = "builtin", sy_config, sy_out = "model.csv", sy_truth, sy_report;
  std::int64_t sy_n = -1, sy_seed = -1;
  double sy_eps = -1;
  synth->add_option("--params", sy_params, "truth params json or builtin[:colombia|:recovery]");
  synth->add_option("--config", sy_config, "synth config json");
  synth->add_option("--n", sy_n, "household count");
  synth->add_option("--seed", sy_seed, "rng seed");
  synth->add_option("--eps-sd", sy_eps, "unobserved heterogeneity sd");
  synth->add_option("--out", sy_out, "output model csv");
  synth->add_option("--true-params", sy_truth, "side-car json with the true params");
  synth->add_option("--report", sy_report, "generation report json");

  // ingest
  auto* ing = app.add_subcommand("ingest", "build model records from survey + tariff data");
  std::string in_hh, in_tariffs, in_prov, in_defl, in_out = "model.csv", in_report;
  double in_fx = 3038.26;
  ing->add_option("--households", in_hh, "households csv")->required();
  ing->add_option("--tariffs", in_tariffs, "tariffs csv")->required();
  ing->add_option("--providers", in_prov, "municipality->provider map csv");
  ing->add_option("--deflators", in_defl, "month,factor deflator csv");
  ing->add_option("--fx", in_fx, "COP per USD");
  ing->add_option("--out", in_out, "output model csv");
  ing->add_option("--report", in_report, "exclusions report json");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "estimate parameters by iterative 3SLS");
  std::string f_input, f_config, f_out = "params.json", f_diag, f_ingest_report;
  int f_R = -1, f_drop = -1;
  double f_ridge = -1;
  fit_cmd->add_option("--input", f_input, "model csv")->required();
  fit_cmd->add_option("--config", f_config, "fit config json");
  fit_cmd->add_option("--R", f_R, "polynomial order");
  fit_cmd->add_option("--drop-good", f_drop, "equation omitted by adding-up");
  fit_cmd->add_option("--ridge", f_ridge, "ridge for near-singular moments");
  fit_cmd->add_option("--ingest-report", f_ingest_report,
                      "ingest report json; copies centering metadata into the params");
  fit_cmd->add_option("--out", f_out, "fitted params json");
  fit_cmd->add_option("--diagnostics", f_diag, "diagnostics json");

  // elasticities
  auto* el = app.add_subcommand("elasticities", "derivative and elasticity report");
  std::string e_params, e_at = "representative", e_hid, e_input, e_out = "report.json";
  double e_y = 0.0;
  el->add_option("--params", e_params, "params json")->required();
  el->add_option("--at", e_at, "representative");
  el->add_option("--household", e_hid, "evaluate at this household");
  el->add_option("--input", e_input, "model csv for --household");
  auto* at_y_opt = el->add_option("--at-y", e_y, "evaluate at implicit utility y");
  el->add_option("--out", e_out, "report json");

  // welfare
  auto* wf = app.add_subcommand("welfare", "equivalent variation and revenue");
  std::string w_params, w_scenario, w_pop, w_mode, w_out = "welfare.json", w_csv, w_evcsv;
  wf->add_option("--params", w_params, "params json")->required();
  wf->add_option("--scenario", w_scenario, "scenario json or builtin:tax-scenario")->required();
  wf->add_option("--population", w_pop, "model csv for per-household EV");
  wf->add_option("--mode", w_mode, "exact|linearized");
  wf->add_option("--out", w_out, "welfare report json");
  wf->add_option("--csv", w_csv, "per-stratum table csv");
  wf->add_option("--ev-csv", w_evcsv, "per-household EV csv (population mode)");

  // optimize
  auto* op = app.add_subcommand("optimize", "progressive rates minimizing total EV");
  std::string o_params, o_scenario, o_config, o_out = "alt.json", o_report;
  op->add_option("--params", o_params, "params json")->required();
  op->add_option("--scenario", o_scenario, "baseline scenario json or builtin:tax-scenario")
      ->required();
  op->add_option("--config", o_config, "optimizer config json");
  op->add_option("--out", o_out, "optimized scenario json");
  op->add_option("--report", o_report, "comparison csv");

  // report
  auto* rp = app.add_subcommand("report", "render display tables and plot data");
  std::string r_params, r_welfare, r_optimize, r_evcsv, r_dir = "reports";
  rp->add_option("--params", r_params, "params json")->required();
  rp->add_option("--welfare", r_welfare, "welfare report json");
  rp->add_option("--optimize", r_optimize, "optimize result json");
  rp->add_option("--ev-csv", r_evcsv, "per-household EV csv");
  rp->add_option("--out-dir", r_dir, "output directory");

  std::string manifest_path;
  app.add_option("--manifest", manifest_path, "write a run manifest json");
  for (auto* sub : {synth, ing, fit_cmd, el, wf, op, rp})
    sub->add_option("--manifest", manifest_path, "write a run manifest json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  ms.path = manifest_path;
  try {
    if (synth->parsed()) {
      ms.m.subcommand = "synth";
      return run_synth(sy_params, sy_config, sy_n, sy_seed, sy_eps, sy_out, sy_truth,
                       sy_report, ms);
    }
    if (ing->parsed()) {
      ms.m.subcommand = "ingest";
      return run_ingest(in_hh, in_tariffs, in_prov, in_defl, in_fx, in_out, in_report, ms);
    }
    if (fit_cmd->parsed()) {
      ms.m.subcommand = "fit";
      return run_fit(f_input, f_config, f_R, f_drop, f_ridge, f_ingest_report, f_out, f_diag,
                     ms);
    }
    if (el->parsed()) {
      ms.m.subcommand = "elasticities";
      return run_elasticities(e_params, e_at, e_hid, e_input, e_y, at_y_opt->count() > 0,
                              e_out, ms);
    }
    if (wf->parsed()) {
      ms.m.subcommand = "welfare";
      return run_welfare(w_params, w_scenario, w_pop, w_mode, w_out, w_csv, w_evcsv, ms);
    }
    if (op->parsed()) {
      ms.m.subcommand = "optimize";
      return run_optimize(o_params, o_scenario, o_config, o_out, o_report, ms);
    }
    if (rp->parsed()) {
      ms.m.subcommand = "report";
      return run_report(r_params, r_welfare, r_optimize, r_evcsv, r_dir, ms);
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
