#include "easi/datagen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "easi/csv.hpp"
#include "easi/parallel.hpp"
#include "easi/rng.hpp"
#include "json.hpp"

namespace easi::datagen {

using nlohmann::json;

void SynthConfig::validate() const {
  if (n <= 0) throw DataError("SynthConfig: n must be positive");
  if (markets.empty()) throw DataError("SynthConfig: at least one market required");
  double psum = 0.0;
  for (const auto& m : markets) {
    if (m.probability < 0) throw DataError("SynthConfig: negative market probability");
    psum += m.probability;
  }
  if (std::abs(psum - 1.0) > 1e-9)
    throw DataError("SynthConfig: market probabilities must sum to 1");
  if (eps_sd < 0) throw DataError("SynthConfig: eps_sd must be >= 0");
  if (x_sd < 0) throw DataError("SynthConfig: x_sd must be >= 0");
  for (const auto& zs : z) {
    if (zs.kind == ZSpec::Kind::Categorical) {
      if (zs.values.empty() || zs.values.size() != zs.probs.size())
        throw DataError("SynthConfig: bad categorical z spec");
      double s = 0;
      for (double q : zs.probs) s += q;
      if (std::abs(s - 1.0) > 1e-9)
        throw DataError("SynthConfig: categorical z probs must sum to 1");
    }
  }
}

SynthResult generate_population(const SynthConfig& config, const EasiParams& params,
                                bool parallel) {
  config.validate();
  params.validate();
  const int J = params.J;
  if (static_cast<int>(config.z.size()) != params.L)
    throw DataError("SynthConfig: z spec count must equal params.L");

  std::vector<double> cum(config.markets.size());
  double acc = 0;
  for (std::size_t k = 0; k < config.markets.size(); ++k) {
    acc += config.markets[k].probability;
    cum[k] = acc;
  }

  SynthResult out;
  out.households.resize(config.n);
  std::vector<unsigned char> flag(config.n, 0);
  std::vector<std::string> errors(config.n);  // exceptions may not cross the omp region
  struct Nothing {};
  chunked_reduce<Nothing>(
      static_cast<std::size_t>(config.n), kDefaultChunk,
      [&](Nothing&, std::size_t i) {
        Rng rng(config.seed, i);
        int mk = rng.categorical(cum.data(), static_cast<int>(cum.size()));
        const Market& market = config.markets[mk];

        Vec z(params.L);
        for (int l = 0; l < params.L; ++l) {
          const ZSpec& zs = config.z[l];
          switch (zs.kind) {
            case ZSpec::Kind::Uniform:
              z(l) = rng.uniform(zs.lo, zs.hi);
              break;
            case ZSpec::Kind::Normal:
              z(l) = rng.normal(zs.mean, zs.sd);
              break;
            case ZSpec::Kind::Categorical: {
              double c = 0;
              double u = rng.uniform();
              z(l) = zs.values.back();
              for (std::size_t k = 0; k < zs.probs.size(); ++k) {
                c += zs.probs[k];
                if (u <= c) {
                  z(l) = zs.values[k];
                  break;
                }
              }
              break;
            }
          }
        }

        double x = rng.normal(config.x_mean, config.x_sd);

        // Mean-zero eps with exact adding-up: J-1 free draws, last the
        // negative sum.
        Vec eps = Vec::Zero(J);
        if (config.eps_sd > 0) {
          double s = 0;
          for (int j = 0; j < J - 1; ++j) {
            eps(j) = rng.normal(0.0, config.eps_sd);
            s += eps(j);
          }
          eps(J - 1) = -s;
        }

        MarshallianSolution sol;
        try {
          sol = solve_marshallian_shares(x, market.log_prices, z, eps, params);
        } catch (const std::exception& e) {
          errors[i] = "household " + std::to_string(i) + ": " + e.what();
          return;
        }

        Household h;
        h.id = std::to_string(i);
        h.stratum = market.stratum;
        h.p = market.log_prices;
        h.z = z;
        h.x = x;
        h.eps = eps;
        h.weight = 1.0;
        h.w = sol.w;
        if ((sol.w.array() < 0.0).any() || (sol.w.array() > 1.0).any()) {
          flag[i] = 1;
          if (config.truncate_renormalize) {
            Vec t = sol.w.cwiseMax(0.0);
            h.w = t / t.sum();
          }
        }
        out.households[i] = std::move(h);
      },
      [](Nothing&, const Nothing&) {}, parallel);

  for (std::int64_t i = 0; i < config.n; ++i)
    if (!errors[i].empty()) throw NoConvergence(errors[i]);
  for (std::int64_t i = 0; i < config.n; ++i)
    if (flag[i]) out.flagged.push_back(i);
  return out;
}

void write_model_csv(const std::string& path, const std::vector<Household>& hh,
                     int J, int L) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << "hid,stratum";
  for (int j = 1; j <= J; ++j) os << ",w" << j;
  for (int j = 1; j <= J; ++j) os << ",p" << j;
  for (int l = 1; l <= L; ++l) os << ",z" << l;
  os << ",x,weight\n";
  os << csv::full_precision;
  for (const auto& h : hh) {
    os << h.id << "," << h.stratum;
    for (int j = 0; j < J; ++j) os << "," << h.w(j);
    for (int j = 0; j < J; ++j) os << "," << h.p(j);
    for (int l = 0; l < L; ++l) os << "," << h.z(l);
    os << "," << h.x << "," << h.weight << "\n";
  }
}

std::vector<Household> read_model_csv(const std::string& path, int& J, int& L) {
  csv::Table t = csv::read(path);
  J = 0;
  L = 0;
  while (t.has_column("w" + std::to_string(J + 1))) ++J;
  while (t.has_column("z" + std::to_string(L + 1))) ++L;
  if (J < 2) throw SchemaError(path + ": expected w1..wJ share columns");
  for (int j = 1; j <= J; ++j)
    if (!t.has_column("p" + std::to_string(j)))
      throw SchemaError(path + ": missing p" + std::to_string(j));

  std::vector<Household> hh(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    Household& h = hh[i];
    h.id = t.cell(i, "hid");
    h.stratum = t.cell(i, "stratum");
    h.w = Vec(J);
    h.p = Vec(J);
    h.z = Vec(L);
    for (int j = 0; j < J; ++j) {
      h.w(j) = t.num(i, "w" + std::to_string(j + 1));
      h.p(j) = t.num(i, "p" + std::to_string(j + 1));
    }
    for (int l = 0; l < L; ++l) h.z(l) = t.num(i, "z" + std::to_string(l + 1));
    h.x = t.num(i, "x");
    h.weight = t.has_column("weight") ? t.num(i, "weight") : 1.0;
  }
  return hh;
}

namespace {

ZSpec zspec_from_json(const json& j) {
  ZSpec z;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    z.kind = ZSpec::Kind::Uniform;
    z.lo = j.at("lo").get<double>();
    z.hi = j.at("hi").get<double>();
  } else if (kind == "normal") {
    z.kind = ZSpec::Kind::Normal;
    z.mean = j.at("mean").get<double>();
    z.sd = j.at("sd").get<double>();
  } else if (kind == "categorical") {
    z.kind = ZSpec::Kind::Categorical;
    z.values = j.at("values").get<std::vector<double>>();
    z.probs = j.at("probs").get<std::vector<double>>();
  } else {
    throw SchemaError("synth config: unknown z kind " + kind);
  }
  return z;
}

json zspec_to_json(const ZSpec& z) {
  json j;
  switch (z.kind) {
    case ZSpec::Kind::Uniform:
      j["kind"] = "uniform";
      j["lo"] = z.lo;
      j["hi"] = z.hi;
      break;
    case ZSpec::Kind::Normal:
      j["kind"] = "normal";
      j["mean"] = z.mean;
      j["sd"] = z.sd;
      break;
    case ZSpec::Kind::Categorical:
      j["kind"] = "categorical";
      j["values"] = z.values;
      j["probs"] = z.probs;
      break;
  }
  return j;
}

}  // namespace

std::string SynthConfig::to_json() const {
  json j;
  j["n"] = n;
  j["seed"] = seed;
  json ms = json::array();
  for (const auto& m : markets) {
    json mj;
    mj["log_prices"] = std::vector<double>(m.log_prices.data(),
                                           m.log_prices.data() + m.log_prices.size());
    mj["stratum"] = m.stratum;
    mj["probability"] = m.probability;
    ms.push_back(mj);
  }
  j["markets"] = ms;
  j["x_mean"] = x_mean;
  j["x_sd"] = x_sd;
  json zs = json::array();
  for (const auto& z_ : z) zs.push_back(zspec_to_json(z_));
  j["z"] = zs;
  j["eps_sd"] = eps_sd;
  j["truncate_renormalize"] = truncate_renormalize;
  return j.dump(2);
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("synth config: ") + e.what());
  }
  SynthConfig c;
  try {
    c.n = j.at("n").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& mj : j.at("markets")) {
      Market m;
      auto pv = mj.at("log_prices").get<std::vector<double>>();
      m.log_prices = Eigen::Map<const Vec>(pv.data(), pv.size());
      m.stratum = mj.value("stratum", std::string("0"));
      m.probability = mj.at("probability").get<double>();
      c.markets.push_back(std::move(m));
    }
    c.x_mean = j.value("x_mean", 0.0);
    c.x_sd = j.value("x_sd", 1.0);
    if (j.contains("z"))
      for (const auto& zj : j["z"]) c.z.push_back(zspec_from_json(zj));
    c.eps_sd = j.value("eps_sd", 0.0);
    c.truncate_renormalize = j.value("truncate_renormalize", false);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("synth config: ") + e.what());
  }
  return c;
}

SynthConfig SynthConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

}  // namespace easi::datagen
