#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "easi/model.hpp"

namespace easi::datagen {

struct Market {
  Vec log_prices;
  std::string stratum;
  double probability = 0.0;
};

struct ZSpec {
  enum class Kind { Uniform, Normal, Categorical };
  Kind kind = Kind::Uniform;
  double lo = -1.0, hi = 1.0;       // uniform
  double mean = 0.0, sd = 1.0;      // normal
  std::vector<double> values;      // categorical
  std::vector<double> probs;
};

struct SynthConfig {
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::vector<Market> markets;
  double x_mean = 0.0;  // log-USD
  double x_sd = 1.0;
  std::vector<ZSpec> z;
  double eps_sd = 0.0;
  // Divergence from the source convention (which drops zero-share households
  // at the analysis stage instead): clip negative shares to 0 and rescale.
  bool truncate_renormalize = false;

  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
  static SynthConfig load(const std::string& path);
};

struct SynthResult {
  std::vector<Household> households;
  std::vector<std::int64_t> flagged;  // indices with shares outside [0,1]
};

// Draws each household from a per-index RNG stream and solves the demand
// fixed point under `params`, so output is identical for any thread count
// and bit-identical across reruns of (config, params).
SynthResult generate_population(const SynthConfig& config, const EasiParams& params,
                                bool parallel = true);

// model.csv schema: hid,stratum,w1..wJ,p1..pJ,z1..zL,x,weight
void write_model_csv(const std::string& path, const std::vector<Household>& hh,
                     int J, int L);
std::vector<Household> read_model_csv(const std::string& path, int& J, int& L);

}  // namespace easi::datagen
