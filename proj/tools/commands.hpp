#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "copulahmm/serialize.hpp"

namespace cli {

using copulahmm::json;
namespace fs = std::filesystem;

// Output directory bookkeeping: every artifact goes through write() so the
// manifest can list it with its hash.
class Run {
 public:
  Run(std::string command, fs::path output_dir, std::uint64_t seed, json config);

  std::uint64_t seed() const { return seed_; }
  void input(const fs::path& path);
  void write(const std::string& name, const std::string& contents);
  void write_manifest() const;

 private:
  std::string command_;
  fs::path dir_;
  std::uint64_t seed_;
  json config_;
  std::vector<std::pair<std::string, std::string>> inputs_, outputs_;
};

struct DataArgs {
  std::string baseline;
  std::string trajectories;
  int T = 52;
  int MP = 10;
  int MD = 7;
  std::string missing = "NA";
};

struct FitArgs {
  DataArgs data;
  std::string schema;
  int K = 1;
  int S = 3;
  std::string copula = "survival-gumbel";
  std::string mode = "mcmc";
  std::string sampler = "hmc";
  int chains = 4;
  int iter = 2000;
  int warmup = 1000;
  int leapfrog = 16;
  double target_accept = 0.8;
  double max_divergence = 0.2;
  int restarts = 10;
  int max_opt_iter = 2000;
  double sd_alpha = 5.0;
  double sd_beta_tilde = 1.0;
  double sd_lambda = 5.0;
  double sd_rho_tilde = 5.0;
  bool scale_qr = false;
};

struct SelectArgs {
  FitArgs fit;
  std::string K_list = "1..4";
  std::string S_list = "3";
  double split = 0.5;
};

struct AssignArgs {
  DataArgs data;
  std::string model;
  std::string draws;
  int max_draws = 0;
  std::string mode = "both";
  std::string weeks = "final";
};

struct DecodeArgs {
  DataArgs data;
  std::string model;
};

struct CviArgs {
  std::string assignments;
  std::string trajectories;
  int T = 52;
  int MP = 10;
  int MD = 7;
  std::string missing = "NA";
  std::string method = "MHMMX";
  std::string variant = "printed";
};

struct AccuracyArgs {
  DataArgs data;
  std::string model;
  std::string draws;
  int max_draws = 0;
  std::vector<double> thresholds{0.5, 0.65, 0.8};
  int window = 0;
};

struct SimulateArgs {
  std::string benchmark = "recovery";
  int n = 400;
  int T = 52;
  double missing_rate = -1.0;  // negative keeps the benchmark's own rate
};

void cmd_fit(const FitArgs& a, Run& run);
void cmd_select(const SelectArgs& a, Run& run);
void cmd_assign(const AssignArgs& a, Run& run);
void cmd_decode(const DecodeArgs& a, Run& run);
void cmd_cvi(const CviArgs& a, Run& run);
void cmd_accuracy(const AccuracyArgs& a, Run& run);
void cmd_simulate(const SimulateArgs& a, Run& run);

// "1..4", "1,2,3" or "2".
std::vector<int> parse_int_list(const std::string& s);

}  // namespace cli
