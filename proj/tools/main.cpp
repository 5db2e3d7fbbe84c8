#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "copulahmm/error.hpp"
#include "copulahmm/parallel.hpp"

namespace {

using cli::json;

enum Exit { kOk = 0, kUsage = 2, kInput = 3, kNumerical = 4 };

// JSON config files: top-level keys are global options, nested objects hold
// subcommand options. A manifest is accepted too (its "config" block is used).
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.value("format", std::string()) == "copulahmm-manifest") j = j.at("config");
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> out;
    flatten(j, {}, out);
    return out;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported config value " + v.dump());
  }

  static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object()) {
        auto p = parents;
        p.push_back(it.key());
        flatten(*it, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array())
        for (const auto& v : *it) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(*it));
      out.push_back(std::move(item));
    }
  }
};

// Registers options on a subcommand and remembers how to serialize their
// final values into the run config.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    getters_.emplace_back(name, [&var] { return json(var); });
    return app_->add_option("--" + name, var, help)->capture_default_str();
  }
  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    getters_.emplace_back(name, [&var] { return json(var); });
    return app_->add_flag("--" + name, var, help);
  }

  void data(cli::DataArgs& d, bool with_limits) {
    add("baseline", d.baseline, "baseline CSV (id plus risk factors)");
    add("trajectories", d.trajectories, "long-format trajectory CSV (id, week, pain, disability)");
    add("T", d.T, "weeks per trajectory");
    add("missing", d.missing, "missing-value marker");
    if (with_limits) {
      add("MP", d.MP, "pain scale maximum");
      add("MD", d.MD, "disability scale maximum");
    }
  }

  void fit(cli::FitArgs& f) {
    data(f.data, true);
    add("schema", f.schema, "risk-factor schema JSON");
    add("copula", f.copula, "survival-gumbel or independence");
    add("mode", f.mode, "map or mcmc");
    add("sampler", f.sampler, "hmc or rw");
    add("chains", f.chains, "MCMC chains");
    add("iter", f.iter, "iterations per chain, warmup included");
    add("warmup", f.warmup, "warmup iterations per chain");
    add("leapfrog", f.leapfrog, "leapfrog steps per HMC transition");
    add("target-accept", f.target_accept, "step-size adaptation target");
    add("max-divergence", f.max_divergence, "abort above this divergence rate");
    add("restarts", f.restarts, "MAP restarts");
    add("max-opt-iter", f.max_opt_iter, "L-BFGS iterations per restart");
    add("sd-alpha", f.sd_alpha, "prior sd of the subgroup intercepts");
    add("sd-beta-tilde", f.sd_beta_tilde, "prior sd of the QR-scale slopes");
    add("sd-lambda", f.sd_lambda, "half-normal scale of the emission rates");
    add("sd-rho-tilde", f.sd_rho_tilde, "half-normal scale of rho - 1");
    flag("scale-qr", f.scale_qr, "divide R by sqrt(N - 1)");
  }

  json config() const {
    json j = json::object();
    for (const auto& [name, get] : getters_) j[name] = get();
    return j;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<json()>>> getters_;
};

void print_error(int code, const std::string& kind, const std::string& message) {
  json e = {{"error", {{"exit_code", code}, {"kind", kind}, {"message", message}}}};
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture HMM with copula-coupled discrete emissions"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON run config or manifest");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output_dir = ".";
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = available cores)")->capture_default_str();
  app.add_option("--output-dir", output_dir, "directory for outputs")->capture_default_str();

  cli::FitArgs fit;
  cli::SelectArgs select;
  cli::AssignArgs assign;
  cli::DecodeArgs decode;
  cli::CviArgs cvi;
  cli::AccuracyArgs accuracy;
  cli::SimulateArgs simulate;

  struct Command {
    CLI::App* app;
    Options opts;
    std::function<void(cli::Run&)> run;
  };
  std::vector<Command> commands;
  auto command = [&](const std::string& name, const std::string& help, std::function<void(cli::Run&)> run) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->configurable();
    commands.push_back({sub, Options(sub), std::move(run)});
    return &commands.back().opts;
  };
  commands.reserve(7);

  {
    auto* o = command("fit", "fit a model (MAP or MCMC)", [&](cli::Run& r) { cli::cmd_fit(fit, r); });
    o->add("K", fit.K, "subgroups");
    o->add("S", fit.S, "latent states");
    o->fit(fit);
  }
  {
    auto* o = command("select", "sweep (K, S) and score held-out lpd", [&](cli::Run& r) { cli::cmd_select(select, r); });
    o->add("K", select.K_list, "subgroup counts, e.g. 1..4 or 1,2,3");
    o->add("S", select.S_list, "state counts");
    o->add("split", select.split, "training fraction");
    o->fit(select.fit);
  }
  {
    auto* o = command("assign", "subgroup probabilities per patient", [&](cli::Run& r) { cli::cmd_assign(assign, r); });
    o->add("model", assign.model, "model JSON");
    o->add("draws", assign.draws, "optional draws CSV (averages over draws)");
    o->add("max-draws", assign.max_draws, "thin draws to this many (0 = all)");
    o->add("mode", assign.mode, "offline, online or both");
    o->add("weeks", assign.weeks, "online weeks: final or all");
    o->data(assign.data, false);
  }
  {
    auto* o = command("decode", "Viterbi paths and state occupancy", [&](cli::Run& r) { cli::cmd_decode(decode, r); });
    o->add("model", decode.model, "model JSON");
    o->data(decode.data, false);
  }
  {
    auto* o = command("cvi", "cluster validity indices per panel", [&](cli::Run& r) { cli::cmd_cvi(cvi, r); });
    o->add("assignments", cvi.assignments, "assignment CSV (id, label[, mode, t])");
    o->add("trajectories", cvi.trajectories, "trajectory CSV");
    o->add("T", cvi.T, "weeks per trajectory");
    o->add("MP", cvi.MP, "pain scale maximum");
    o->add("MD", cvi.MD, "disability scale maximum");
    o->add("missing", cvi.missing, "missing-value marker");
    o->add("method", cvi.method, "method name for the output row");
    o->add("variant", cvi.variant, "silhouette variant: printed or textbook");
  }
  {
    auto* o = command("accuracy", "online assignment accuracy over time",
                      [&](cli::Run& r) { cli::cmd_accuracy(accuracy, r); });
    o->add("model", accuracy.model, "model JSON");
    o->add("draws", accuracy.draws, "optional draws CSV");
    o->add("max-draws", accuracy.max_draws, "thin draws to this many (0 = all)");
    o->add("thresholds", accuracy.thresholds, "max-probability thresholds")->delimiter(',');
    o->add("window", accuracy.window, "also write block means over this many weeks (0 = off)");
    o->data(accuracy.data, false);
  }
  {
    auto* o = command("simulate", "generate a benchmark dataset", [&](cli::Run& r) { cli::cmd_simulate(simulate, r); });
    o->add("benchmark", simulate.benchmark, "recovery or three-state");
    o->add("n", simulate.n, "patients");
    o->add("T", simulate.T, "weeks");
    o->add("missing-rate", simulate.missing_rate, "per-coordinate missingness (negative = benchmark default)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    print_error(kInput, "input", e.what());
    return kInput;
  } catch (const CLI::ParseError& e) {
    print_error(kUsage, "usage", e.what());
    return kUsage;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    const std::string name = c.app->get_name();
    json config = {{"seed", seed}, {name, c.opts.config()}};
    try {
      copulahmm::set_num_threads(threads);
      cli::Run run(name, output_dir, seed, config);
      run.write("run_config.json", copulahmm::dump(config));
      c.run(run);
      run.write_manifest();
      return kOk;
    } catch (const copulahmm::ParameterError& e) {
      print_error(kUsage, "usage", e.what());
      return kUsage;
    } catch (const copulahmm::InputError& e) {
      print_error(kInput, "input", e.what());
      return kInput;
    } catch (const copulahmm::NumericalError& e) {
      print_error(kNumerical, "numerical", e.what());
      return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
      print_error(kInput, "input", e.what());
      return kInput;
    }
  }
  print_error(kUsage, "usage", "no command given");
  return kUsage;
}
