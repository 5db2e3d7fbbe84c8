#include "commands.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "copulahmm/assignment.hpp"
#include "copulahmm/csv.hpp"
#include "copulahmm/cvi.hpp"
#include "copulahmm/error.hpp"
#include "copulahmm/hmm.hpp"
#include "copulahmm/inference.hpp"
#include "copulahmm/parallel.hpp"
#include "copulahmm/selection.hpp"
#include "copulahmm/simulate.hpp"

namespace cli {

using namespace copulahmm;

Run::Run(std::string command, fs::path output_dir, std::uint64_t seed, json config)
    : command_(std::move(command)), dir_(std::move(output_dir)), seed_(seed), config_(std::move(config)) {}

void Run::input(const fs::path& path) { inputs_.emplace_back(path.string(), file_hash(path)); }

void Run::write(const std::string& name, const std::string& contents) {
  write_file_atomic(dir_ / name, contents);
  outputs_.emplace_back(name, hex64(fnv1a64(contents)));
}

void Run::write_manifest() const {
  json m;
  m["format"] = "copulahmm-manifest";
  m["version"] = kVersion;
  m["command"] = command_;
  m["seed"] = seed_;
  m["config_hash"] = hex64(fnv1a64(config_.dump()));
  m["config"] = config_;
  json in = json::array();
  for (const auto& [p, h] : inputs_) in.push_back({{"path", p}, {"fnv1a64", h}});
  m["inputs"] = in;
  json out = json::array();
  for (const auto& [p, h] : outputs_) out.push_back({{"path", p}, {"fnv1a64", h}});
  m["outputs"] = out;
  write_file_atomic(dir_ / "manifest.json", dump(m));
}

std::vector<int> parse_int_list(const std::string& s) {
  auto to_int = [&](const std::string& t) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size()) throw ParameterError("bad integer list '" + s + "'");
    return v;
  };
  std::vector<int> out;
  if (auto dots = s.find(".."); dots != std::string::npos) {
    const int lo = to_int(s.substr(0, dots)), hi = to_int(s.substr(dots + 2));
    if (hi < lo) throw ParameterError("empty range '" + s + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  if (out.empty()) throw ParameterError("empty integer list");
  return out;
}

namespace {

std::string cell(double v) { return format_double(v); }
std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

DataConfig data_config(const DataArgs& d, int MP, int MD) {
  DataConfig c;
  c.T = d.T;
  c.MP = MP;
  c.MD = MD;
  c.missing_marker = d.missing;
  return c;
}

Dataset load(const DataArgs& d, const RiskFactorEncoding& enc, int MP, int MD, Run& run) {
  if (d.baseline.empty() || d.trajectories.empty())
    throw ParameterError("--baseline and --trajectories are required");
  Dataset ds = load_dataset(d.baseline, d.trajectories, enc, data_config(d, MP, MD));
  run.input(d.baseline);
  run.input(d.trajectories);
  return ds;
}

ModelSpec spec_of(const FitArgs& a) {
  ModelSpec spec;
  spec.K = a.K;
  spec.S = a.S;
  spec.MP = a.data.MP;
  spec.MD = a.data.MD;
  if (a.copula == "survival-gumbel") spec.copula = CopulaFamily::survival_gumbel;
  else if (a.copula == "independence") spec.copula = CopulaFamily::independence;
  else throw ParameterError("unknown copula '" + a.copula + "'");
  spec.priors.sd_alpha = a.sd_alpha;
  spec.priors.sd_beta_tilde = a.sd_beta_tilde;
  spec.priors.sd_lambda = a.sd_lambda;
  spec.priors.sd_rho_tilde = a.sd_rho_tilde;
  spec.priors.scale_qr = a.scale_qr;
  spec.validate();
  return spec;
}

MapOptions map_options(const FitArgs& a, std::uint64_t seed) {
  MapOptions m;
  m.restarts = a.restarts;
  m.max_iterations = a.max_opt_iter;
  m.seed = seed;
  return m;
}

SamplerOptions sampler_options(const FitArgs& a, std::uint64_t seed) {
  SamplerOptions o;
  if (a.sampler == "hmc") o.kind = SamplerKind::hmc;
  else if (a.sampler == "rw") o.kind = SamplerKind::random_walk;
  else throw ParameterError("unknown sampler '" + a.sampler + "'");
  o.n_chains = a.chains;
  o.n_iter = a.iter;
  o.n_warmup = a.warmup;
  o.n_leapfrog = a.leapfrog;
  o.target_accept = a.target_accept;
  o.max_divergence_rate = a.max_divergence;
  o.seed = seed;
  o.map = map_options(a, seed);
  return o;
}

FitMode fit_mode(const std::string& m) {
  if (m == "mcmc") return FitMode::mcmc;
  if (m == "map") return FitMode::map;
  throw ParameterError("unknown mode '" + m + "' (expected map or mcmc)");
}

RiskFactorEncoding read_schema(const std::string& path, Run& run) {
  if (path.empty()) throw ParameterError("--schema is required");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": invalid JSON: " + e.what());
  }
  run.input(path);
  try {
    return encoding_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

struct LoadedModel {
  FittedModel model;
  std::optional<PosteriorDraws> draws;
};

LoadedModel read_model(const std::string& model, const std::string& draws, int max_draws, Run& run) {
  if (model.empty()) throw ParameterError("--model is required");
  LoadedModel out{read_fitted_model(model), std::nullopt};
  run.input(model);
  if (!draws.empty()) {
    out.draws = read_draws_csv(draws, out.model.spec, out.model.encoding.width());
    out.draws->R = out.model.R;
    run.input(draws);
  }
  if (max_draws < 0) throw ParameterError("--max-draws must be non-negative");
  return out;
}

Assigner make_assigner(const LoadedModel& m, int max_draws) {
  if (m.draws) return Assigner(*m.draws, static_cast<std::size_t>(max_draws));
  return Assigner(m.model.params);
}

void assignment_row(std::ostream& os, const AssignmentResult& r) {
  os << csv::quote(r.id) << ',' << (r.online ? "online" : "offline") << ',' << r.t;
  for (Eigen::Index k = 0; k < r.probs.size(); ++k) os << ',' << cell(r.probs[k]);
  os << ',' << (r.label + 1) << ',' << cell(r.max_prob) << '\n';
}

}  // namespace

void cmd_fit(const FitArgs& a, Run& run) {
  const ModelSpec spec = spec_of(a);
  const FitMode mode = fit_mode(a.mode);
  const RiskFactorEncoding schema = read_schema(a.schema, run);
  const Dataset ds = load(a.data, schema, spec.MP, spec.MD, run);

  FittedModel fm{spec, ds.encoding, {}, {}};
  json diag;
  if (mode == FitMode::map) {
    const MapResult r = fit_map(ds, spec, map_options(a, run.seed()));
    fm.params = relabel(r.params);
    fm.R = r.R;
    diag = {{"mode", "map"},
            {"log_posterior", r.log_posterior},
            {"gradient_norm", r.gradient_norm},
            {"restarts", a.restarts},
            {"restarts_succeeded", r.restarts_succeeded}};
  } else {
    const PosteriorDraws draws = sample_posterior(ds, spec, sampler_options(a, run.seed()));
    fm.params = posterior_mean(draws);
    fm.R = draws.R;
    diag = diagnostics_json(draws);
    diag["mode"] = "mcmc";
    run.write("draws.csv", draws_csv(draws));
  }
  run.write("model.json", dump(to_json(fm)));
  run.write("diagnostics.json", dump(diag));
}

void cmd_select(const SelectArgs& a, Run& run) {
  const std::vector<int> Ks = parse_int_list(a.K_list), Ss = parse_int_list(a.S_list);
  FitArgs base = a.fit;
  base.K = Ks.front();
  base.S = Ss.front();
  SelectionConfig cfg;
  cfg.base = spec_of(base);
  cfg.mode = fit_mode(a.fit.mode);
  cfg.sampler = sampler_options(a.fit, run.seed());
  cfg.map = map_options(a.fit, run.seed());
  const RiskFactorEncoding schema = read_schema(a.fit.schema, run);
  const Dataset ds = load(a.fit.data, schema, cfg.base.MP, cfg.base.MD, run);
  auto [train, test] = split_dataset(ds, a.split, run.seed());

  std::vector<std::pair<int, int>> specs;
  for (int K : Ks)
    for (int S : Ss) specs.emplace_back(K, S);
  const SelectionResult res = select_over(train, test, specs, cfg);

  std::ostringstream os;
  os << "K,S,in_sample_lpd,out_of_sample_lpd,n_draws,error\n";
  for (const auto& r : res.reports) {
    os << r.K << ',' << r.S << ',';
    if (r.error) os << "NA,NA,0," << csv::quote(*r.error) << '\n';
    else os << cell(r.in_sample) << ',' << cell(r.out_of_sample) << ',' << r.n_draws << ",\n";
  }
  json rec;
  rec["criterion"] = "out_of_sample_deviance";
  rec["n_train"] = train.size();
  rec["n_test"] = test.size();
  if (res.recommended) {
    const auto& r = res.reports[*res.recommended];
    rec["K"] = r.K;
    rec["S"] = r.S;
    rec["out_of_sample"] = r.out_of_sample;
  } else {
    rec["K"] = nullptr;
    rec["S"] = nullptr;
  }
  run.write("selection.csv", os.str());
  run.write("recommendation.json", dump(rec));
  if (!res.recommended) throw NumericalError("every candidate fit failed");
}

void cmd_assign(const AssignArgs& a, Run& run) {
  const bool offline = a.mode == "offline" || a.mode == "both";
  const bool online = a.mode == "online" || a.mode == "both";
  if (!offline && !online) throw ParameterError("unknown assign mode '" + a.mode + "'");
  if (a.weeks != "final" && a.weeks != "all") throw ParameterError("--weeks must be final or all");
  const LoadedModel m = read_model(a.model, a.draws, a.max_draws, run);
  const Dataset ds = load(a.data, m.model.encoding, m.model.spec.MP, m.model.spec.MD, run);
  const Assigner as = make_assigner(m, a.max_draws);

  std::vector<std::string> rows(ds.size());
  parallel_chunks(ds.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& p = ds.patients[i];
      std::ostringstream os;
      if (offline) assignment_row(os, as.offline(p.id, p.x));
      if (online) {
        if (a.weeks == "all") {
          for (auto r : as.online_path(p)) {
            r.online = true;  // t = 0 is the prior, reported under the online mode
            assignment_row(os, r);
          }
        } else {
          assignment_row(os, as.online(p.id, p.x, p.y));
        }
      }
      rows[i] = os.str();
    }
  });
  std::ostringstream out;
  out << "id,mode,t";
  for (Eigen::Index k = 0; k < as.K(); ++k) out << ",prob_" << (k + 1);
  out << ",label,max_prob\n";
  for (const auto& r : rows) out << r;
  run.write("assignments.csv", out.str());
}

void cmd_decode(const DecodeArgs& a, Run& run) {
  const LoadedModel m = read_model(a.model, "", 0, run);
  const Dataset ds = load(a.data, m.model.encoding, m.model.spec.MP, m.model.spec.MD, run);
  const ModelParams& params = m.model.params;
  const Assigner as(params);
  std::vector<CompiledHMM> hmms;
  for (const auto& h : params.hmms) hmms.emplace_back(h);

  std::vector<int> label(ds.size());
  std::vector<std::vector<int>> path(ds.size());
  parallel_chunks(ds.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& p = ds.patients[i];
      label[i] = static_cast<int>(as.online(p.id, p.x, p.y).label);
      path[i] = viterbi_decode(hmms[static_cast<std::size_t>(label[i])], p.y);
    }
  });

  std::ostringstream ps;
  ps << "id,subgroup,week,state\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t t = 0; t < path[i].size(); ++t)
      ps << csv::quote(ds.patients[i].id) << ',' << (label[i] + 1) << ',' << (t + 1) << ',' << (path[i][t] + 1)
         << '\n';

  const Eigen::Index S = params.S();
  std::ostringstream os;
  os << "subgroup,n_patients,week";
  for (Eigen::Index s = 0; s < S; ++s) os << ",state_" << (s + 1);
  os << '\n';
  for (Eigen::Index k = 0; k < params.K(); ++k) {
    std::vector<std::vector<int>> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (label[i] == k) members.push_back(path[i]);
    const std::optional<Eigen::MatrixXd> occ =
        members.empty() ? std::nullopt : std::optional(state_occupancy(members, S));
    for (int t = 0; t < ds.T; ++t) {
      os << (k + 1) << ',' << members.size() << ',' << (t + 1);
      for (Eigen::Index s = 0; s < S; ++s) os << ',' << (occ ? cell((*occ)(t, s)) : "NA");
      os << '\n';
    }
  }
  run.write("paths.csv", ps.str());
  run.write("occupancy.csv", os.str());
}

void cmd_cvi(const CviArgs& a, Run& run) {
  SilhouetteVariant variant;
  if (a.variant == "printed") variant = SilhouetteVariant::printed;
  else if (a.variant == "textbook") variant = SilhouetteVariant::textbook;
  else throw ParameterError("unknown silhouette variant '" + a.variant + "'");
  if (a.assignments.empty() || a.trajectories.empty())
    throw ParameterError("--assignments and --trajectories are required");

  // Keep the most informed row per id: online beats offline, later t beats
  // earlier.
  const auto table = csv::read(a.assignments);
  const auto id_col = table.column("id"), label_col = table.column("label");
  if (id_col < 0 || label_col < 0) throw InputError(a.assignments + ": needs 'id' and 'label' columns");
  const auto mode_col = table.column("mode"), t_col = table.column("t");
  std::map<std::string, std::pair<std::pair<int, int>, int>> best;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto num = [&](std::ptrdiff_t c, const char* what) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(row[static_cast<std::size_t>(c)], &used);
        if (used == row[static_cast<std::size_t>(c)].size()) return v;
      } catch (const std::exception&) {
      }
      throw InputError(a.assignments + ":" + std::to_string(table.line[r]) + ": bad " + what);
    };
    const int lab = num(label_col, "label");
    const int on = mode_col >= 0 && row[static_cast<std::size_t>(mode_col)] == "online" ? 1 : 0;
    const int t = t_col >= 0 ? num(t_col, "t") : 0;
    const auto& id = row[static_cast<std::size_t>(id_col)];
    auto it = best.find(id);
    if (it == best.end() || std::pair(on, t) > it->second.first) best[id] = {{on, t}, lab};
  }
  std::map<std::string, int> labels;
  for (const auto& [id, v] : best) labels[id] = v.second;
  run.input(a.assignments);

  DataConfig dc;
  dc.T = a.T;
  dc.MP = a.MP;
  dc.MD = a.MD;
  dc.missing_marker = a.missing;
  const Dataset ds = load_trajectories(a.trajectories, dc);
  run.input(a.trajectories);

  std::ostringstream os;
  os << "method,subgroups,pain_sil,pain_ch,pain_db,disability_sil,disability_ch,disability_db\n";
  const Clustering pain = make_clustering(ds, labels, Panel::pain);
  const Clustering dis = make_clustering(ds, labels, Panel::disability);
  os << csv::quote(a.method) << ',' << pain.K;
  for (const Clustering* c : {&pain, &dis})
    os << ',' << cell(silhouette(*c, variant)) << ',' << cell(calinski_harabasz(*c)) << ','
       << cell(davies_bouldin_star(*c));
  os << '\n';
  run.write("cvi.csv", os.str());
}

void cmd_accuracy(const AccuracyArgs& a, Run& run) {
  if (a.thresholds.empty()) throw ParameterError("need at least one threshold");
  if (a.window < 0) throw ParameterError("--window must be non-negative");
  const LoadedModel m = read_model(a.model, a.draws, a.max_draws, run);
  const Dataset ds = load(a.data, m.model.encoding, m.model.spec.MP, m.model.spec.MD, run);
  const AccuracyTable tab = accuracy_over_time(make_assigner(m, a.max_draws), ds, a.thresholds);

  std::ostringstream os;
  os << "t,threshold,n_qualifying,agreement\n";
  for (int t = 0; t <= tab.T; ++t)
    for (std::size_t j = 0; j < tab.thresholds.size(); ++j)
      os << t << ',' << cell(tab.thresholds[j]) << ',' << tab.n_qualifying[t][j] << ','
         << cell(tab.agreement[t][j]) << '\n';
  run.write("accuracy.csv", os.str());

  if (a.window > 0) {
    const auto w = static_cast<std::size_t>(a.window);
    std::ostringstream sm;
    sm << "block,t_first,t_last,threshold,agreement\n";
    for (std::size_t j = 0; j < tab.thresholds.size(); ++j) {
      std::vector<std::optional<double>> series;
      for (int t = 0; t <= tab.T; ++t) series.push_back(tab.agreement[t][j]);
      const auto blocks = block_means(series, w);
      for (std::size_t b = 0; b < blocks.size(); ++b)
        sm << (b + 1) << ',' << b * w << ',' << std::min(series.size() - 1, (b + 1) * w - 1) << ','
           << cell(tab.thresholds[j]) << ',' << cell(blocks[b]) << '\n';
    }
    run.write("accuracy_smoothed.csv", sm.str());
  }
}

void cmd_simulate(const SimulateArgs& a, Run& run) {
  SimConfig cfg;
  ModelSpec spec;
  if (a.benchmark == "recovery") {
    cfg = benchmark_config(a.n, run.seed());
    spec = benchmark_spec();
  } else if (a.benchmark == "three-state") {
    cfg = three_state_config(a.n, run.seed());
    spec = benchmark_spec();
    spec.K = 1;
  } else {
    throw ParameterError("unknown benchmark '" + a.benchmark + "' (expected recovery or three-state)");
  }
  cfg.T = a.T;
  if (a.missing_rate >= 0.0) cfg.missing_rate = a.missing_rate;
  cfg.validate();
  const SimResult sim = simulate(cfg);

  const auto [base, traj] = dataset_csv(sim.data);

  RiskFactorEncoding schema = sim.data.encoding;
  schema.centering = Eigen::VectorXd(0);
  json truth = to_json(FittedModel{spec, sim.data.encoding, sim.truth, training_r_factor(sim.data, spec.priors.scale_qr)});
  json groups = json::array();
  for (std::size_t i = 0; i < sim.data.size(); ++i)
    groups.push_back({{"id", sim.data.patients[i].id}, {"subgroup", sim.subgroups[i] + 1}});
  truth["subgroups"] = groups;

  std::ostringstream paths;
  paths << "id,subgroup,week,state\n";
  for (std::size_t i = 0; i < sim.data.size(); ++i)
    for (std::size_t t = 0; t < sim.paths[i].size(); ++t)
      paths << csv::quote(sim.data.patients[i].id) << ',' << (sim.subgroups[i] + 1) << ',' << (t + 1) << ','
            << (sim.paths[i][t] + 1) << '\n';

  run.write("baseline.csv", base);
  run.write("trajectories.csv", traj);
  run.write("schema.json", dump(to_json(schema)));
  run.write("truth.json", dump(truth));
  run.write("truth_paths.csv", paths.str());
}

}  // namespace cli
