#include "copulahmm/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include "copulahmm/error.hpp"
#include "copulahmm/csv.hpp"

namespace copulahmm {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw InputError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw InputError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

namespace {

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

Eigen::VectorXd read_vec(const json& j) {
  if (!j.is_array()) throw InputError("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd read_mat(const json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw InputError("expected a JSON array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = read_vec(j[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw InputError("ragged matrix in JSON");
    m.row(r) = row.transpose();
  }
  return m;
}

const char* kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
  }
  return "numeric";
}

ColumnKind kind_from(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "binary") return ColumnKind::binary;
  if (s == "categorical") return ColumnKind::categorical;
  throw InputError("unknown column kind '" + s + "'");
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json to_json(const PriorSettings& p) {
  json j{{"sd_alpha", p.sd_alpha},
         {"sd_beta_tilde", p.sd_beta_tilde},
         {"sd_lambda", p.sd_lambda},
         {"sd_rho_tilde", p.sd_rho_tilde},
         {"scale_qr", p.scale_qr}};
  if (p.lambda_gamma) j["lambda_gamma"] = {{"shape", p.lambda_gamma->shape}, {"rate", p.lambda_gamma->rate}};
  return j;
}

PriorSettings priors_from_json(const json& j) {
  return guarded("priors", [&] {
    PriorSettings p;
    p.sd_alpha = j.value("sd_alpha", p.sd_alpha);
    p.sd_beta_tilde = j.value("sd_beta_tilde", p.sd_beta_tilde);
    p.sd_lambda = j.value("sd_lambda", p.sd_lambda);
    p.sd_rho_tilde = j.value("sd_rho_tilde", p.sd_rho_tilde);
    p.scale_qr = j.value("scale_qr", p.scale_qr);
    if (j.contains("lambda_gamma"))
      p.lambda_gamma = GammaPrior{j["lambda_gamma"].at("shape").get<double>(), j["lambda_gamma"].at("rate").get<double>()};
    p.validate();
    return p;
  });
}

json to_json(const ModelSpec& s) {
  return {{"K", s.K},
          {"S", s.S},
          {"MP", s.MP},
          {"MD", s.MD},
          {"copula", s.copula == CopulaFamily::survival_gumbel ? "survival-gumbel" : "independence"},
          {"priors", to_json(s.priors)}};
}

ModelSpec spec_from_json(const json& j) {
  return guarded("model spec", [&] {
    ModelSpec s;
    s.K = j.value("K", s.K);
    s.S = j.value("S", s.S);
    s.MP = j.value("MP", s.MP);
    s.MD = j.value("MD", s.MD);
    const std::string c = j.value("copula", std::string("survival-gumbel"));
    if (c == "survival-gumbel") s.copula = CopulaFamily::survival_gumbel;
    else if (c == "independence") s.copula = CopulaFamily::independence;
    else throw InputError("unknown copula '" + c + "'");
    if (j.contains("priors")) s.priors = priors_from_json(j["priors"]);
    s.validate();
    return s;
  });
}

json to_json(const RiskFactorEncoding& enc) {
  json cols = json::array();
  for (const auto& c : enc.columns) cols.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}, {"levels", c.levels}});
  json j{{"columns", cols}};
  if (enc.has_centering()) j["centering"] = vec(enc.centering);
  return j;
}

RiskFactorEncoding encoding_from_json(const json& j) {
  return guarded("encoding", [&] {
    RiskFactorEncoding enc;
    for (const auto& c : j.at("columns")) {
      ColumnSpec cs;
      cs.name = c.at("name").get<std::string>();
      cs.kind = kind_from(c.value("kind", std::string("numeric")));
      cs.levels = c.value("levels", std::vector<std::string>{});
      enc.columns.push_back(std::move(cs));
    }
    if (j.contains("centering")) {
      enc.centering = read_vec(j["centering"]);
      if (enc.centering.size() != enc.width()) throw InputError("centering length does not match the encoding");
      if (!enc.centering.allFinite()) throw InputError("centering values must be finite");
    }
    return enc;
  });
}

json to_json(const ModelParams& m) {
  json subs = json::array();
  for (const auto& h : m.hmms) {
    json s{{"pi", vec(h.pi)},
           {"Phi", mat(h.Phi)},
           {"lambda_pain", vec(h.emissions.lambda_pain)},
           {"lambda_disability", vec(h.emissions.lambda_disability)},
           {"rho", h.emissions.copula.rho}};
    subs.push_back(std::move(s));
  }
  return {{"alpha", vec(m.weights.alpha)}, {"beta", mat(m.weights.beta)}, {"subgroups", subs}};
}

ModelParams params_from_json(const json& j) {
  return guarded("model parameters", [&] {
    ModelParams m;
    m.weights.alpha = read_vec(j.at("alpha"));
    m.weights.beta = read_mat(j.at("beta"));
    if (m.weights.beta.rows() != m.weights.alpha.size()) throw InputError("alpha and beta disagree on K");
    for (const auto& s : j.at("subgroups")) {
      SubgroupHMM h;
      h.pi = read_vec(s.at("pi"));
      h.Phi = read_mat(s.at("Phi"));
      h.emissions.lambda_pain = read_vec(s.at("lambda_pain"));
      h.emissions.lambda_disability = read_vec(s.at("lambda_disability"));
      h.emissions.copula.rho = s.value("rho", 1.0);
      m.hmms.push_back(std::move(h));
    }
    return m;
  });
}

json to_json(const FittedModel& f) {
  const QRTransform qr{Eigen::MatrixXd(), f.R};
  Eigen::MatrixXd beta_tilde(f.params.weights.beta.rows(), f.params.weights.beta.cols());
  for (Eigen::Index k = 0; k < beta_tilde.rows(); ++k)
    beta_tilde.row(k) = qr.to_beta_tilde(f.params.weights.beta.row(k).transpose()).transpose();
  json j{{"format", "copulahmm-model"},
         {"version", kVersion},
         {"spec", to_json(f.spec)},
         {"encoding", to_json(f.encoding)},
         {"R", mat(f.R)},
         {"beta_tilde", mat(beta_tilde)},
         {"params", to_json(f.params)}};
  return j;
}

FittedModel fitted_from_json(const json& j) {
  return guarded("model file", [&] {
    if (j.value("format", std::string()) != "copulahmm-model") throw InputError("not a model file (format tag missing)");
    FittedModel f;
    f.spec = spec_from_json(j.at("spec"));
    f.encoding = encoding_from_json(j.at("encoding"));
    f.params = params_from_json(j.at("params"));
    for (auto& h : f.params.hmms) {
      h.emissions.copula.family = f.spec.copula;
      h.emissions.MP = f.spec.MP;
      h.emissions.MD = f.spec.MD;
    }
    const Eigen::Index P = f.encoding.width();
    f.R = j.contains("R") ? read_mat(j["R"], P) : Eigen::MatrixXd::Identity(P, P);
    if (f.params.K() != f.spec.K || f.params.S() != f.spec.S || f.params.weights.P() != P)
      throw InputError("model parameters do not match the stored spec/encoding");
    f.params.validate();
    return f;
  });
}

FittedModel read_fitted_model(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return fitted_from_json(j);
  } catch (const std::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string draws_csv(const PosteriorDraws& draws) {
  std::ostringstream out;
  const Eigen::Index P = draws.draws.empty() ? 0 : draws.draws.front().weights.P();
  const auto names = constrained_names(draws.spec, P);
  out << "chain,lp__";
  for (const auto& n : names) out << ',' << csv::quote(n);
  out << '\n';
  for (std::size_t d = 0; d < draws.draws.size(); ++d) {
    out << draws.chain_id[d] + 1 << ',' << format_double(draws.log_posterior[d]);
    const Eigen::VectorXd v = flatten(draws.draws[d], draws.spec);
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
    out << '\n';
  }
  return out.str();
}

PosteriorDraws read_draws_csv(const fs::path& path, const ModelSpec& spec, Eigen::Index P) {
  const auto table = csv::read(path);
  const auto names = constrained_names(spec, P);
  if (table.header.size() != names.size() + 2 || table.header[0] != "chain" || table.header[1] != "lp__")
    throw InputError(path.string() + ": draws header does not match the model spec");
  for (std::size_t i = 0; i < names.size(); ++i)
    if (table.header[i + 2] != names[i])
      throw InputError(path.string() + ": unexpected column '" + table.header[i + 2] + "', expected '" + names[i] + "'");
  PosteriorDraws out;
  out.spec = spec;
  out.R = Eigen::MatrixXd::Identity(P, P);
  int max_chain = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto num = [&](std::size_t c) {
      try {
        std::size_t used = 0;
        const double v = std::stod(row[c], &used);
        if (used != row[c].size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw InputError(path.filename().string() + ":" + std::to_string(table.line[r]) + ": bad number '" + row[c] + "'");
      }
    };
    const int chain = static_cast<int>(num(0)) - 1;
    if (chain < 0) throw InputError(path.string() + ": chain ids start at 1");
    max_chain = std::max(max_chain, chain + 1);
    Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) v[static_cast<Eigen::Index>(i)] = num(i + 2);
    out.draws.push_back(unflatten(v, spec, P));
    out.chain_id.push_back(chain);
    out.log_posterior.push_back(num(1));
  }
  if (out.draws.empty()) throw InputError(path.string() + ": no draws");
  out.n_chains = max_chain;
  return out;
}

json diagnostics_json(const PosteriorDraws& draws) {
  json params = json::array();
  for (const auto& d : draws.diagnostics)
    params.push_back({{"name", d.name},
                      {"mean", d.mean},
                      {"sd", d.sd},
                      {"rhat", std::isfinite(d.rhat) ? json(d.rhat) : json(nullptr)},
                      {"ess", std::isfinite(d.ess) ? json(d.ess) : json(nullptr)}});
  const double mr = draws.max_rhat();
  return {{"n_chains", draws.n_chains},
          {"n_draws", draws.size()},
          {"warmup", draws.warmup},
          {"divergence_rate", draws.divergence_rate},
          {"step_size", draws.step_size},
          {"accept_rate", draws.accept_rate},
          {"max_rhat", std::isfinite(mr) ? json(mr) : json(nullptr)},
          {"min_ess", draws.min_ess()},
          {"parameters", params}};
}

}  // namespace copulahmm
