#include "copulahmm/assignment.hpp"

#include <cmath>

#include "copulahmm/error.hpp"
#include "copulahmm/parallel.hpp"

namespace copulahmm {

Eigen::Index argmax_first(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace {

AssignmentResult finish(const std::string& id, bool online, int t, Eigen::VectorXd probs) {
  AssignmentResult r;
  r.id = id;
  r.online = online;
  r.t = t;
  r.label = argmax_first(probs);
  r.max_prob = probs[r.label];
  r.probs = std::move(probs);
  return r;
}

Eigen::VectorXd normalize_log(const Eigen::VectorXd& lv) {
  const double lse = log_sum_exp(lv);
  if (!std::isfinite(lse)) throw NumericalError("assignment likelihoods are all zero or non-finite");
  return (lv.array() - lse).exp().matrix();
}

}  // namespace

Assigner::Assigner(const ModelParams& m) { add_members(m); }

Assigner::Assigner(const PosteriorDraws& draws, std::size_t max_draws) {
  if (draws.draws.empty()) throw InputError("no posterior draws to assign with");
  const std::size_t n = draws.draws.size();
  const std::size_t keep = (max_draws == 0 || max_draws >= n) ? n : max_draws;
  for (std::size_t j = 0; j < keep; ++j) add_members(draws.draws[j * n / keep]);
}

void Assigner::add_members(const ModelParams& m) {
  m.validate();
  if (weights_.empty()) {
    K_ = m.K();
    P_ = m.weights.P();
  } else if (m.K() != K_ || m.weights.P() != P_) {
    throw InputError("draws disagree on K or P");
  }
  weights_.push_back(m.weights);
  std::vector<CompiledHMM> c;
  c.reserve(m.hmms.size());
  for (const auto& h : m.hmms) c.emplace_back(h);
  hmms_.push_back(std::move(c));
}

void Assigner::check_x(const Eigen::VectorXd& x) const {
  if (x.size() != P_)
    throw InputError("encoding mismatch: patient has " + std::to_string(x.size()) + " risk factors, model expects " +
                     std::to_string(P_));
}

AssignmentResult Assigner::offline(const std::string& id, const Eigen::VectorXd& x) const {
  check_x(x);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(K_);
  for (const auto& w : weights_) acc += subgroup_weights(w, x);
  acc /= static_cast<double>(weights_.size());
  return finish(id, false, 0, std::move(acc));
}

AssignmentResult Assigner::online(const std::string& id, const Eigen::VectorXd& x,
                                  std::span<const Observation> prefix) const {
  if (prefix.empty()) return offline(id, x);
  check_x(x);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(K_);
  Eigen::VectorXd lv(K_);
  for (std::size_t m = 0; m < weights_.size(); ++m) {
    const Eigen::VectorXd lw = log_subgroup_weights(weights_[m], x);
    for (Eigen::Index k = 0; k < K_; ++k)
      lv[k] = lw[k] + forward_loglik(hmms_[m][static_cast<std::size_t>(k)], prefix);
    acc += normalize_log(lv);
  }
  acc /= static_cast<double>(weights_.size());
  return finish(id, true, static_cast<int>(prefix.size()), std::move(acc));
}

std::vector<AssignmentResult> Assigner::online_path(const PatientRecord& p) const {
  check_x(p.x);
  const std::size_t T = p.y.size();
  std::vector<Eigen::VectorXd> acc(T, Eigen::VectorXd::Zero(K_));
  Eigen::MatrixXd prefix(static_cast<Eigen::Index>(T) + 1, K_);
  Eigen::VectorXd lv(K_);
  for (std::size_t m = 0; m < weights_.size(); ++m) {
    const Eigen::VectorXd lw = log_subgroup_weights(weights_[m], p.x);
    for (Eigen::Index k = 0; k < K_; ++k) {
      const auto pl = forward_prefix_logliks(hmms_[m][static_cast<std::size_t>(k)], p.y);
      for (std::size_t t = 0; t <= T; ++t) prefix(static_cast<Eigen::Index>(t), k) = pl[t];
    }
    for (std::size_t t = 1; t <= T; ++t) {
      lv = lw + prefix.row(static_cast<Eigen::Index>(t)).transpose();
      acc[t - 1] += normalize_log(lv);
    }
  }
  std::vector<AssignmentResult> out;
  out.reserve(T + 1);
  out.push_back(offline(p.id, p.x));
  for (std::size_t t = 1; t <= T; ++t)
    out.push_back(finish(p.id, true, static_cast<int>(t), acc[t - 1] / static_cast<double>(weights_.size())));
  return out;
}

AssignmentResult assign_offline(const ModelParams& m, const Eigen::VectorXd& x) {
  return Assigner(m).offline("", x);
}

AssignmentResult assign_online(const ModelParams& m, const Eigen::VectorXd& x, std::span<const Observation> prefix) {
  return Assigner(m).online("", x, prefix);
}

AccuracyTable accuracy_over_time(const Assigner& a, const Dataset& ds, const std::vector<double>& thresholds) {
  if (ds.empty()) throw InputError("accuracy needs a nonempty dataset");
  if (thresholds.empty()) throw InputError("accuracy needs at least one threshold");
  const auto T = static_cast<std::size_t>(ds.T);
  std::vector<std::vector<AssignmentResult>> paths(ds.size());
  parallel_chunks(ds.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) paths[i] = a.online_path(ds.patients[i]);
  });
  AccuracyTable tab;
  tab.thresholds = thresholds;
  tab.T = ds.T;
  tab.n_qualifying.assign(T + 1, std::vector<std::size_t>(thresholds.size(), 0));
  tab.agreement.assign(T + 1, std::vector<std::optional<double>>(thresholds.size()));
  for (std::size_t t = 0; t <= T; ++t)
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
      std::size_t n = 0, agree = 0;
      for (const auto& path : paths) {
        const auto& r = path[t];
        if (r.max_prob > thresholds[j]) {
          ++n;
          if (r.label == path[T].label) ++agree;
        }
      }
      tab.n_qualifying[t][j] = n;
      if (n > 0) tab.agreement[t][j] = static_cast<double>(agree) / static_cast<double>(n);
    }
  return tab;
}

std::vector<std::optional<double>> block_means(const std::vector<std::optional<double>>& series, std::size_t window) {
  if (window == 0) throw InputError("window must be positive");
  std::vector<std::optional<double>> out;
  for (std::size_t b = 0; b < series.size(); b += window) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = b; i < std::min(series.size(), b + window); ++i)
      if (series[i]) {
        s += *series[i];
        ++n;
      }
    out.push_back(n ? std::optional<double>(s / n) : std::nullopt);
  }
  return out;
}

}  // namespace copulahmm
