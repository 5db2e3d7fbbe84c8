#include "copulahmm/hmm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "copulahmm/error.hpp"

namespace copulahmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_trajectory(const CompiledHMM& m, std::span<const Observation> traj) {
  const auto& t = m.table;
  const auto MP = t.pain.cols() - 1;
  const auto MD = t.disability.cols() - 1;
  for (const auto& o : traj) {
    if ((o.pain && (*o.pain < 0 || *o.pain > MP)) ||
        (o.disability && (*o.disability < 0 || *o.disability > MD)))
      throw InputError("malformed trajectory: observation outside the emission support");
  }
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace

void SubgroupHMM::validate() const {
  const Eigen::Index n = S();
  if (n < 1) throw ParameterError("HMM needs at least one state");
  if (Phi.rows() != n || Phi.cols() != n) throw ParameterError("transition matrix must be S x S");
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12)
    throw ParameterError("initial distribution must be a probability vector");
  for (Eigen::Index r = 0; r < n; ++r)
    if ((Phi.row(r).array() < 0.0).any() || std::abs(Phi.row(r).sum() - 1.0) > 1e-12)
      throw ParameterError("transition row " + std::to_string(r) + " is not stochastic");
  if (emissions.S() != n) throw ParameterError("emission parameters must have S states");
  emissions.validate();
}

CompiledHMM::CompiledHMM(const SubgroupHMM& m) : table(joint_log_pmf_table(m.emissions)) {
  m.validate();
  log_pi = m.pi.unaryExpr(&safe_log);
  log_Phi = m.Phi.unaryExpr(&safe_log);
}

Eigen::VectorXd CompiledHMM::log_emission(const Observation& o) const {
  Eigen::VectorXd e(S());
  for (Eigen::Index s = 0; s < S(); ++s) e[s] = table.log_emission(s, o);
  return e;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

std::vector<double> forward_prefix_logliks(const CompiledHMM& m, std::span<const Observation> traj) {
  check_trajectory(m, traj);
  std::vector<double> out(traj.size() + 1, 0.0);
  if (traj.empty()) return out;
  const Eigen::Index S = m.S();
  Eigen::VectorXd alpha = m.log_pi + m.log_emission(traj[0]);
  out[1] = log_sum_exp(alpha);
  Eigen::VectorXd next(S);
  for (std::size_t t = 1; t < traj.size(); ++t) {
    const Eigen::VectorXd e = m.log_emission(traj[t]);
    for (Eigen::Index s = 0; s < S; ++s) next[s] = log_sum_exp(alpha + m.log_Phi.col(s)) + e[s];
    alpha.swap(next);
    out[t + 1] = log_sum_exp(alpha);
  }
  return out;
}

double forward_loglik(const CompiledHMM& m, std::span<const Observation> traj) {
  if (traj.empty()) throw InputError("malformed trajectory: length must be >= 1");
  return forward_prefix_logliks(m, traj).back();
}

double forward_loglik(const SubgroupHMM& m, std::span<const Observation> traj) {
  return forward_loglik(CompiledHMM(m), traj);
}

std::vector<int> viterbi_decode(const CompiledHMM& m, std::span<const Observation> traj) {
  if (traj.empty()) throw InputError("malformed trajectory: length must be >= 1");
  check_trajectory(m, traj);
  const Eigen::Index S = m.S();
  const auto T = static_cast<Eigen::Index>(traj.size());
  Eigen::MatrixXi back(T, S);
  Eigen::VectorXd delta = m.log_pi + m.log_emission(traj[0]);
  Eigen::VectorXd next(S);
  for (Eigen::Index t = 1; t < T; ++t) {
    const Eigen::VectorXd e = m.log_emission(traj[static_cast<std::size_t>(t)]);
    for (Eigen::Index s = 0; s < S; ++s) {
      Eigen::Index best = 0;
      double best_score = delta[0] + m.log_Phi(0, s);
      for (Eigen::Index r = 1; r < S; ++r) {
        const double score = delta[r] + m.log_Phi(r, s);
        if (score > best_score) {
          best_score = score;
          best = r;
        }
      }
      back(t, s) = static_cast<int>(best);
      next[s] = best_score + e[s];
    }
    delta.swap(next);
  }
  std::vector<int> path(static_cast<std::size_t>(T));
  Eigen::Index last = 0;
  for (Eigen::Index s = 1; s < S; ++s)
    if (delta[s] > delta[last]) last = s;
  path.back() = static_cast<int>(last);
  for (Eigen::Index t = T - 1; t > 0; --t)
    path[static_cast<std::size_t>(t - 1)] = back(t, path[static_cast<std::size_t>(t)]);
  return path;
}

std::vector<int> viterbi_decode(const SubgroupHMM& m, std::span<const Observation> traj) {
  return viterbi_decode(CompiledHMM(m), traj);
}

double path_log_score(const CompiledHMM& m, std::span<const Observation> traj,
                      std::span<const int> path) {
  if (traj.size() != path.size() || traj.empty())
    throw InputError("path and trajectory lengths differ");
  double score = m.log_pi[path[0]] + m.table.log_emission(path[0], traj[0]);
  for (std::size_t t = 1; t < traj.size(); ++t)
    score += m.log_Phi(path[t - 1], path[t]) + m.table.log_emission(path[t], traj[t]);
  return score;
}

Eigen::MatrixXd state_occupancy(const std::vector<std::vector<int>>& paths, Eigen::Index S) {
  if (paths.empty()) throw InputError("state occupancy needs at least one path");
  const auto T = static_cast<Eigen::Index>(paths.front().size());
  Eigen::MatrixXd occ = Eigen::MatrixXd::Zero(T, S);
  for (const auto& p : paths) {
    if (static_cast<Eigen::Index>(p.size()) != T) throw InputError("decoded paths differ in length");
    for (Eigen::Index t = 0; t < T; ++t) {
      const int s = p[static_cast<std::size_t>(t)];
      if (s < 0 || s >= S) throw InputError("state index out of range in decoded path");
      occ(t, s) += 1.0;
    }
  }
  return occ / static_cast<double>(paths.size());
}

}  // namespace copulahmm
