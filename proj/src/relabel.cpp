#include <algorithm>
#include <numeric>

#include "copulahmm/error.hpp"
#include "copulahmm/inference.hpp"

namespace copulahmm {

namespace {

// Indices sorted by decreasing primary key, then decreasing secondary key,
// then increasing original index.
std::vector<int> canonical_order(const Eigen::VectorXd& primary, const Eigen::VectorXd& secondary) {
  std::vector<int> idx(static_cast<std::size_t>(primary.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (primary[a] != primary[b]) return primary[a] > primary[b];
    if (secondary[a] != secondary[b]) return secondary[a] > secondary[b];
    return a < b;
  });
  return idx;
}

}  // namespace

ModelParams permute_states(const ModelParams& m, Eigen::Index k, const std::vector<int>& perm) {
  ModelParams out = m;
  const auto& h = m.hmms.at(static_cast<std::size_t>(k));
  auto& o = out.hmms[static_cast<std::size_t>(k)];
  const auto S = static_cast<Eigen::Index>(perm.size());
  if (S != h.S()) throw ParameterError("state permutation has the wrong length");
  for (Eigen::Index a = 0; a < S; ++a) {
    o.pi[a] = h.pi[perm[a]];
    o.emissions.lambda_pain[a] = h.emissions.lambda_pain[perm[a]];
    o.emissions.lambda_disability[a] = h.emissions.lambda_disability[perm[a]];
    for (Eigen::Index b = 0; b < S; ++b) o.Phi(a, b) = h.Phi(perm[a], perm[b]);
  }
  return out;
}

ModelParams permute_subgroups(const ModelParams& m, const std::vector<int>& perm) {
  const Eigen::Index K = m.K();
  if (static_cast<Eigen::Index>(perm.size()) != K) throw ParameterError("subgroup permutation has the wrong length");
  ModelParams out = m;
  const double a0 = m.weights.alpha[perm[0]];
  const Eigen::RowVectorXd b0 = m.weights.beta.row(perm[0]);
  for (Eigen::Index k = 0; k < K; ++k) {
    out.hmms[static_cast<std::size_t>(k)] = m.hmms[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    out.weights.alpha[k] = m.weights.alpha[perm[static_cast<std::size_t>(k)]] - a0;
    out.weights.beta.row(k) = m.weights.beta.row(perm[static_cast<std::size_t>(k)]) - b0;
  }
  out.weights.alpha[0] = 0.0;
  out.weights.beta.row(0).setZero();
  return out;
}

ModelParams relabel(const ModelParams& m) {
  ModelParams out = m;
  for (Eigen::Index k = 0; k < m.K(); ++k) {
    const auto& e = out.hmms[static_cast<std::size_t>(k)].emissions;
    const auto order = canonical_order(e.lambda_pain, e.lambda_disability);
    out = permute_states(out, k, order);
  }
  Eigen::VectorXd key(m.K()), tie(m.K());
  for (Eigen::Index k = 0; k < m.K(); ++k) {
    const auto& e = out.hmms[static_cast<std::size_t>(k)].emissions;
    key[k] = e.lambda_pain.mean();
    tie[k] = e.lambda_disability.mean();
  }
  return permute_subgroups(out, canonical_order(key, tie));
}

PosteriorDraws relabel(const PosteriorDraws& draws) {
  if (draws.draws.empty()) throw InputError("cannot relabel an empty set of draws");
  PosteriorDraws out = draws;
  for (auto& d : out.draws) d = relabel(d);
  return out;
}

}  // namespace copulahmm
