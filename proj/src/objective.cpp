#include <cmath>
#include <numbers>
#include <string>

#include "copulahmm/error.hpp"
#include "copulahmm/inference.hpp"
#include "copulahmm/parallel.hpp"

namespace copulahmm {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_lpdf(double x, double sd) { return -kLogSqrt2Pi - std::log(sd) - 0.5 * (x / sd) * (x / sd); }

// Stick-breaking simplex with derivatives of every log entry with respect to
// its own unconstrained block.
struct SimplexEval {
  Eigen::VectorXd log_x;
  Eigen::MatrixXd dlog_x;  // n x (n-1)
  double log_prior_plus_jacobian = 0.0;
  Eigen::VectorXd grad;  // d(prior + jacobian)/dy
};

SimplexEval eval_simplex(const Eigen::VectorXd& y, const Eigen::VectorXd& concentration) {
  const Eigen::Index m = y.size();
  const Eigen::Index n = m + 1;
  VectorT<DualX> yd(m);
  for (Eigen::Index j = 0; j < m; ++j) yd[j] = DualX(y[j], m, j);
  VectorT<DualX> log_x;
  DualX log_jac;
  SimplexEval out;
  out.log_x.resize(n);
  out.dlog_x = Eigen::MatrixXd::Zero(n, m);
  if (m == 0) {
    out.log_x[0] = 0.0;
    out.grad.resize(0);
    return out;
  }
  stick_breaking<DualX>(yd, log_x, log_jac);
  double lgamma_terms = std::lgamma(concentration.sum());
  DualX lp = log_jac;
  for (Eigen::Index s = 0; s < n; ++s) {
    out.log_x[s] = log_x[s].value();
    out.dlog_x.row(s) = log_x[s].derivatives().transpose();
    lgamma_terms -= std::lgamma(concentration[s]);
    lp += (concentration[s] - 1.0) * log_x[s];
  }
  out.log_prior_plus_jacobian = lp.value() + lgamma_terms;
  out.grad = lp.derivatives();
  return out;
}

struct SubgroupEval {
  SimplexEval pi;
  std::vector<SimplexEval> phi_rows;
  Eigen::MatrixXd Phi;                  // linear scale
  std::vector<StateLogTable<Dual<3>>> tables;  // per state
  std::vector<Eigen::MatrixXd> joint;   // double log tables [state](yP, yD)
  Eigen::MatrixXd pain;                 // (state, yP)
  Eigen::MatrixXd disability;           // (state, yD)

  double log_emission(Eigen::Index s, const Observation& o) const {
    if (o.pain && o.disability) return joint[static_cast<std::size_t>(s)](*o.pain, *o.disability);
    if (o.pain) return pain(s, *o.pain);
    if (o.disability) return disability(s, *o.disability);
    return 0.0;
  }
};

// Gradient of the log-likelihood with respect to the natural quantities.
struct Accumulator {
  double loglik = 0.0;
  Eigen::VectorXd alpha;   // K
  Eigen::MatrixXd beta;    // K x P (beta_tilde space)
  std::vector<Eigen::VectorXd> log_pi;
  std::vector<Eigen::MatrixXd> log_phi;
  std::vector<std::vector<Eigen::MatrixXd>> joint;  // [k][s](yP, yD)
  std::vector<Eigen::MatrixXd> pain;                // [k](s, yP)
  std::vector<Eigen::MatrixXd> disability;          // [k](s, yD)

  Accumulator(Eigen::Index K, Eigen::Index S, Eigen::Index P, int MP, int MD, bool with_grad) {
    if (!with_grad) return;
    alpha = Eigen::VectorXd::Zero(K);
    beta = Eigen::MatrixXd::Zero(K, P);
    for (Eigen::Index k = 0; k < K; ++k) {
      log_pi.push_back(Eigen::VectorXd::Zero(S));
      log_phi.push_back(Eigen::MatrixXd::Zero(S, S));
      joint.emplace_back(static_cast<std::size_t>(S), Eigen::MatrixXd::Zero(MP + 1, MD + 1));
      pain.push_back(Eigen::MatrixXd::Zero(S, MP + 1));
      disability.push_back(Eigen::MatrixXd::Zero(S, MD + 1));
    }
  }

  void merge(const Accumulator& o) {
    loglik += o.loglik;
    if (alpha.size() == 0) return;
    alpha += o.alpha;
    beta += o.beta;
    for (std::size_t k = 0; k < log_pi.size(); ++k) {
      log_pi[k] += o.log_pi[k];
      log_phi[k] += o.log_phi[k];
      for (std::size_t s = 0; s < joint[k].size(); ++s) joint[k][s] += o.joint[k][s];
      pain[k] += o.pain[k];
      disability[k] += o.disability[k];
    }
  }
};

// Per-subgroup forward-backward results for one patient.
struct PassWorkspace {
  Eigen::MatrixXd emis;   // T x S, exp(e - max_s e)
  Eigen::VectorXd shift;  // T, max_s e
  Eigen::MatrixXd fwd;    // T x S, normalized
  Eigen::MatrixXd bwd;    // T x S, scaled
  Eigen::VectorXd scale;  // T
  Eigen::MatrixXd xi;     // S x S summed over t
  Eigen::MatrixXd gamma;  // T x S
};

double forward_backward(const SubgroupEval& g, const Trajectory& y, bool with_grad, PassWorkspace& w) {
  const auto T = static_cast<Eigen::Index>(y.size());
  const Eigen::Index S = g.pi.log_x.size();
  w.emis.resize(T, S);
  w.shift.resize(T);
  w.fwd.resize(T, S);
  w.scale.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& o = y[static_cast<std::size_t>(t)];
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < S; ++s) {
      w.emis(t, s) = g.log_emission(s, o);
      mx = std::max(mx, w.emis(t, s));
    }
    w.shift[t] = mx;
    for (Eigen::Index s = 0; s < S; ++s) w.emis(t, s) = std::exp(w.emis(t, s) - mx);
  }
  double loglik = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    double c = 0.0;
    for (Eigen::Index s = 0; s < S; ++s) {
      double a = 0.0;
      if (t == 0) {
        a = std::exp(g.pi.log_x[s]);
      } else {
        for (Eigen::Index r = 0; r < S; ++r) a += w.fwd(t - 1, r) * g.Phi(r, s);
      }
      a *= w.emis(t, s);
      w.fwd(t, s) = a;
      c += a;
    }
    w.scale[t] = c;
    w.fwd.row(t) /= c;
    loglik += std::log(c) + w.shift[t];
  }
  if (!with_grad) return loglik;
  w.bwd.resize(T, S);
  w.gamma.resize(T, S);
  w.xi = Eigen::MatrixXd::Zero(S, S);
  w.bwd.row(T - 1).setOnes();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index r = 0; r < S; ++r) {
      double b = 0.0;
      for (Eigen::Index s = 0; s < S; ++s) b += g.Phi(r, s) * w.emis(t + 1, s) * w.bwd(t + 1, s);
      w.bwd(t, r) = b / w.scale[t + 1];
    }
  }
  w.gamma = w.fwd.cwiseProduct(w.bwd);
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const double inv = 1.0 / w.scale[t + 1];
    for (Eigen::Index r = 0; r < S; ++r)
      for (Eigen::Index s = 0; s < S; ++s)
        w.xi(r, s) += w.fwd(t, r) * g.Phi(r, s) * w.emis(t + 1, s) * w.bwd(t + 1, s) * inv;
  }
  return loglik;
}

}  // namespace

Eigen::MatrixXd training_r_factor(const Dataset& ds, bool scaled) {
  const Eigen::Index P = ds.P();
  if (static_cast<Eigen::Index>(ds.size()) < P || ds.empty()) return Eigen::MatrixXd::Identity(P, P);
  Eigen::MatrixXd R = qr_reparameterize(ds.design_matrix()).R;
  if (scaled && ds.size() > 1) R /= std::sqrt(static_cast<double>(ds.size() - 1));
  return R;
}

PosteriorObjective::PosteriorObjective(const Dataset& ds, ModelSpec spec, Eigen::MatrixXd R)
    : ds_(&ds), spec_(std::move(spec)), R_(std::move(R)), layout_(spec_, ds.P()) {
  spec_.validate();
  if (R_.rows() != ds.P() || R_.cols() != ds.P()) throw InputError("R factor does not match the design");
  if (ds.MP != spec_.MP || ds.MD != spec_.MD)
    throw InputError("dataset emission supports differ from the model spec");
  const Eigen::MatrixXd X = ds.design_matrix();
  // q_i = R^{-T} x_i, so that x_i' beta = q_i' beta_tilde.
  q_ = R_.transpose().triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
}

PosteriorObjective PosteriorObjective::for_training(const Dataset& ds, const ModelSpec& spec) {
  return PosteriorObjective(ds, spec, training_r_factor(ds, spec.priors.scale_qr));
}

double PosteriorObjective::value(const Eigen::VectorXd& u) const { return evaluate(u, nullptr).total(); }

double PosteriorObjective::value_and_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  return evaluate(u, &grad).total();
}

PosteriorObjective::Parts PosteriorObjective::parts(const Eigen::VectorXd& u) const {
  return evaluate(u, nullptr);
}

PosteriorObjective::Parts PosteriorObjective::evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const {
  const auto& L = layout_;
  const Eigen::Index K = L.K();
  const Eigen::Index S = L.S();
  const Eigen::Index P = L.P();
  const auto& pr = spec_.priors;
  if (u.size() != L.size()) throw InputError("unconstrained vector has the wrong length");
  if (!u.allFinite()) throw NumericalError("non-finite unconstrained parameters");
  const bool with_grad = grad != nullptr;
  if (with_grad) grad->setZero(L.size());
  Parts parts;

  // Weight coefficients.
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(K);
  Eigen::MatrixXd beta_tilde = Eigen::MatrixXd::Zero(K, P);
  for (Eigen::Index k = 1; k < K; ++k) {
    alpha[k] = u[L.alpha(k)];
    parts.log_prior += normal_lpdf(alpha[k], pr.sd_alpha);
    if (with_grad) (*grad)[L.alpha(k)] -= alpha[k] / (pr.sd_alpha * pr.sd_alpha);
    for (Eigen::Index p = 0; p < P; ++p) {
      beta_tilde(k, p) = u[L.beta(k, p)];
      parts.log_prior += normal_lpdf(beta_tilde(k, p), pr.sd_beta_tilde);
      if (with_grad) (*grad)[L.beta(k, p)] -= beta_tilde(k, p) / (pr.sd_beta_tilde * pr.sd_beta_tilde);
    }
  }

  // Subgroup HMM blocks.
  std::vector<SubgroupEval> groups(static_cast<std::size_t>(K));
  const double log2 = std::numbers::ln2;
  for (Eigen::Index k = 0; k < K; ++k) {
    auto& g = groups[static_cast<std::size_t>(k)];
    g.pi = eval_simplex(u.segment(L.pi(k), S - 1), initial_concentration(static_cast<int>(S)));
    g.Phi.resize(S, S);
    for (Eigen::Index r = 0; r < S; ++r) {
      g.phi_rows.push_back(eval_simplex(u.segment(L.phi_row(k, r), S - 1),
                                        transition_concentration(static_cast<int>(S), static_cast<int>(r))));
      g.Phi.row(r) = g.phi_rows.back().log_x.array().exp().transpose();
    }
    // Dirichlet priors and stick-breaking Jacobians are folded together;
    // split them so parts() reports each separately.
    auto split_simplex = [&](const SimplexEval& se, const Eigen::VectorXd& conc, Eigen::Index off) {
      double lp = std::lgamma(conc.sum());
      for (Eigen::Index s = 0; s < conc.size(); ++s)
        lp += (conc[s] - 1.0) * se.log_x[s] - std::lgamma(conc[s]);
      parts.log_prior += lp;
      parts.log_jacobian += se.log_prior_plus_jacobian - lp;
      if (with_grad && se.grad.size() > 0) grad->segment(off, S - 1) += se.grad;
    };
    split_simplex(g.pi, initial_concentration(static_cast<int>(S)), L.pi(k));
    for (Eigen::Index r = 0; r < S; ++r)
      split_simplex(g.phi_rows[static_cast<std::size_t>(r)],
                    transition_concentration(static_cast<int>(S), static_cast<int>(r)), L.phi_row(k, r));

    Dual<3> rho(1.0, Eigen::Vector3d::Zero());
    if (L.has_rho()) {
      const double log_rt = u[L.log_rho_tilde(k)];
      const double rt = std::exp(log_rt);
      rho = Dual<3>(1.0 + rt, Eigen::Vector3d(0.0, 0.0, rt));
      parts.log_prior += log2 + normal_lpdf(rt, pr.sd_rho_tilde);
      parts.log_jacobian += log_rt;
      if (with_grad) (*grad)[L.log_rho_tilde(k)] += 1.0 - rt * rt / (pr.sd_rho_tilde * pr.sd_rho_tilde);
    }
    g.pain.resize(S, spec_.MP + 1);
    g.disability.resize(S, spec_.MD + 1);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index idx : {L.log_lambda_pain(k, s), L.log_lambda_disability(k, s)}) {
        const double lam = std::exp(u[idx]);
        if (!std::isfinite(lam) || lam <= 0.0)
          throw NumericalError("non-finite emission rate in subgroup " + std::to_string(k + 1));
        parts.log_jacobian += u[idx];
        if (pr.lambda_gamma) {
          const auto& gp = *pr.lambda_gamma;
          parts.log_prior += gp.shape * std::log(gp.rate) - std::lgamma(gp.shape) +
                             (gp.shape - 1.0) * u[idx] - gp.rate * lam;
          if (with_grad) (*grad)[idx] += gp.shape - 1.0 - gp.rate * lam + 1.0;
        } else {
          parts.log_prior += log2 + normal_lpdf(lam, pr.sd_lambda);
          if (with_grad) (*grad)[idx] += 1.0 - lam * lam / (pr.sd_lambda * pr.sd_lambda);
        }
      }
      const double lp_val = std::exp(u[L.log_lambda_pain(k, s)]);
      const double ld_val = std::exp(u[L.log_lambda_disability(k, s)]);
      const Dual<3> lam_p(lp_val, Eigen::Vector3d(lp_val, 0.0, 0.0));
      const Dual<3> lam_d(ld_val, Eigen::Vector3d(0.0, ld_val, 0.0));
      g.tables.push_back(state_log_table<Dual<3>>(lam_p, lam_d, rho, !L.has_rho(), spec_.MP, spec_.MD));
      const auto& tab = g.tables.back();
      Eigen::MatrixXd joint(tab.joint.rows(), tab.joint.cols());
      for (Eigen::Index i = 0; i < joint.rows(); ++i)
        for (Eigen::Index j = 0; j < joint.cols(); ++j) joint(i, j) = tab.joint(i, j).value();
      if (!joint.allFinite())
        throw NumericalError("non-finite emission table in subgroup " + std::to_string(k + 1));
      g.joint.push_back(std::move(joint));
      for (Eigen::Index i = 0; i <= spec_.MP; ++i) g.pain(s, i) = tab.pain[i].value();
      for (Eigen::Index j = 0; j <= spec_.MD; ++j) g.disability(s, j) = tab.disability[j].value();
    }
  }
  if (!std::isfinite(parts.log_prior) || !std::isfinite(parts.log_jacobian))
    throw NumericalError("non-finite prior or Jacobian term");

  // Likelihood over patients.
  const Dataset& ds = *ds_;
  const std::size_t N = ds.size();
  std::vector<Accumulator> acc;
  const std::size_t chunks = std::min<std::size_t>(std::max<std::size_t>(N, 1), kChunkCount);
  for (std::size_t c = 0; c < chunks; ++c) acc.emplace_back(K, S, P, spec_.MP, spec_.MD, with_grad);
  parallel_chunks(N, [&](std::size_t c, std::size_t b, std::size_t e) {
    auto& a = acc[c];
    std::vector<PassWorkspace> work(static_cast<std::size_t>(K));
    Eigen::VectorXd log_w(K), joint_terms(K), r(K), w(K);
    for (std::size_t i = b; i < e; ++i) {
      const auto& patient = ds.patients[i];
      log_w = alpha;
      if (P > 0) log_w += beta_tilde * q_.row(static_cast<Eigen::Index>(i)).transpose();
      log_w.array() -= log_sum_exp(log_w);
      for (Eigen::Index k = 0; k < K; ++k)
        joint_terms[k] = log_w[k] + forward_backward(groups[static_cast<std::size_t>(k)], patient.y,
                                                     with_grad, work[static_cast<std::size_t>(k)]);
      const double li = log_sum_exp(joint_terms);
      a.loglik += li;
      if (!with_grad) continue;
      r = (joint_terms.array() - li).exp();
      w = log_w.array().exp();
      a.alpha += r - w;
      if (P > 0) a.beta += (r - w) * q_.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index k = 0; k < K; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const auto& pw = work[ks];
        const double rk = r[k];
        if (rk == 0.0) continue;
        a.log_pi[ks] += rk * pw.gamma.row(0).transpose();
        // d/dlog Phi(r,s) of log sum over paths = expected transition count.
        a.log_phi[ks] += rk * pw.xi;
        for (std::size_t t = 0; t < patient.y.size(); ++t) {
          const auto& o = patient.y[t];
          if (o.fully_missing()) continue;
          for (Eigen::Index s = 0; s < S; ++s) {
            const double gts = rk * pw.gamma(static_cast<Eigen::Index>(t), s);
            if (o.pain && o.disability)
              a.joint[ks][static_cast<std::size_t>(s)](*o.pain, *o.disability) += gts;
            else if (o.pain)
              a.pain[ks](s, *o.pain) += gts;
            else
              a.disability[ks](s, *o.disability) += gts;
          }
        }
      }
    }
  });
  Accumulator total(K, S, P, spec_.MP, spec_.MD, with_grad);
  for (const auto& a : acc) total.merge(a);
  parts.loglik = total.loglik;
  if (!std::isfinite(parts.loglik)) throw NumericalError("non-finite mixture log-likelihood");
  if (!with_grad) return parts;

  // Chain natural-parameter gradients into the unconstrained coordinates.
  for (Eigen::Index k = 1; k < K; ++k) {
    (*grad)[L.alpha(k)] += total.alpha[k];
    for (Eigen::Index p = 0; p < P; ++p) (*grad)[L.beta(k, p)] += total.beta(k, p);
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const auto& g = groups[ks];
    if (S > 1) {
      grad->segment(L.pi(k), S - 1) += g.pi.dlog_x.transpose() * total.log_pi[ks];
      for (Eigen::Index r = 0; r < S; ++r)
        grad->segment(L.phi_row(k, r), S - 1) +=
            g.phi_rows[static_cast<std::size_t>(r)].dlog_x.transpose() * total.log_phi[ks].row(r).transpose();
    }
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto& tab = g.tables[static_cast<std::size_t>(s)];
      Eigen::Vector3d d = Eigen::Vector3d::Zero();
      const auto& gj = total.joint[ks][static_cast<std::size_t>(s)];
      for (Eigen::Index i = 0; i < gj.rows(); ++i)
        for (Eigen::Index j = 0; j < gj.cols(); ++j)
          if (gj(i, j) != 0.0) d += gj(i, j) * tab.joint(i, j).derivatives();
      for (Eigen::Index i = 0; i <= spec_.MP; ++i)
        if (total.pain[ks](s, i) != 0.0) d += total.pain[ks](s, i) * tab.pain[i].derivatives();
      for (Eigen::Index j = 0; j <= spec_.MD; ++j)
        if (total.disability[ks](s, j) != 0.0) d += total.disability[ks](s, j) * tab.disability[j].derivatives();
      (*grad)[L.log_lambda_pain(k, s)] += d[0];
      (*grad)[L.log_lambda_disability(k, s)] += d[1];
      if (L.has_rho()) (*grad)[L.log_rho_tilde(k)] += d[2];
    }
  }
  if (!grad->allFinite()) throw NumericalError("non-finite gradient");
  return parts;
}

double log_posterior(const Eigen::VectorXd& u, const Dataset& ds, const ModelSpec& spec) {
  return PosteriorObjective::for_training(ds, spec).value(u);
}

}  // namespace copulahmm
