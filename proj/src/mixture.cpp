#include "copulahmm/mixture.hpp"

#include <cmath>
#include <sstream>

#include "copulahmm/error.hpp"
#include "copulahmm/parallel.hpp"

namespace copulahmm {

void WeightParams::validate() const {
  if (alpha.size() < 1) throw ParameterError("at least one subgroup is required");
  if (beta.rows() != alpha.size()) throw ParameterError("beta must have K rows");
  if (alpha[0] != 0.0 || (beta.cols() > 0 && !beta.row(0).isZero(0.0)))
    throw ParameterError("reference subgroup coefficients must be pinned at zero");
  if (!alpha.allFinite() || !beta.allFinite()) throw ParameterError("non-finite weight coefficients");
}

void MixtureModel::validate() const {
  weights.validate();
  if (static_cast<Eigen::Index>(hmms.size()) != weights.K())
    throw ParameterError("number of HMMs must equal K");
  for (const auto& h : hmms) {
    h.validate();
    if (h.S() != hmms.front().S()) throw ParameterError("all subgroups must share S");
  }
}

Eigen::VectorXd QRTransform::recover_beta(const Eigen::VectorXd& beta_tilde) const {
  return R.triangularView<Eigen::Upper>().solve(beta_tilde);
}

QRTransform qr_reparameterize(const Eigen::MatrixXd& X) {
  const Eigen::Index N = X.rows();
  const Eigen::Index P = X.cols();
  if (N < P) throw InputError("QR reparameterization needs N >= P");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  QRTransform out;
  out.Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, P);
  out.R = qr.matrixQR().topRows(P).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < P; ++j) {
    if (out.R(j, j) < 0.0) {
      out.R.row(j) *= -1.0;
      out.Q.col(j) *= -1.0;
    }
  }
  const double scale = P > 0 ? out.R.diagonal().cwiseAbs().maxCoeff() : 0.0;
  const double tol = 1e-10 * std::max(1.0, scale);
  for (Eigen::Index j = 0; j < P; ++j) {
    if (std::abs(out.R(j, j)) <= tol) {
      std::ostringstream msg;
      msg << "design matrix is rank deficient: column " << j;
      if (j == 0) {
        msg << " is zero";
      } else {
        // X_j = sum_l c_l X_l for the preceding columns.
        const Eigen::VectorXd c = out.R.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(
            out.R.col(j).head(j));
        msg << " = ";
        bool first = true;
        for (Eigen::Index l = 0; l < j; ++l) {
          if (std::abs(c[l]) < 1e-8) continue;
          msg << (first ? "" : " + ") << c[l] << " * column " << l;
          first = false;
        }
        if (first) msg << "0";
      }
      throw InputError(msg.str());
    }
  }
  return out;
}

Eigen::VectorXd log_subgroup_weights(const WeightParams& w, const Eigen::VectorXd& x) {
  if (x.size() != w.P())
    throw InputError("risk-factor vector has " + std::to_string(x.size()) + " entries, model expects " +
                     std::to_string(w.P()));
  Eigen::VectorXd score = w.alpha;
  if (w.P() > 0) score += w.beta * x;
  return score.array() - log_sum_exp(score);
}

Eigen::VectorXd subgroup_weights(const WeightParams& w, const Eigen::VectorXd& x) {
  Eigen::VectorXd score = w.alpha;
  if (x.size() != w.P())
    throw InputError("risk-factor vector has " + std::to_string(x.size()) + " entries, model expects " +
                     std::to_string(w.P()));
  if (w.P() > 0) score += w.beta * x;
  Eigen::ArrayXd e = (score.array() - score.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::VectorXd patient_logliks(const MixtureModel& model, const Dataset& ds) {
  if (model.weights.P() != ds.P()) throw InputError("model and dataset disagree on risk factors");
  std::vector<CompiledHMM> compiled;
  compiled.reserve(model.hmms.size());
  for (const auto& h : model.hmms) {
    if (h.emissions.MP != ds.MP || h.emissions.MD != ds.MD)
      throw InputError("model and dataset disagree on emission supports");
    compiled.emplace_back(h);
  }
  const Eigen::Index K = model.K();
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.size()));
  parallel_chunks(ds.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    Eigen::VectorXd terms(K);
    for (std::size_t i = b; i < e; ++i) {
      const auto& p = ds.patients[i];
      terms = log_subgroup_weights(model.weights, p.x);
      for (Eigen::Index k = 0; k < K; ++k)
        terms[k] += forward_loglik(compiled[static_cast<std::size_t>(k)], p.y);
      out[static_cast<Eigen::Index>(i)] = log_sum_exp(terms);
    }
  });
  return out;
}

double mixture_loglik(const MixtureModel& model, const Dataset& ds) {
  const Eigen::VectorXd l = patient_logliks(model, ds);
  double total = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) total += l[i];
  return total;
}

}  // namespace copulahmm
