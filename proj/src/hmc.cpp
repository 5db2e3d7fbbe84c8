#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "copulahmm/error.hpp"
#include "copulahmm/inference.hpp"

namespace copulahmm {

namespace {

// Warmup schedule: an initial fast buffer (step size only), a series of
// doubling slow windows that estimate the diagonal metric, and a terminal
// fast buffer.
struct WarmupSchedule {
  int init_buffer = 0;
  int term_buffer = 0;
  std::vector<int> window_ends;  // iteration index at which each slow window closes

  explicit WarmupSchedule(int warmup) {
    if (warmup < 20) return;
    int init = 75, term = 50, base = 25;
    if (warmup < init + term + base) {
      init = static_cast<int>(0.15 * warmup);
      term = static_cast<int>(0.1 * warmup);
      base = warmup - init - term;
    }
    init_buffer = init;
    term_buffer = term;
    const int slow_end = warmup - term;
    int start = init;
    int size = base;
    while (start < slow_end) {
      int end = start + size;
      // Stretch the last window if the next one would not fit.
      if (end + 2 * size > slow_end) end = slow_end;
      window_ends.push_back(end);
      start = end;
      size *= 2;
    }
  }

  bool in_slow_window(int it) const {
    return !window_ends.empty() && it >= init_buffer && it < window_ends.back();
  }
  bool closes_window(int it) const {
    return std::find(window_ends.begin(), window_ends.end(), it + 1) != window_ends.end();
  }
};

struct DualAveraging {
  double mu = 0.0, h_bar = 0.0, log_eps_bar = 0.0, delta = 0.8;
  int count = 0;
  static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    h_bar = 0.0;
    log_eps_bar = 0.0;
    count = 0;
  }
  double update(double accept) {
    ++count;
    const double eta = 1.0 / (count + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (delta - accept);
    const double log_eps = mu - std::sqrt(static_cast<double>(count)) / gamma * h_bar;
    const double w = std::pow(static_cast<double>(count), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
};

class Chain {
 public:
  Chain(const PosteriorObjective& obj, Eigen::VectorXd u0, Rng& rng)
      : obj_(obj), rng_(rng), u_(std::move(u0)), inv_metric_(Eigen::VectorXd::Ones(u_.size())) {
    grad_.resize(u_.size());
    lp_ = obj_.value_and_gradient(u_, grad_);
  }

  const Eigen::VectorXd& position() const { return u_; }
  double log_density() const { return lp_; }
  Eigen::VectorXd& inv_metric() { return inv_metric_; }

  struct Transition {
    double accept_prob = 0.0;
    bool divergent = false;
  };

  Transition hmc_step(double eps, int n_leapfrog) {
    std::normal_distribution<double> z(0.0, 1.0);
    const Eigen::Index n = u_.size();
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = z(rng_) / std::sqrt(inv_metric_[i]);
    const double h0 = -lp_ + 0.5 * p.cwiseProduct(inv_metric_).dot(p);
    Eigen::VectorXd u = u_, g = grad_;
    double lp = lp_;
    Transition tr;
    try {
      p += 0.5 * eps * g;
      for (int l = 0; l < n_leapfrog; ++l) {
        u += eps * inv_metric_.cwiseProduct(p);
        lp = obj_.value_and_gradient(u, g);
        if (l + 1 < n_leapfrog) p += eps * g;
      }
      p += 0.5 * eps * g;
    } catch (const NumericalError&) {
      tr.divergent = true;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double draw = unif(rng_);
    if (tr.divergent) return tr;
    const double h = -lp + 0.5 * p.cwiseProduct(inv_metric_).dot(p);
    if (!std::isfinite(h) || h - h0 > 1000.0) {
      tr.divergent = true;
      return tr;
    }
    tr.accept_prob = std::min(1.0, std::exp(h0 - h));
    if (draw < tr.accept_prob) {
      u_ = std::move(u);
      grad_ = std::move(g);
      lp_ = lp;
    }
    return tr;
  }

  Transition random_walk_step(double scale) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd prop = u_;
    for (Eigen::Index i = 0; i < prop.size(); ++i) prop[i] += scale * std::sqrt(inv_metric_[i]) * z(rng_);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double draw = unif(rng_);
    Transition tr;
    try {
      Eigen::VectorXd g(prop.size());
      const double lp = obj_.value_and_gradient(prop, g);
      tr.accept_prob = std::min(1.0, std::exp(lp - lp_));
      if (draw < tr.accept_prob) {
        u_ = std::move(prop);
        grad_ = std::move(g);
        lp_ = lp;
      }
    } catch (const NumericalError&) {
      tr.divergent = true;
    }
    return tr;
  }

  // Doubles or halves eps until the one-step acceptance crosses 0.5.
  double reasonable_step(double eps) {
    const Eigen::VectorXd u0 = u_, g0 = grad_;
    const double lp0 = lp_;
    std::normal_distribution<double> z(0.0, 1.0);
    int direction = 0;
    for (int it = 0; it < 50; ++it) {
      const Eigen::Index n = u0.size();
      Eigen::VectorXd p(n);
      for (Eigen::Index i = 0; i < n; ++i) p[i] = z(rng_) / std::sqrt(inv_metric_[i]);
      const double h0 = -lp0 + 0.5 * p.cwiseProduct(inv_metric_).dot(p);
      double h = std::numeric_limits<double>::infinity();
      try {
        Eigen::VectorXd g = g0;
        p += 0.5 * eps * g;
        const Eigen::VectorXd u = u0 + eps * inv_metric_.cwiseProduct(p);
        const double lp = obj_.value_and_gradient(u, g);
        p += 0.5 * eps * g;
        h = -lp + 0.5 * p.cwiseProduct(inv_metric_).dot(p);
      } catch (const NumericalError&) {
      }
      const double delta = h0 - h;
      const int dir = (std::isfinite(delta) && delta > std::log(0.8)) ? 1 : -1;
      if (direction == 0) direction = dir;
      if (dir != direction) break;
      eps = direction > 0 ? eps * 2.0 : eps * 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
    }
    return eps;
  }

 private:
  const PosteriorObjective& obj_;
  Rng& rng_;
  Eigen::VectorXd u_;
  Eigen::VectorXd grad_;
  Eigen::VectorXd inv_metric_;
  double lp_ = 0.0;
};

struct ChainOutput {
  std::vector<Eigen::VectorXd> draws;
  std::vector<double> lp;
  double step_size = 0.0;
  double accept_rate = 0.0;
  int divergent = 0;
};

ChainOutput run_chain(const PosteriorObjective& obj, const Eigen::VectorXd& start, const SamplerOptions& opts,
                      int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x484d43u};
  Rng rng(seq);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd u0 = start;
  for (Eigen::Index i = 0; i < u0.size(); ++i) u0[i] += opts.init_jitter * z(rng);
  Chain ch(obj, u0, rng);

  const bool hmc = opts.kind == SamplerKind::hmc;
  const WarmupSchedule schedule(opts.n_warmup);
  DualAveraging da;
  da.delta = hmc ? opts.target_accept : 0.234;
  double eps = hmc ? ch.reasonable_step(0.1) : 0.1;
  da.restart(eps);

  const Eigen::Index n = start.size();
  Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(n), w_m2 = Eigen::VectorXd::Zero(n);
  int w_count = 0;

  ChainOutput out;
  double accept_sum = 0.0;
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  for (int it = 0; it < opts.n_iter; ++it) {
    const bool warm = it < opts.n_warmup;
    const double eps_now = warm ? eps : eps * jitter(rng);
    const auto tr = hmc ? ch.hmc_step(eps_now, opts.n_leapfrog) : ch.random_walk_step(eps_now);
    if (warm) {
      eps = da.update(tr.accept_prob);
      if (schedule.in_slow_window(it)) {
        ++w_count;
        const Eigen::VectorXd d = ch.position() - w_mean;
        w_mean += d / w_count;
        w_m2 += d.cwiseProduct(ch.position() - w_mean);
      }
      if (schedule.closes_window(it) && w_count > 2) {
        const double c = static_cast<double>(w_count);
        const Eigen::VectorXd var = w_m2 / (c - 1.0);
        ch.inv_metric() = (c / (c + 5.0)) * var.array() + 1e-3 * (5.0 / (c + 5.0));
        w_mean.setZero();
        w_m2.setZero();
        w_count = 0;
        if (hmc) eps = ch.reasonable_step(eps);
        da.restart(eps);
      }
      if (it + 1 == opts.n_warmup) eps = std::exp(da.log_eps_bar);
      continue;
    }
    accept_sum += tr.accept_prob;
    if (tr.divergent) ++out.divergent;
    out.draws.push_back(ch.position());
    out.lp.push_back(ch.log_density());
  }
  if (opts.n_warmup == 0) eps = std::exp(da.log_eps_bar == 0.0 ? std::log(eps) : da.log_eps_bar);
  out.step_size = eps;
  const auto kept = static_cast<double>(out.draws.size());
  out.accept_rate = kept > 0 ? accept_sum / kept : 0.0;
  return out;
}

}  // namespace

double PosteriorDraws::max_rhat() const {
  double m = 1.0;
  for (const auto& d : diagnostics)
    if (std::isfinite(d.rhat)) m = std::max(m, d.rhat);
  return m;
}

double PosteriorDraws::min_ess() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& d : diagnostics) m = std::min(m, d.ess);
  return m;
}

PosteriorDraws sample_posterior(const Dataset& ds, const ModelSpec& spec, const SamplerOptions& opts) {
  if (opts.n_iter <= opts.n_warmup) throw InputError("n_iter must exceed n_warmup");
  if (opts.n_chains < 1 || opts.n_leapfrog < 1) throw InputError("need at least one chain and one leapfrog step");
  spec.validate();
  const PosteriorObjective obj = PosteriorObjective::for_training(ds, spec);
  Eigen::VectorXd start;
  if (opts.init) {
    start = to_unconstrained(*opts.init, obj.R(), spec);
  } else {
    start = fit_map(ds, spec, opts.map).unconstrained;
  }

  PosteriorDraws out;
  out.spec = spec;
  out.R = obj.R();
  out.warmup = opts.n_warmup;
  out.n_chains = opts.n_chains;
  int divergent = 0;
  for (int c = 0; c < opts.n_chains; ++c) {
    auto chain = run_chain(obj, start, opts, c);
    divergent += chain.divergent;
    out.step_size.push_back(chain.step_size);
    out.accept_rate.push_back(chain.accept_rate);
    for (std::size_t d = 0; d < chain.draws.size(); ++d) {
      out.draws.push_back(from_unconstrained(chain.draws[d], obj.R(), spec));
      out.chain_id.push_back(c);
      out.log_posterior.push_back(chain.lp[d]);
    }
  }
  out.divergence_rate = out.draws.empty() ? 0.0 : static_cast<double>(divergent) / static_cast<double>(out.draws.size());
  if (out.divergence_rate > opts.max_divergence_rate) {
    std::ostringstream msg;
    msg << "divergence rate " << out.divergence_rate << " exceeds " << opts.max_divergence_rate
        << "; use a smaller step size (raise target_accept) or more leapfrog steps";
    throw NumericalError(msg.str());
  }
  out = relabel(out);
  out.diagnostics = compute_diagnostics(out);
  return out;
}

}  // namespace copulahmm
