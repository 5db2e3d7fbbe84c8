#include "copulahmm/cvi.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "copulahmm/error.hpp"
#include "copulahmm/parallel.hpp"

namespace copulahmm {

Clustering make_clustering(const Eigen::MatrixXd& Y, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != Y.rows()) throw InputError("one label per trajectory is required");
  const std::set<int> distinct(labels.begin(), labels.end());
  std::map<int, int> remap;
  for (int l : distinct) remap.emplace(l, static_cast<int>(remap.size()));
  Clustering c;
  c.Y = Y;
  c.K = static_cast<int>(distinct.size());
  for (int l : labels) c.labels.push_back(remap.at(l));
  return c;
}

Eigen::MatrixXd panel_matrix(const Dataset& ds, Panel panel) {
  const auto N = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd Y(N, ds.T);
  double cohort_sum = 0.0;
  std::size_t cohort_n = 0;
  auto get = [panel](const Observation& o) { return panel == Panel::pain ? o.pain : o.disability; };
  for (const auto& p : ds.patients)
    for (const auto& o : p.y)
      if (auto v = get(o)) {
        cohort_sum += *v;
        ++cohort_n;
      }
  const double cohort = cohort_n ? cohort_sum / static_cast<double>(cohort_n) : 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& y = ds.patients[static_cast<std::size_t>(i)].y;
    double s = 0.0;
    int n = 0;
    for (const auto& o : y)
      if (auto v = get(o)) {
        s += *v;
        ++n;
      }
    const double fill = n ? s / n : cohort;
    for (Eigen::Index t = 0; t < ds.T; ++t) {
      auto v = get(y[static_cast<std::size_t>(t)]);
      Y(i, t) = v ? static_cast<double>(*v) : fill;
    }
  }
  return Y;
}

Clustering make_clustering(const Dataset& ds, const std::map<std::string, int>& labels, Panel panel) {
  std::vector<int> l;
  l.reserve(ds.size());
  for (const auto& p : ds.patients) {
    auto it = labels.find(p.id);
    if (it == labels.end()) throw InputError("no cluster label for patient '" + p.id + "'");
    l.push_back(it->second);
  }
  return make_clustering(panel_matrix(ds, panel), l);
}

namespace {

struct Summary {
  Eigen::MatrixXd centroid;  // K x T
  Eigen::VectorXd size;
  Eigen::VectorXd scatter;  // mean distance to own centroid
  Eigen::RowVectorXd grand;
};

Summary summarize(const Clustering& c) {
  Summary s;
  const Eigen::Index T = c.Y.cols();
  s.centroid = Eigen::MatrixXd::Zero(c.K, T);
  s.size = Eigen::VectorXd::Zero(c.K);
  s.scatter = Eigen::VectorXd::Zero(c.K);
  for (std::size_t i = 0; i < c.size(); ++i) {
    s.centroid.row(c.labels[i]) += c.Y.row(static_cast<Eigen::Index>(i));
    s.size[c.labels[i]] += 1.0;
  }
  for (int k = 0; k < c.K; ++k) s.centroid.row(k) /= s.size[k];
  for (std::size_t i = 0; i < c.size(); ++i)
    s.scatter[c.labels[i]] += (c.Y.row(static_cast<Eigen::Index>(i)) - s.centroid.row(c.labels[i])).norm();
  s.scatter.array() /= s.size.array();
  s.grand = c.Y.colwise().mean();
  return s;
}

}  // namespace

std::optional<double> calinski_harabasz(const Clustering& c) {
  if (c.K < 2) return std::nullopt;
  const Summary s = summarize(c);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < c.K; ++k) {
    num += s.size[k] * (s.grand - s.centroid.row(k)).norm();
    den += s.size[k] * s.scatter[k];
  }
  if (!(den > 0.0)) return std::nullopt;
  const auto N = static_cast<double>(c.size());
  return (N - c.K) / (c.K - 1.0) * num / den;
}

std::optional<double> silhouette(const Clustering& c, SilhouetteVariant v) {
  if (c.K < 2) return std::nullopt;
  const Summary s = summarize(c);
  const std::size_t N = c.size();
  std::vector<double> term(N, 0.0);
  parallel_chunks(N, [&](std::size_t, std::size_t b, std::size_t e) {
    Eigen::VectorXd sum(c.K);
    for (std::size_t i = b; i < e; ++i) {
      sum.setZero();
      for (std::size_t j = 0; j < N; ++j)
        sum[c.labels[j]] += (c.Y.row(static_cast<Eigen::Index>(i)) - c.Y.row(static_cast<Eigen::Index>(j))).norm();
      const int own = c.labels[i];
      double a;
      if (v == SilhouetteVariant::printed) {
        a = sum[own] / s.size[own];
      } else {
        if (s.size[own] < 2.0) continue;  // singleton: 0
        a = sum[own] / (s.size[own] - 1.0);
      }
      double bmin = std::numeric_limits<double>::infinity();
      for (int l = 0; l < c.K; ++l)
        if (l != own) bmin = std::min(bmin, sum[l] / s.size[l]);
      const double d = std::max(a, bmin);
      term[i] = d > 0.0 ? (bmin - a) / d : 0.0;
    }
  });
  double total = 0.0;
  for (double t : term) total += t;
  return total / static_cast<double>(N);
}

std::optional<double> davies_bouldin_star(const Clustering& c) {
  if (c.K < 2) return std::nullopt;
  const Summary s = summarize(c);
  double total = 0.0;
  for (int k = 0; k < c.K; ++k) {
    double num = 0.0;
    double den = std::numeric_limits<double>::infinity();
    for (int l = 0; l < c.K; ++l) {
      if (l == k) continue;
      num = std::max(num, s.scatter[k] + s.scatter[l]);
      den = std::min(den, (s.centroid.row(l) - s.centroid.row(k)).norm());
    }
    if (!(den > 0.0)) return std::nullopt;
    total += num / den;
  }
  return total / c.K;
}

}  // namespace copulahmm
