#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "copulahmm/data.hpp"

namespace copulahmm {

enum class Panel { pain, disability };

// Trajectories of one symptom dimension (rows = patients) with 0-based
// cluster labels. Labels are compacted so every cluster is nonempty.
struct Clustering {
  Eigen::MatrixXd Y;
  std::vector<int> labels;
  int K = 0;

  std::size_t size() const { return labels.size(); }
};

Clustering make_clustering(const Eigen::MatrixXd& Y, const std::vector<int>& labels);

// N x T matrix for one panel. Missing weeks take the patient's own mean; a
// patient with no observations takes the cohort mean.
Eigen::MatrixXd panel_matrix(const Dataset& ds, Panel panel);

// Clustering of the dataset's patients; every patient id must be labeled.
Clustering make_clustering(const Dataset& ds, const std::map<std::string, int>& labels, Panel panel);

// All three return nullopt where the index is undefined (fewer than two
// clusters, zero scatter denominator, coincident centroids).
std::optional<double> calinski_harabasz(const Clustering& c);

enum class SilhouetteVariant {
  printed,   // a() averages over |c_k| members including the point itself
  textbook,  // a() averages over the |c_k| - 1 other members; singletons score 0
};
std::optional<double> silhouette(const Clustering& c, SilhouetteVariant v = SilhouetteVariant::printed);

std::optional<double> davies_bouldin_star(const Clustering& c);

}  // namespace copulahmm
