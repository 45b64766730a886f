#pragma once

// Synthetic clustering instances shared by unit and acceptance tests.

#include <vector>

#include "hintscout/kmeans.hpp"
#include "hintscout/similarity.hpp"
#include "support/oracles.hpp"

namespace hintscout::testing {

struct PlantedInstance {
  std::vector<LayerRepresentation> reps;
  std::vector<int> truth;  // planted cluster per layer, 1-based, in layer order
};

/// Contiguous planted groups: every member is its group's base matrix plus
/// small noise.  Within-group linear CKA is near 1 and across-group CKA is
/// near C/N for independent Gaussian bases.
inline PlantedInstance planted_instance(Rng& rng, const std::vector<int>& group_sizes, Eigen::Index samples = 200,
                                        Eigen::Index channels = 4, double noise = 0.05) {
  PlantedInstance inst;
  int index = 1;
  int group = 1;
  for (const int size : group_sizes) {
    const Matrix base = random_matrix(rng, samples, channels);
    for (int m = 0; m < size; ++m) {
      inst.reps.push_back(make_rep(index++, base + random_matrix(rng, samples, channels, noise)));
      inst.truth.push_back(group);
    }
    ++group;
  }
  return inst;
}

/// Checks the separation the planted construction promises under linear CKA.
inline bool well_separated(const PlantedInstance& inst, double within = 0.99, double across = 0.2) {
  const auto s = similarity_matrix(inst.reps, {MetricKind::cka_linear, 0.5});
  for (std::size_t i = 0; i < inst.reps.size(); ++i) {
    for (std::size_t j = i + 1; j < inst.reps.size(); ++j) {
      const double v = s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (inst.truth[i] == inst.truth[j] ? v < within : v > across) return false;
    }
  }
  return true;
}

/// Same partition up to renaming of cluster ids.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

inline std::vector<LayerRepresentation> random_instance(Rng& rng, int layers, Eigen::Index samples, int max_channels) {
  std::uniform_int_distribution<int> width(2, max_channels);
  std::vector<LayerRepresentation> reps;
  for (int i = 0; i < layers; ++i) reps.push_back(make_rep(i + 1, random_matrix(rng, samples, width(rng))));
  return pad_channels(reps);
}

/// Oracle similarity between a (padded) layer and a centroid, evaluated with
/// the dense reference formulas.
inline PairMetric oracle_metric(const MetricSpec& spec) {
  return [spec](const Matrix& layer, Eigen::Index channels, const Matrix& centroid) {
    switch (spec.kind) {
      case MetricKind::cka_linear: return oracle_cka_linear(layer, centroid);
      case MetricKind::cka_rbf: return oracle_cka_rbf(layer, centroid, spec.rbf_bandwidth_fraction);
      case MetricKind::r2_cca: return oracle_r2_cca(layer, centroid, channels);
    }
    return 0.0;
  };
}

}  // namespace hintscout::testing
