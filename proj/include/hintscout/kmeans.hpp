#pragma once

// k-means over layer representations with D(x, mu) = 1 - similarity(x, mu).
//
// Seeds are spread evenly over the layer order (first / center / last for
// k = 3).  Iteration alternates nearest-centroid assignment and entrywise
// centroid means until the labels stop changing.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintscout/errors.hpp"
#include "hintscout/layer_repr.hpp"
#include "hintscout/parallel.hpp"
#include "hintscout/similarity.hpp"

namespace hintscout {

enum class SeedRule { evenly_spaced_by_index };

struct ClusterConfig {
  int k = 3;
  MetricSpec metric;
  int max_iterations = 100;
  SeedRule seed_rule = SeedRule::evenly_spaced_by_index;
};

struct ClusterAssignment {
  std::vector<int> layer_indices;   // 1-based manifest indices, input order
  std::vector<int> labels;          // cluster id in [1, k] per layer
  std::vector<Matrix> centroids;    // k matrices, N x C_pad
  double cost = 0.0;
  std::vector<double> cost_history; // cost after each update step
  int iterations_run = 0;
  bool converged = false;
  ClusterConfig config;
};

/// 1-based layer positions round(1 + (i-1)(L-1)/(k-1)), i = 1..k, rounding
/// exact halves down.
inline std::vector<int> seed_positions(int layer_count, int k) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (k > layer_count) {
    throw ArgumentError("k = " + std::to_string(k) + " exceeds the number of layers (" + std::to_string(layer_count) + ")");
  }
  if (k == 1) return {1};
  std::vector<int> pos;
  pos.reserve(static_cast<std::size_t>(k));
  const std::int64_t den = k - 1;
  for (int i = 1; i <= k; ++i) {
    const std::int64_t num = static_cast<std::int64_t>(i - 1) * (layer_count - 1);
    std::int64_t q = num / den;
    if (2 * (num % den) > den) ++q;
    pos.push_back(static_cast<int>(1 + q));
  }
  return pos;
}

inline std::vector<Matrix> seed(const std::vector<LayerRepresentation>& reps, int k) {
  std::vector<Matrix> seeds;
  for (const int p : seed_positions(static_cast<int>(reps.size()), k)) {
    seeds.push_back(reps[static_cast<std::size_t>(p - 1)].matrix);
  }
  return seeds;
}

inline std::vector<PreparedOperand> prepare_centroids(const std::vector<Matrix>& centroids, const MetricSpec& spec) {
  std::vector<PreparedOperand> ops(centroids.size());
  parallel_for(centroids.size(), [&](std::size_t j) {
    try {
      ops[j] = prepare(centroids[j], spec);
    } catch (const DegenerateError& e) {
      throw DegenerateError("cluster " + std::to_string(j + 1) + " centroid: " + e.what());
    }
  });
  return ops;
}

/// L x k matrix of D(x_i, mu_j) = 1 - similarity, clamped at zero.
inline Matrix distance_grid(const std::vector<PreparedOperand>& layers, const std::vector<PreparedOperand>& centroids) {
  const auto rows = static_cast<Eigen::Index>(layers.size());
  const auto cols = static_cast<Eigen::Index>(centroids.size());
  Matrix d(rows, cols);
  parallel_for(layers.size() * centroids.size(), [&](std::size_t cell) {
    const auto i = cell / centroids.size();
    const auto j = cell % centroids.size();
    d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        std::max(0.0, 1.0 - compare(layers[i], centroids[j]));
  });
  return d;
}

/// Nearest centroid per row, ties to the lower cluster id.  Ids are 1-based.
inline std::vector<int> nearest_labels(const Matrix& distances) {
  std::vector<int> labels(static_cast<std::size_t>(distances.rows()));
  for (Eigen::Index i = 0; i < distances.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < distances.cols(); ++j) {
      if (distances(i, j) < distances(i, best)) best = j;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return labels;
}

/// Fills empty clusters by moving the layer farthest from its own centroid
/// (among clusters with more than one member) into each empty cluster.
inline void repair_empty_clusters(std::vector<int>& labels, const Matrix& distances, int k) {
  for (int target = 1; target <= k; ++target) {
    std::vector<int> sizes(static_cast<std::size_t>(k + 1), 0);
    for (const int l : labels) ++sizes[static_cast<std::size_t>(l)];
    if (sizes[static_cast<std::size_t>(target)] > 0) continue;
    std::ptrdiff_t pick = -1;
    double worst = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int own = labels[i];
      if (sizes[static_cast<std::size_t>(own)] < 2) continue;
      const double d = distances(static_cast<Eigen::Index>(i), own - 1);
      if (d > worst) {
        worst = d;
        pick = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (pick < 0) throw InvariantError("cannot repair empty cluster: too few layers");
    labels[static_cast<std::size_t>(pick)] = target;
  }
}

inline std::vector<int> assign(const std::vector<LayerRepresentation>& reps, const std::vector<Matrix>& centroids,
                               const MetricSpec& spec) {
  return nearest_labels(distance_grid(prepare_all(reps, spec), prepare_centroids(centroids, spec)));
}

/// Centroid j is the entrywise mean of the member matrices.
inline std::vector<Matrix> update(const std::vector<LayerRepresentation>& reps, const std::vector<int>& labels, int k) {
  if (reps.size() != labels.size()) throw ArgumentError("update: labels and layers differ in length");
  if (reps.empty()) throw ArgumentError("update: no layers");
  const auto rows = reps.front().matrix.rows();
  const auto cols = reps.front().matrix.cols();
  std::vector<Matrix> sums(static_cast<std::size_t>(k), Matrix::Zero(rows, cols));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const int l = labels[i];
    if (l < 1 || l > k) throw ArgumentError("update: label out of range");
    if (reps[i].matrix.rows() != rows || reps[i].matrix.cols() != cols) {
      throw ShapeError("update: layer " + std::to_string(reps[i].layer_index) + " is not padded to the common width");
    }
    sums[static_cast<std::size_t>(l - 1)] += reps[i].matrix;
    ++counts[static_cast<std::size_t>(l - 1)];
  }
  for (int j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) throw InvariantError("update: cluster " + std::to_string(j + 1) + " is empty");
    sums[static_cast<std::size_t>(j)] /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
  }
  return sums;
}

inline double assignment_cost(const Matrix& distances, const std::vector<int>& labels) {
  double cost = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) cost += distances(static_cast<Eigen::Index>(i), labels[i] - 1);
  return cost;
}

inline void validate(const ClusterConfig& config, std::size_t layer_count) {
  validate(config.metric);
  if (config.k < 2) throw ArgumentError("k must be at least 2");
  if (static_cast<std::size_t>(config.k) > layer_count) {
    throw ArgumentError("k = " + std::to_string(config.k) + " exceeds the number of layers (" +
                        std::to_string(layer_count) + ")");
  }
  if (config.max_iterations < 1) throw ArgumentError("max_iterations must be positive");
}

inline ClusterAssignment kmeans(const std::vector<LayerRepresentation>& reps, const ClusterConfig& config) {
  validate(config, reps.size());
  const auto layers = prepare_all(reps, config.metric);

  ClusterAssignment out;
  out.config = config;
  for (const auto& r : reps) out.layer_indices.push_back(r.layer_index);

  Matrix dist = distance_grid(layers, prepare_centroids(seed(reps, config.k), config.metric));
  std::vector<int> labels = nearest_labels(dist);
  repair_empty_clusters(labels, dist, config.k);

  std::vector<Matrix> centroids;
  while (out.iterations_run < config.max_iterations) {
    centroids = update(reps, labels, config.k);
    ++out.iterations_run;
    dist = distance_grid(layers, prepare_centroids(centroids, config.metric));
    out.cost_history.push_back(assignment_cost(dist, labels));
    std::vector<int> next = nearest_labels(dist);
    repair_empty_clusters(next, dist, config.k);
    if (next == labels) {
      out.converged = true;
      break;
    }
    labels = std::move(next);
  }
  if (!out.converged) {
    // Labels moved on the last step; report the state they define.
    centroids = update(reps, labels, config.k);
    dist = distance_grid(layers, prepare_centroids(centroids, config.metric));
    out.cost_history.push_back(assignment_cost(dist, labels));
  }
  out.labels = std::move(labels);
  out.centroids = std::move(centroids);
  out.cost = out.cost_history.back();
  return out;
}

inline nlohmann::ordered_json assignment_to_json(const ClusterAssignment& a) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  cfg["k"] = a.config.k;
  cfg["metric"] = metric_to_json(a.config.metric);
  cfg["max_iterations"] = a.config.max_iterations;
  cfg["seed_rule"] = "evenly_spaced_by_index";
  j["config"] = cfg;
  j["layers"] = a.layer_indices;
  j["labels"] = a.labels;
  j["cost"] = a.cost;
  j["iterations"] = a.iterations_run;
  j["converged"] = a.converged;
  return j;
}

}  // namespace hintscout
