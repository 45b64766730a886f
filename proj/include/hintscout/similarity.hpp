#pragma once

// Representation similarity: HSIC, centered kernel alignment (linear and
// Gaussian kernels) and mean squared canonical correlation.
//
// Every metric maps a pair of N-row matrices to [0, 1], with 1 meaning the
// two layers carry the same information up to the metric's invariances.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hintscout/errors.hpp"
#include "hintscout/layer_repr.hpp"
#include "hintscout/parallel.hpp"

namespace hintscout {

enum class MetricKind { cka_linear, cka_rbf, r2_cca };

struct MetricSpec {
  MetricKind kind = MetricKind::cka_linear;
  double rbf_bandwidth_fraction = 0.5;

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

inline constexpr double kCkaDegeneracyTolerance = 1e-12;
inline constexpr double kRankTolerance = 1e-10;

inline std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::cka_linear: return "cka_linear";
    case MetricKind::cka_rbf: return "cka_rbf";
    case MetricKind::r2_cca: return "r2_cca";
  }
  return "unknown";
}

inline MetricKind parse_metric_name(std::string_view name) {
  if (name == "cka_linear") return MetricKind::cka_linear;
  if (name == "cka_rbf") return MetricKind::cka_rbf;
  if (name == "r2_cca") return MetricKind::r2_cca;
  throw FormatError("unknown metric kind '" + std::string(name) + "'");
}

inline void validate(const MetricSpec& spec) {
  if (!(spec.rbf_bandwidth_fraction > 0.0) || !std::isfinite(spec.rbf_bandwidth_fraction)) {
    throw ArgumentError("rbf bandwidth fraction must be positive and finite");
  }
}

inline nlohmann::ordered_json metric_to_json(const MetricSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(metric_name(spec.kind));
  if (spec.kind == MetricKind::cka_rbf) j["rbf_fraction"] = spec.rbf_bandwidth_fraction;
  return j;
}

inline MetricSpec metric_from_json(const nlohmann::json& j) {
  MetricSpec spec;
  try {
    spec.kind = parse_metric_name(j.at("kind").get<std::string>());
    if (j.contains("rbf_fraction")) spec.rbf_bandwidth_fraction = j.at("rbf_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad metric object: ") + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Kernel-level primitives

/// H K H for the centering matrix H = I - 11^T/n, without forming H.
inline Matrix double_center(const Matrix& k) {
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = k.mean();
  Matrix out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += grand;
  return out;
}

/// Empirical HSIC estimator tr(K H L H) / (n-1)^2.
inline double hsic(const Matrix& k, const Matrix& l) {
  if (k.rows() != k.cols() || l.rows() != l.cols()) throw ShapeError("hsic: kernel matrices must be square");
  if (k.rows() != l.rows()) throw ShapeError("hsic: kernel matrices differ in size");
  const auto n = k.rows();
  if (n < 2) throw ShapeError("hsic: at least two samples are required");
  // tr(HKH L) = sum_ij (HKH)_ij L_ji
  const double tr = (double_center(k).array() * l.transpose().array()).sum();
  const double d = static_cast<double>(n - 1);
  return tr / (d * d);
}

inline Matrix center_columns(const Matrix& x) {
  return x.rowwise() - x.colwise().mean();
}

inline Matrix squared_distances(const Matrix& x) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Matrix d = -2.0 * (x * x.transpose());
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

/// Median of the pairwise Euclidean row distances (pairs i < j).  Even
/// counts average the two middle values.
inline double median_pairwise_distance(const Matrix& sq_dist) {
  const auto n = sq_dist.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) d.push_back(std::sqrt(sq_dist(i, j)));
  if (d.empty()) return 0.0;
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double upper = d[mid];
  if (d.size() % 2 == 1) return upper;
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Gaussian kernel exp(-|xi - xj|^2 / (2 sigma^2)) with sigma = fraction *
/// median pairwise distance.
inline Matrix rbf_kernel(const Matrix& x, double bandwidth_fraction) {
  const Matrix sq = squared_distances(x);
  const double sigma = bandwidth_fraction * median_pairwise_distance(sq);
  if (!(sigma > 0.0)) throw DegenerateError("rbf kernel: median pairwise distance is zero");
  return (-sq.array() / (2.0 * sigma * sigma)).exp().matrix();
}

// ---------------------------------------------------------------------------
// Prepared operands
//
// Pairwise grids reuse per-layer work (centered features, CCA bases, RBF
// bandwidths), so each matrix is prepared once and then compared many times.

struct PreparedOperand {
  MetricKind kind = MetricKind::cka_linear;
  Matrix centered;                      // column-centered input
  Matrix basis;                         // r2_cca: orthonormal basis of the centered column space
  double self_hsic = 0.0;               // cka: HSIC(K, K)
  double sigma = 0.0;                   // cka_rbf: kernel bandwidth
  std::optional<Eigen::Index> channels; // r2_cca: original width; empty for centroids
};

inline Matrix orthonormal_basis(const Matrix& centered) {
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) throw DegenerateError("r2_cca: input has rank 0 after centering");
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > kRankTolerance * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

inline Matrix centered_rbf_kernel(const PreparedOperand& op) {
  const Matrix sq = squared_distances(op.centered);
  return double_center((-sq.array() / (2.0 * op.sigma * op.sigma)).exp().matrix());
}

inline PreparedOperand prepare(const Matrix& x, const MetricSpec& spec,
                               std::optional<Eigen::Index> channels = std::nullopt) {
  validate(spec);
  PreparedOperand op;
  op.kind = spec.kind;
  op.centered = center_columns(x);
  op.channels = channels;
  const double d = static_cast<double>(x.rows() - 1);
  switch (spec.kind) {
    case MetricKind::cka_linear: {
      if (x.rows() < 3) throw ShapeError("cka: at least three samples are required");
      op.self_hsic = (op.centered.transpose() * op.centered).squaredNorm() / (d * d);
      if (op.self_hsic <= kCkaDegeneracyTolerance) throw DegenerateError("cka: HSIC(K,K) vanishes");
      break;
    }
    case MetricKind::cka_rbf: {
      if (x.rows() < 3) throw ShapeError("cka: at least three samples are required");
      const Matrix sq = squared_distances(op.centered);
      op.sigma = spec.rbf_bandwidth_fraction * median_pairwise_distance(sq);
      if (!(op.sigma > 0.0)) throw DegenerateError("cka: median pairwise distance is zero");
      const Matrix kc = centered_rbf_kernel(op);
      op.self_hsic = kc.squaredNorm() / (d * d);
      if (op.self_hsic <= kCkaDegeneracyTolerance) throw DegenerateError("cka: HSIC(K,K) vanishes");
      break;
    }
    case MetricKind::r2_cca: {
      if (x.rows() < 2) throw ShapeError("r2_cca: at least two samples are required");
      op.basis = orthonormal_basis(op.centered);
      break;
    }
  }
  return op;
}

inline PreparedOperand prepare(const LayerRepresentation& rep, const MetricSpec& spec) {
  return prepare(rep.matrix, spec, rep.original_channels);
}

inline double compare(const PreparedOperand& a, const PreparedOperand& b) {
  if (a.kind != b.kind) throw ArgumentError("compare: operands prepared for different metrics");
  if (a.centered.rows() != b.centered.rows()) throw ShapeError("similarity: sample counts differ");
  const double d = static_cast<double>(a.centered.rows() - 1);
  switch (a.kind) {
    case MetricKind::cka_linear: {
      const double cross = (b.centered.transpose() * a.centered).squaredNorm() / (d * d);
      return cross / std::sqrt(a.self_hsic * b.self_hsic);
    }
    case MetricKind::cka_rbf: {
      const Matrix kc = centered_rbf_kernel(a);
      const Matrix sq = squared_distances(b.centered);
      const Matrix l = (-sq.array() / (2.0 * b.sigma * b.sigma)).exp().matrix();
      const double cross = (kc.array() * l.array()).sum() / (d * d);
      return cross / std::sqrt(a.self_hsic * b.self_hsic);
    }
    case MetricKind::r2_cca: {
      Eigen::Index p1 = 0;
      if (a.channels && b.channels) {
        p1 = std::min(*a.channels, *b.channels);
      } else if (a.channels) {
        p1 = *a.channels;
      } else if (b.channels) {
        p1 = *b.channels;
      } else {
        p1 = std::min(a.basis.cols(), b.basis.cols());
      }
      return (b.basis.transpose() * a.basis).squaredNorm() / static_cast<double>(p1);
    }
  }
  return 0.0;
}

/// CKA between two N-row matrices under a linear or Gaussian kernel.
inline double cka(const Matrix& x, const Matrix& y, const MetricSpec& spec) {
  if (spec.kind == MetricKind::r2_cca) throw ArgumentError("cka called with r2_cca metric");
  if (x.rows() != y.rows()) throw ShapeError("cka: sample counts differ");
  return compare(prepare(x, spec), prepare(y, spec));
}

/// Mean squared CCA, ||Q_y^T Q_x||_F^2 / p1.  `p1` defaults to the smaller
/// column count; callers working on padded matrices pass the original widths.
inline double r2_cca(const Matrix& x, const Matrix& y, std::optional<Eigen::Index> p1 = std::nullopt) {
  if (x.rows() != y.rows()) throw ShapeError("r2_cca: sample counts differ");
  const MetricSpec spec{MetricKind::r2_cca, 0.5};
  const auto a = prepare(x, spec, x.cols());
  const auto b = prepare(y, spec, y.cols());
  const double num = (b.basis.transpose() * a.basis).squaredNorm();
  return num / static_cast<double>(p1.value_or(std::min(x.cols(), y.cols())));
}

inline double r2_cca(const LayerRepresentation& x, const LayerRepresentation& y) {
  return r2_cca(x.matrix, y.matrix, std::min(x.original_channels, y.original_channels));
}

// ---------------------------------------------------------------------------
// Pairwise grid

struct SimilarityMatrix {
  Matrix values;
  MetricSpec metric;
  std::vector<int> layer_indices;
};

/// Prepares every representation, naming the layer on degeneracy.
inline std::vector<PreparedOperand> prepare_all(const std::vector<LayerRepresentation>& reps,
                                                const MetricSpec& spec) {
  std::vector<PreparedOperand> ops(reps.size());
  parallel_for(reps.size(), [&](std::size_t i) {
    try {
      ops[i] = prepare(reps[i], spec);
    } catch (const DegenerateError& e) {
      throw DegenerateError("layer " + std::to_string(reps[i].layer_index) + ": " + e.what());
    }
  });
  return ops;
}

inline SimilarityMatrix similarity_matrix(const std::vector<LayerRepresentation>& reps, const MetricSpec& spec) {
  validate(spec);
  if (reps.size() < 2) throw ArgumentError("similarity matrix needs at least two layers");
  const auto n = reps.front().samples();
  for (const auto& r : reps) {
    if (r.samples() != n) throw ShapeError("layer " + std::to_string(r.layer_index) + ": sample count differs");
  }
  const auto ops = prepare_all(reps, spec);
  const auto count = static_cast<Eigen::Index>(reps.size());

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < count; ++i)
    for (Eigen::Index j = i + 1; j < count; ++j) pairs.emplace_back(i, j);
  std::vector<double> upper(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    upper[p] = compare(ops[static_cast<std::size_t>(pairs[p].first)], ops[static_cast<std::size_t>(pairs[p].second)]);
  });

  SimilarityMatrix out;
  out.metric = spec;
  out.values = Matrix::Identity(count, count);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out.values(pairs[p].first, pairs[p].second) = upper[p];
    out.values(pairs[p].second, pairs[p].first) = upper[p];
  }
  for (const auto& r : reps) out.layer_indices.push_back(r.layer_index);
  return out;
}

inline nlohmann::ordered_json similarity_to_json(const SimilarityMatrix& s) {
  nlohmann::ordered_json j;
  j["metric"] = metric_to_json(s.metric);
  j["layers"] = s.layer_indices;
  j["values"] = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(s.values.cols()));
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) row[static_cast<std::size_t>(c)] = s.values(r, c);
    j["values"].push_back(row);
  }
  return j;
}

}  // namespace hintscout
