#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hintscout/errors.hpp"
#include "hintscout/tensor_blob.hpp"

namespace hintscout {

using Matrix = Eigen::MatrixXd;

/// Default sample budget when a dump holds more rows than needed.
inline constexpr std::size_t kDefaultSampleBudget = 10000;

/// N x C_pad matrix for one candidate layer.  Columns at or beyond
/// `original_channels` are zero padding.
struct LayerRepresentation {
  int layer_index = 0;
  Matrix matrix;
  Eigen::Index original_channels = 0;
  bool normalized = false;

  Eigen::Index samples() const noexcept { return matrix.rows(); }
};

/// Spatially averages an N x C x H x W blob down to N x C.  Rank-2 blobs are
/// copied through unchanged.
inline Matrix represent(const TensorBlob& blob) {
  check_blob_shape(blob);
  const auto n = static_cast<Eigen::Index>(blob.shape[0]);
  const auto c = static_cast<Eigen::Index>(blob.shape[1]);
  Matrix out(n, c);
  if (blob.rank() == 2) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < c; ++j) out(i, j) = blob.data[static_cast<std::size_t>(i * c + j)];
    return out;
  }
  const auto spatial = static_cast<std::size_t>(blob.shape[2] * blob.shape[3]);
  const float* p = blob.data.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      double sum = 0.0;
      for (std::size_t s = 0; s < spatial; ++s) sum += p[s];
      out(i, j) = sum / static_cast<double>(spatial);
      p += spatial;
    }
  }
  return out;
}

/// Column z-score with the N-1 standard deviation.  Constant columns become
/// zero columns.
inline Matrix normalize(const Matrix& m) {
  if (m.rows() < 2) throw ShapeError("normalize needs at least two samples");
  Matrix out(m.rows(), m.cols());
  const double denom = static_cast<double>(m.rows() - 1);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const auto col = m.col(j);
    if ((col.array() == col(0)).all()) {
      out.col(j).setZero();
      continue;
    }
    const double mean = col.mean();
    const Eigen::VectorXd centered = col.array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / denom);
    if (sd == 0.0 || !std::isfinite(sd)) {
      out.col(j).setZero();
    } else {
      out.col(j) = centered / sd;
    }
  }
  return out;
}

/// Keeps the first `budget` rows when the dump is larger; smaller dumps are
/// used whole.
inline Matrix take_samples(const Matrix& m, std::size_t budget) {
  if (budget == 0 || static_cast<std::size_t>(m.rows()) <= budget) return m;
  return m.topRows(static_cast<Eigen::Index>(budget));
}

inline LayerRepresentation make_representation(int layer_index, const TensorBlob& blob, bool normalize_columns,
                                               std::size_t sample_budget = kDefaultSampleBudget) {
  LayerRepresentation rep;
  rep.layer_index = layer_index;
  rep.matrix = take_samples(represent(blob), sample_budget);
  if (rep.matrix.rows() < 2) {
    throw ShapeError("layer " + std::to_string(layer_index) + ": at least two samples are required");
  }
  if (normalize_columns) rep.matrix = normalize(rep.matrix);
  rep.normalized = normalize_columns;
  rep.original_channels = rep.matrix.cols();
  return rep;
}

/// Zero-pads every representation to the widest channel count so centroid
/// means are well defined.
inline std::vector<LayerRepresentation> pad_channels(std::vector<LayerRepresentation> reps) {
  if (reps.empty()) return reps;
  const auto n = reps.front().samples();
  Eigen::Index width = 0;
  for (const auto& r : reps) {
    if (r.samples() != n) {
      throw ShapeError("sample count mismatch: layer " + std::to_string(reps.front().layer_index) + " has " +
                       std::to_string(n) + " rows, layer " + std::to_string(r.layer_index) + " has " +
                       std::to_string(r.samples()));
    }
    width = std::max(width, r.matrix.cols());
  }
  for (auto& r : reps) {
    if (r.matrix.cols() == width) continue;
    Matrix padded = Matrix::Zero(n, width);
    padded.leftCols(r.matrix.cols()) = r.matrix;
    r.matrix = std::move(padded);
  }
  return reps;
}

}  // namespace hintscout
