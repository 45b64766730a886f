#pragma once

// Reference evaluations of the distillation objectives a selected hint set
// feeds into.  No gradients here; a training harness re-implements these with
// autodiff and checks itself against them.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hintscout/errors.hpp"
#include "hintscout/layer_repr.hpp"
#include "hintscout/tensor_blob.hpp"

namespace hintscout {

struct LossWeights {
  double gamma = 1.0;        // classification
  double alpha = 0.0;        // logit distillation
  double beta = 0.0;         // hint distillation
  double lambda = 0.5;       // two-term KD trade-off
  double temperature = 4.0;
  bool scale_kl_by_t2 = true;
};

inline void validate(const LossWeights& w) {
  if (w.gamma < 0.0 || w.alpha < 0.0 || w.beta < 0.0) throw ArgumentError("loss weights must be non-negative");
  if (!(w.gamma > 0.0 || w.alpha > 0.0 || w.beta > 0.0)) throw ArgumentError("at least one loss weight must be positive");
  if (w.lambda < 0.0 || w.lambda > 1.0) throw ArgumentError("lambda must lie in [0, 1]");
  if (!(w.temperature >= 1.0)) throw ArgumentError("temperature must be at least 1");
}

enum class HintTransform { attention_map_p1, identity_mse };

struct HintPair {
  TensorBlob teacher_feature;
  TensorBlob student_feature;
  HintTransform transform = HintTransform::attention_map_p1;
};

namespace detail {

inline void check_temperature(double t) {
  if (!(t >= 1.0) || !std::isfinite(t)) throw ArgumentError("temperature must be finite and at least 1");
}

/// log softmax(z / T), max-subtracted.
inline std::vector<double> log_soften(std::span<const double> z, double t) {
  if (z.empty()) throw ArgumentError("logit vector is empty");
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = (z[i] - zmax) / t;
    sum += std::exp(out[i]);
  }
  const double lse = std::log(sum);
  for (auto& v : out) v -= lse;
  return out;
}

}  // namespace detail

/// Temperature-softened class probabilities exp(z_i/T) / sum_j exp(z_j/T).
inline std::vector<double> soften(std::span<const double> z, double t) {
  detail::check_temperature(t);
  auto p = detail::log_soften(z, t);
  for (auto& v : p) v = std::exp(v);
  return p;
}

/// KL(soften(zT) || soften(zS)), scaled by T^2 unless disabled.
inline double logit_loss(std::span<const double> z_student, std::span<const double> z_teacher, double t,
                         bool scale_by_t2 = true) {
  detail::check_temperature(t);
  if (z_student.size() != z_teacher.size()) throw ShapeError("logit_loss: logit vectors differ in length");
  const auto log_ps = detail::log_soften(z_student, t);
  const auto log_pt = detail::log_soften(z_teacher, t);
  double kl = 0.0;
  for (std::size_t i = 0; i < log_pt.size(); ++i) {
    const double pt = std::exp(log_pt[i]);
    if (pt > 0.0) kl += pt * (log_pt[i] - log_ps[i]);
  }
  kl = std::max(kl, 0.0);
  return scale_by_t2 ? kl * t * t : kl;
}

/// Cross-entropy of softmax(zS) against a one-hot label.
inline double classification_loss(std::span<const double> z_student, std::size_t label) {
  if (label >= z_student.size()) throw ArgumentError("label " + std::to_string(label) + " out of range");
  return -detail::log_soften(z_student, 1.0)[label];
}

/// Two-term KD objective: lambda * logit + (1 - lambda) * classification.
inline double kd_loss(std::span<const double> z_student, std::span<const double> z_teacher, std::size_t label,
                      double lambda, double t, bool scale_by_t2 = true) {
  if (lambda < 0.0 || lambda > 1.0) throw ArgumentError("lambda must lie in [0, 1]");
  return lambda * logit_loss(z_student, z_teacher, t, scale_by_t2) + (1.0 - lambda) * classification_loss(z_student, label);
}

/// Per-sample spatial attention: sum over channels of |A_c|^p, flattened to
/// H*W and scaled to unit Euclidean norm.  Returns an N x (H*W) matrix.
inline Matrix attention_map(const TensorBlob& feature, double p = 1.0) {
  check_blob_shape(feature);
  if (feature.rank() != 4) throw ShapeError("attention_map expects an N x C x H x W tensor");
  if (!(p > 0.0)) throw ArgumentError("attention exponent p must be positive");
  const auto n = static_cast<Eigen::Index>(feature.shape[0]);
  const auto c = static_cast<std::size_t>(feature.shape[1]);
  const auto hw = static_cast<Eigen::Index>(feature.shape[2] * feature.shape[3]);
  Matrix out = Matrix::Zero(n, hw);
  const float* src = feature.data.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (Eigen::Index s = 0; s < hw; ++s) {
        const double a = std::abs(static_cast<double>(*src++));
        out(i, s) += p == 1.0 ? a : std::pow(a, p);
      }
    }
    const double norm = out.row(i).norm();
    if (!(norm > 0.0)) throw DegenerateError("attention_map: sample " + std::to_string(i) + " has an all-zero map");
    out.row(i) /= norm;
  }
  return out;
}

/// Loss of one teacher/student pair under its transform.
inline double pair_loss(const HintPair& pair) {
  const auto& t = pair.teacher_feature;
  const auto& s = pair.student_feature;
  check_blob_shape(t);
  check_blob_shape(s);
  if (t.shape[0] != s.shape[0]) throw ShapeError("hint pair: teacher and student sample counts differ");
  switch (pair.transform) {
    case HintTransform::attention_map_p1: {
      const Matrix at = attention_map(t, 1.0);
      const Matrix as = attention_map(s, 1.0);
      if (at.cols() != as.cols()) throw ShapeError("hint pair: attention maps differ in spatial size");
      double sum = 0.0;
      for (Eigen::Index i = 0; i < at.rows(); ++i) sum += (as.row(i) - at.row(i)).norm();
      return sum / static_cast<double>(at.rows());
    }
    case HintTransform::identity_mse: {
      if (t.shape != s.shape) throw ShapeError("hint pair: identity_mse needs equal shapes");
      double sum = 0.0;
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const double d = static_cast<double>(s.data[i]) - static_cast<double>(t.data[i]);
        sum += d * d;
      }
      return sum / static_cast<double>(t.data.size());
    }
  }
  return 0.0;
}

/// Sum of per-pair losses.  Errors carry the index of the offending pair.
inline double hint_loss(std::span<const HintPair> pairs) {
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      total += pair_loss(pairs[i]);
    } catch (const DegenerateError& e) {
      throw DegenerateError("hint pair " + std::to_string(i) + ": " + e.what());
    } catch (const ShapeError& e) {
      throw ShapeError("hint pair " + std::to_string(i) + ": " + e.what());
    }
  }
  return total;
}

/// gamma * L_cls + alpha * L_logit + beta * L_hint.
inline double total_loss(std::span<const double> z_student, std::span<const double> z_teacher, std::size_t label,
                         std::span<const HintPair> pairs, const LossWeights& w) {
  validate(w);
  double total = 0.0;
  if (w.gamma != 0.0) total += w.gamma * classification_loss(z_student, label);
  if (w.alpha != 0.0) total += w.alpha * logit_loss(z_student, z_teacher, w.temperature, w.scale_kl_by_t2);
  if (w.beta != 0.0) total += w.beta * hint_loss(pairs);
  return total;
}

struct CompressionReport {
  double compression_ratio_percent = 0.0;
  double speed_up = 0.0;
};

inline CompressionReport compression_report(double teacher_params, double student_params, double teacher_ms,
                                            double student_ms) {
  for (const double v : {teacher_params, student_params, teacher_ms, student_ms}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("compression_report inputs must be positive");
  }
  return {100.0 * (1.0 - student_params / teacher_params), teacher_ms / student_ms};
}

/// Report rendering: percent with one decimal ("84.0"), speed-up with
/// two ("4.22").
inline std::string format_percent(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

inline std::string format_speed_up(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace hintscout
