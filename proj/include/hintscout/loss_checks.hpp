#pragma once

// Built-in self-test for the loss kernels, run by `hintscout check-losses`.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hintscout/distill.hpp"

namespace hintscout {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using SoftenFn = std::function<std::vector<double>(std::span<const double>, double)>;

namespace detail {

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline TensorBlob make_feature(std::vector<std::uint64_t> shape, std::vector<float> data) {
  return TensorBlob{std::move(shape), std::move(data)};
}

inline TensorBlob scaled(const TensorBlob& t, float s) {
  TensorBlob out = t;
  for (auto& v : out.data) v *= s;
  return out;
}

}  // namespace detail

/// Evaluates the closed-form loss-kernel examples.  `soften_impl` replaces
/// the softening routine under test; production callers use the default.
inline std::vector<CheckResult> run_loss_checks(const SoftenFn& soften_impl = [](std::span<const double> z, double t) {
  return soften(z, t);
}) {
  std::vector<CheckResult> results;
  auto check = [&](std::string name, auto&& body) {
    CheckResult r{std::move(name), false, {}};
    try {
      r.passed = body(r.detail);
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    results.push_back(std::move(r));
  };

  const std::vector<std::vector<double>> logit_samples = {
      {0.0, 0.0}, {2.0, 0.0}, {1000.0, 0.0}, {-3.5, 7.25, 0.5, 1.0}, {-800.0, 800.0, 0.0}, {1e-3, -1e-3, 5.0}};

  check("soften sums to 1", [&](std::string& detail) {
    for (const double t : {1.0, 2.0, 4.0, 20.0}) {
      for (const auto& z : logit_samples) {
        const auto p = soften_impl(z, t);
        double sum = 0.0;
        for (const double v : p) {
          if (!(v >= 0.0)) return detail = "negative probability", false;
          sum += v;
        }
        if (!detail::near(sum, 1.0, 1e-9)) return detail = "sum " + std::to_string(sum), false;
      }
    }
    return true;
  });
  check("soften of equal logits is uniform", [&](std::string&) {
    const std::vector<double> z{0.0, 0.0};
    for (const double t : {1.0, 3.0, 10.0}) {
      const auto p = soften_impl(z, t);
      if (!detail::near(p[0], 0.5, 1e-12) || !detail::near(p[1], 0.5, 1e-12)) return false;
    }
    return true;
  });
  check("soften survives large logits", [&](std::string&) {
    const std::vector<double> z{1000.0, 0.0};
    const auto p = soften_impl(z, 1.0);
    return std::isfinite(p[0]) && std::isfinite(p[1]) && detail::near(p[0], 1.0, 1e-12) && p[1] < 1e-300;
  });
  check("logit loss of identical logits is zero", [&](std::string&) {
    const std::vector<double> z{1.0, -2.0, 0.5};
    return logit_loss(z, z, 4.0) == 0.0;
  });
  check("logit loss is shift invariant", [&](std::string&) {
    const std::vector<double> zs{0.3, -1.2, 2.0}, zt{1.0, 0.0, -0.5};
    std::vector<double> zs_shift = zs, zt_shift = zt;
    for (auto& v : zs_shift) v += 17.0;
    for (auto& v : zt_shift) v -= 4.0;
    return detail::near(logit_loss(zs, zt, 3.0), logit_loss(zs_shift, zt_shift, 3.0), 1e-12);
  });
  check("logit loss is non-negative", [&](std::string&) {
    const std::vector<double> zs{0.0, 0.0}, zt{2.0, 0.0};
    return logit_loss(zs, zt, 1.0) > 0.0 && logit_loss(zt, zs, 2.0) > 0.0;
  });
  check("classification loss of a confident correct logit is ~0", [&](std::string&) {
    const std::vector<double> z{100.0, 0.0, 0.0};
    return classification_loss(z, 0) < 1e-30;
  });
  check("classification loss is positive", [&](std::string&) {
    const std::vector<double> z{30.0, 0.0};
    return classification_loss(z, 0) > 0.0 && classification_loss(z, 1) > 0.0;
  });
  check("attention map of a single channel", [&](std::string&) {
    const auto a = attention_map(detail::make_feature({1, 1, 2, 2}, {1, 0, 0, 1}), 1.0);
    const double r = 1.0 / std::numbers::sqrt2;
    return detail::near(a(0, 0), r, 1e-12) && a(0, 1) == 0.0 && a(0, 2) == 0.0 && detail::near(a(0, 3), r, 1e-12);
  });
  check("attention map of a constant feature is uniform", [&](std::string&) {
    const auto a = attention_map(detail::make_feature({1, 2, 2, 3}, std::vector<float>(12, 2.5f)), 1.0);
    const double u = 1.0 / std::sqrt(6.0);
    for (Eigen::Index s = 0; s < a.cols(); ++s)
      if (!detail::near(a(0, s), u, 1e-12)) return false;
    return true;
  });
  const auto feat = detail::make_feature({2, 2, 2, 2}, {1, -2, 3, 0.5f, 0, 1, 1, 2, -1, 4, 2, 0, 3, 3, -1, 1});
  const auto other = detail::make_feature({2, 2, 2, 2}, {0, 1, 2, 3, 1, 1, 0, 2, 2, 0, 1, 1, -3, 2, 1, 1});
  check("hint loss of identical features is zero", [&](std::string&) {
    const std::vector<HintPair> pairs{{feat, feat, HintTransform::attention_map_p1},
                                      {feat, feat, HintTransform::identity_mse}};
    return hint_loss(pairs) == 0.0;
  });
  check("attention hint loss ignores positive scaling", [&](std::string&) {
    const std::vector<HintPair> pairs{{feat, detail::scaled(feat, 3.0f), HintTransform::attention_map_p1}};
    return detail::near(hint_loss(pairs), 0.0, 1e-7);
  });
  check("hint loss is additive over pairs", [&](std::string&) {
    const HintPair a{feat, other, HintTransform::attention_map_p1};
    const HintPair b{feat, other, HintTransform::identity_mse};
    const std::vector<HintPair> both{a, b};
    return detail::near(hint_loss(both), hint_loss(std::span(&a, 1)) + hint_loss(std::span(&b, 1)), 1e-9);
  });
  const std::vector<double> zs{0.5, -1.0, 2.0}, zt{1.5, 0.0, -0.5};
  const std::vector<HintPair> pairs{{feat, other, HintTransform::attention_map_p1}};
  check("total loss with gamma only is the classification loss", [&](std::string&) {
    LossWeights w;
    w.gamma = 1.0;
    w.alpha = w.beta = 0.0;
    return total_loss(zs, zt, 2, pairs, w) == classification_loss(zs, 2);
  });
  check("total loss with matching student and teacher", [&](std::string&) {
    LossWeights w;
    w.gamma = w.alpha = w.beta = 0.5;
    const std::vector<HintPair> same{{feat, feat, HintTransform::attention_map_p1}};
    return detail::near(total_loss(zs, zs, 1, same, w), 0.5 * classification_loss(zs, 1), 1e-12);
  });
  check("total loss is linear in beta", [&](std::string&) {
    LossWeights w;
    w.gamma = 0.7;
    w.alpha = 0.2;
    w.beta = 1.0;
    const double base = total_loss(zs, zt, 0, pairs, w);
    w.beta = 2.0;
    const double doubled = total_loss(zs, zt, 0, pairs, w);
    return detail::near(doubled - base, hint_loss(pairs), 1e-9);
  });
  check("compression report of identical models", [&](std::string&) {
    const auto r = compression_report(1.0e6, 1.0e6, 5.0, 5.0);
    return format_percent(r.compression_ratio_percent) == "0.0" && format_speed_up(r.speed_up) == "1.00";
  });
  return results;
}

}  // namespace hintscout
