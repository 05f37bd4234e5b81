// Copyright 2026 The maploc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Coordinate-frame reconciliation: reference-frame scaling, similarity
// registration, pose recovery from pointmap pairs and multi-view global
// alignment.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "maploc/error.hpp"
#include "maploc/geometry.hpp"

namespace maploc {

struct AlignmentResult {
  SimilarityTransform transform;
  double residual_rms = 0.0;    // destination units
  double inlier_fraction = 0.0;
};

struct UmeyamaOptions {
  bool with_scale = true;
  /// Correspondences with residual below this count as inliers.
  double inlier_threshold = 0.05;
};

/// Median of `values` (mean of the two middle elements for even counts).
/// Reorders the input.
inline double median_inplace(std::vector<double>& values) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return lower + (upper - lower) / 2.0;
}

/// Weighted least-squares similarity (or rigid) transform T minimizing
/// sum_i w_i |T(src_i) - dst_i|^2, after Umeyama (1991).
inline AlignmentResult umeyama(std::span<const Vec3> src, std::span<const Vec3> dst,
                               std::span<const double> weights = {},
                               const UmeyamaOptions& opts = {}) {
  if (src.size() != dst.size())
    throw Error(Errc::LengthMismatch, "source and destination sizes differ");
  if (!weights.empty() && weights.size() != src.size())
    throw Error(Errc::LengthMismatch, "weight count differs from point count");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double total = 0.0;
  std::size_t support = 0;
  Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double wi = w(i);
    if (!(wi >= 0.0) || !std::isfinite(wi))
      throw Error(Errc::InvalidArgument, "weights must be finite and nonnegative");
    if (wi == 0.0) continue;
    total += wi;
    ++support;
    mu_src += wi * src[i];
    mu_dst += wi * dst[i];
  }
  if (support < 3 || !(total > 0.0))
    throw Error(Errc::DegenerateConfiguration,
                "need at least 3 correspondences with positive weight");
  mu_src /= total;
  mu_dst /= total;

  Mat3 cov = Mat3::Zero();
  Mat3 src_scatter = Mat3::Zero();
  double src_var = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double wi = w(i);
    if (wi == 0.0) continue;
    const Vec3 ds = src[i] - mu_src;
    const Vec3 dd = dst[i] - mu_dst;
    cov += wi * dd * ds.transpose();
    src_scatter += wi * ds * ds.transpose();
    src_var += wi * ds.squaredNorm();
  }
  cov /= total;
  src_scatter /= total;
  src_var /= total;

  // Collinear or coincident sources leave rotation about their line free.
  const Eigen::JacobiSVD<Mat3> scatter_svd(src_scatter);
  const Vec3 spread = scatter_svd.singularValues();
  if (!(spread(0) > 0.0) || spread(1) <= 1e-12 * spread(0))
    throw Error(Errc::DegenerateConfiguration, "source points are collinear or coincident");

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 s_diag(1.0, 1.0, 1.0);
  if (u.determinant() * v.determinant() < 0.0) s_diag(2) = -1.0;
  const Mat3 rotation = u * s_diag.asDiagonal() * v.transpose();

  double scale = 1.0;
  if (opts.with_scale) {
    scale = svd.singularValues().dot(s_diag) / src_var;
    if (!(scale > 0.0))
      throw Error(Errc::DegenerateConfiguration, "non-positive scale estimate");
  }

  AlignmentResult result;
  result.transform = {scale, {rotation, mu_dst - scale * (rotation * mu_src)}};

  double sq = 0.0;
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double wi = w(i);
    if (wi == 0.0) continue;
    const double r2 = (result.transform.apply(src[i]) - dst[i]).squaredNorm();
    sq += wi * r2;
    if (std::sqrt(r2) < opts.inlier_threshold) ++inliers;
  }
  result.residual_rms = std::sqrt(sq / total);
  result.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(support);
  return result;
}

inline constexpr std::size_t kMinScalePixels = 10;
inline constexpr double kMinPredictedDepth = 1e-9;

/// Scale s mapping a reference-view prediction onto metric ground truth:
/// median over valid pixels of gt_depth / predicted z.
inline double reference_scale(const Pointmap& pred, const DepthGrid& gt_depth) {
  pred.validate();
  if (!gt_depth.same_dims(pred.height, pred.width))
    throw Error(Errc::DimensionMismatch, "ground-truth depth does not match prediction");
  std::vector<double> ratios;
  ratios.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double gt = gt_depth.data[i];
    const double z = pred.points[i].z();
    if (gt > 0.0 && std::isfinite(gt) && z > kMinPredictedDepth && std::isfinite(z) &&
        pred.conf(i) > 0.0)
      ratios.push_back(gt / z);
  }
  if (ratios.size() < kMinScalePixels)
    throw Error(Errc::NoValidPixels, "only " + std::to_string(ratios.size()) +
                                         " valid pixels for scale estimation (need " +
                                         std::to_string(kMinScalePixels) + ")");
  return median_inplace(ratios);
}

/// Similarity that maps a reference-view prediction onto the ground-truth
/// camera-frame points of the same view (alternative to the median ratio).
inline AlignmentResult reference_similarity(const Pointmap& pred, const DepthGrid& gt_depth,
                                            const Intrinsics& k) {
  pred.validate();
  if (!gt_depth.same_dims(pred.height, pred.width))
    throw Error(Errc::DimensionMismatch, "ground-truth depth does not match prediction");
  const Pointmap gt = unproject(gt_depth, k);
  std::vector<Vec3> src, dst;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt.conf(i) <= 0.0 || pred.conf(i) <= 0.0 || !pred.points[i].allFinite()) continue;
    src.push_back(pred.points[i]);
    dst.push_back(gt.points[i]);
  }
  if (src.size() < kMinScalePixels)
    throw Error(Errc::NoValidPixels, "too few valid pixels for reference similarity");
  return umeyama(src, dst);
}

/// Maps a reference-camera prediction into world coordinates:
/// x -> R_ref (s x) + t_ref.
inline Pointmap align_to_world(Pointmap pred, double scale, const RigidTransform& ref_pose) {
  for (auto& p : pred.points) p = ref_pose.rotation * (scale * p) + ref_pose.translation;
  pred.frame = "world";
  return pred;
}

/// Rigid motion taking a view's own-frame pointmap onto its prediction in
/// the reference frame, weighted per pixel by the smaller of the two
/// confidences (and by `conf` when given).
inline AlignmentResult pose_from_pointmaps(const Pointmap& x_self, const Pointmap& x_in_ref,
                                           std::span<const double> conf = {}) {
  x_self.validate();
  x_in_ref.validate();
  if (x_self.height != x_in_ref.height || x_self.width != x_in_ref.width)
    throw Error(Errc::DimensionMismatch, "pointmaps differ in size");
  if (!conf.empty() && conf.size() != x_self.size())
    throw Error(Errc::DimensionMismatch, "confidence does not match pointmaps");
  std::vector<double> weights(x_self.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double w = std::min(x_self.conf(i), x_in_ref.conf(i));
    if (!conf.empty()) w = std::min(w, conf[i]);
    if (!x_self.points[i].allFinite() || !x_in_ref.points[i].allFinite()) w = 0.0;
    weights[i] = std::max(w, 0.0);
  }
  return umeyama(x_self.points, x_in_ref.points, weights, {.with_scale = false});
}

/// One pairwise prediction between views a and b: view b's pixels predicted
/// in camera a's frame, and the same pixels in b's own frame.
struct ViewEdge {
  std::string a;
  std::string b;
  Pointmap b_in_a;
  Pointmap b_in_b;
};

struct ViewGraph {
  std::vector<std::string> nodes;
  std::vector<ViewEdge> edges;
};

struct GlobalAlignOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;  // relative objective decrease
  /// Starting transforms; views without an entry are initialised by chaining
  /// pairwise registrations outward from the pinned view.
  std::map<std::string, SimilarityTransform> initial;
};

struct GlobalAlignResult {
  std::map<std::string, SimilarityTransform> transforms;  // view frame -> common frame
  std::string pinned_view;
  std::vector<double> objective_history;  // [0] is the initial objective
  int iterations = 0;
  bool converged = false;
  double final_objective = 0.0;
};

namespace detail {

inline double edge_weight(const ViewEdge& e, std::size_t i) {
  const double w = std::min(e.b_in_a.conf(i), e.b_in_b.conf(i));
  if (!(w > 0.0) || !e.b_in_a.points[i].allFinite() || !e.b_in_b.points[i].allFinite())
    return 0.0;
  return w;
}

inline double global_objective(const ViewGraph& g,
                               const std::map<std::string, SimilarityTransform>& t) {
  double total = 0.0;
  for (const auto& e : g.edges) {
    const auto& ta = t.at(e.a);
    const auto& tb = t.at(e.b);
    for (std::size_t i = 0; i < e.b_in_a.size(); ++i) {
      const double w = edge_weight(e, i);
      if (w == 0.0) continue;
      total += w * (ta.apply(e.b_in_a.points[i]) - tb.apply(e.b_in_b.points[i])).squaredNorm();
    }
  }
  return total;
}

}  // namespace detail

/// Per-view similarity transforms into a common frame minimizing
///   sum_edges sum_pixels conf * |T_a(b_in_a) - T_b(b_in_b)|^2.
/// The lexicographically smallest view is pinned to the identity. Each sweep
/// re-solves every other view in closed form with the rest held fixed, so
/// the objective never increases.
inline GlobalAlignResult global_align(const ViewGraph& g, const GlobalAlignOptions& opts = {}) {
  std::set<std::string> nodes(g.nodes.begin(), g.nodes.end());
  if (nodes.empty()) throw Error(Errc::InvalidArgument, "view graph has no nodes");
  if (nodes.size() != g.nodes.size())
    throw Error(Errc::InvalidArgument, "duplicate view ids in view graph");
  std::map<std::string, std::vector<std::size_t>> incident;
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    if (!nodes.count(e.a) || !nodes.count(e.b) || e.a == e.b)
      throw Error(Errc::InvalidArgument, "edge references unknown view or is a self-loop");
    e.b_in_a.validate();
    e.b_in_b.validate();
    if (e.b_in_a.size() != e.b_in_b.size())
      throw Error(Errc::DimensionMismatch, "edge pointmaps differ in size");
    incident[e.a].push_back(k);
    incident[e.b].push_back(k);
  }

  GlobalAlignResult result;
  result.pinned_view = *nodes.begin();
  auto& t = result.transforms;
  t[result.pinned_view] = SimilarityTransform::identity();
  for (const auto& [id, init] : opts.initial)
    if (nodes.count(id) && id != result.pinned_view) t[id] = init;

  // Breadth-first initialisation in sorted-id order; doubles as the
  // connectivity check.
  std::set<std::string> reached{result.pinned_view};
  std::queue<std::string> frontier;
  frontier.push(result.pinned_view);
  while (!frontier.empty()) {
    const std::string cur = frontier.front();
    frontier.pop();
    for (std::size_t k : incident[cur]) {
      const auto& e = g.edges[k];
      const std::string& other = e.a == cur ? e.b : e.a;
      if (reached.count(other)) continue;
      if (!t.count(other)) {
        std::vector<double> w(e.b_in_a.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = detail::edge_weight(e, i);
        if (e.a == cur) {
          // T_b = T_a o (b_in_b -> b_in_a)
          const auto rel = umeyama(e.b_in_b.points, e.b_in_a.points, w);
          t[other] = compose(t.at(cur), rel.transform);
        } else {
          // T_a = (b_in_a -> T_b(b_in_b))
          std::vector<Vec3> dst(e.b_in_b.size());
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = t.at(cur).apply(e.b_in_b.points[i]);
          t[other] = umeyama(e.b_in_a.points, dst, w).transform;
        }
      }
      reached.insert(other);
      frontier.push(other);
    }
  }
  if (reached.size() != nodes.size()) {
    std::vector<std::string> isolated;
    for (const auto& n : nodes)
      if (!reached.count(n)) isolated.push_back(n);
    throw Error(Errc::DisconnectedGraph,
                std::to_string(isolated.size()) + " view(s) unreachable from " +
                    result.pinned_view,
                isolated);
  }

  double objective = detail::global_objective(g, t);
  result.objective_history.push_back(objective);
  for (int it = 0; it < opts.max_iterations; ++it) {
    double current = objective;
    for (const auto& view : nodes) {
      if (view == result.pinned_view) continue;
      std::vector<Vec3> src, dst;
      std::vector<double> w;
      for (std::size_t k : incident[view]) {
        const auto& e = g.edges[k];
        for (std::size_t i = 0; i < e.b_in_a.size(); ++i) {
          const double wi = detail::edge_weight(e, i);
          if (wi == 0.0) continue;
          if (e.a == view) {
            src.push_back(e.b_in_a.points[i]);
            dst.push_back(t.at(e.b).apply(e.b_in_b.points[i]));
          } else {
            src.push_back(e.b_in_b.points[i]);
            dst.push_back(t.at(e.a).apply(e.b_in_a.points[i]));
          }
          w.push_back(wi);
        }
      }
      const auto candidate = umeyama(src, dst, w).transform;
      // Keep the current transform if round-off makes the closed-form
      // solution marginally worse.
      auto trial = t;
      trial[view] = candidate;
      const double trial_objective = detail::global_objective(g, trial);
      if (trial_objective <= current) {
        t = std::move(trial);
        current = trial_objective;
      }
    }
    const double next = current;
    result.objective_history.push_back(next);
    result.iterations = it + 1;
    const double decrease = objective - next;
    objective = next;
    if (objective <= std::numeric_limits<double>::min() ||
        decrease <= opts.tolerance * std::max(objective + decrease, 0.0)) {
      result.converged = true;
      break;
    }
  }
  result.final_objective = objective;
  return result;
}

}  // namespace maploc
