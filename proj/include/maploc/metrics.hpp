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

// Evaluation formulas: Map-and-Locate semantic and completeness scores,
// monocular depth, relative pose accuracy and zero-shot segmentation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "maploc/alignment.hpp"
#include "maploc/error.hpp"
#include "maploc/geometry.hpp"
#include "maploc/nnindex.hpp"
#include "maploc/tensor.hpp"

namespace maploc {

// ---------------------------------------------------------------------------
// Map and Locate

enum class CompletenessDirection { PredToGt, GtToPred };

struct SemanticOptions {
  double tau = 0.10;  // meters
  CompletenessDirection direction = CompletenessDirection::PredToGt;
  unsigned threads = 1;
};

struct ClassCompleteness {
  std::size_t queries = 0;  // points whose nearest-neighbor distance was measured
  double fraction_within_tau = 0.0;
  double mean_distance = 0.0;
  double median_distance = 0.0;
  bool shared = false;  // class present in both clouds
};

struct MapLocateScores {
  double miou = 0.0;
  double acc = 0.0;
  double mcomp = 0.0;
  double mdcomp = 0.0;
  std::map<Label, double> per_class_iou;
  std::map<Label, ClassCompleteness> per_class_completeness;
  double raw_mean_nn_distance = 0.0;
  double raw_median_nn_distance = 0.0;
  bool no_shared_classes = false;
  std::size_t gt_points = 0;
  std::size_t pred_points = 0;  // non-void predictions used for transfer
};

namespace detail {

inline LabeledCloud drop_void(const LabeledCloud& cloud) {
  LabeledCloud out;
  out.points.reserve(cloud.size());
  out.labels.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] == kVoidLabel) continue;
    out.points.push_back(cloud.points[i]);
    out.labels.push_back(cloud.labels[i]);
  }
  return out;
}

inline std::vector<Vec3> points_with_label(const LabeledCloud& cloud, Label label) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.labels[i] == label) out.push_back(cloud.points[i]);
  return out;
}

}  // namespace detail

/// Scores an aligned, labeled prediction against ground truth.
///
/// Label transfer: every GT point takes the label of its nearest non-void
/// predicted point. Acc is the fraction of GT points whose transferred label
/// is correct; IoU per class is TP / (TP + FP + FN) over the transferred
/// labels, and mIoU averages over classes present in the GT.
///
/// Completeness, per GT class c: both clouds are filtered to c and the
/// nearest-neighbor distance is measured from each predicted point to the GT
/// (or the reverse, per `direction`). mcomp averages the per-class fraction
/// of distances below tau; mdcomp averages the per-class indicator
/// [median distance < tau]. A class absent from the predictions scores 0.
/// The raw mean/median distances average over classes present in both.
inline MapLocateScores semantic_scores(const LabeledCloud& pred, const LabeledCloud& gt,
                                       const SemanticOptions& opts = {}) {
  pred.validate();
  gt.validate();
  if (!(opts.tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  const LabeledCloud p = detail::drop_void(pred);
  const LabeledCloud g = detail::drop_void(gt);
  if (g.empty()) throw Error(Errc::EmptyCloud, "ground-truth cloud has no labeled points");
  if (p.empty()) throw Error(Errc::EmptyCloud, "prediction has no non-void points");

  MapLocateScores s;
  s.gt_points = g.size();
  s.pred_points = p.size();

  const PointIndex pred_index(p.points);
  const auto nn = pred_index.nearest_batch(g.points, opts.threads);

  const std::set<Label> classes(g.labels.begin(), g.labels.end());
  std::map<Label, std::size_t> tp, fp, fn;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Label truth = g.labels[i];
    const Label guess = p.labels[nn[i].index];
    if (truth == guess) {
      ++tp[truth];
      ++correct;
    } else {
      ++fn[truth];
      ++fp[guess];
    }
  }
  s.acc = static_cast<double>(correct) / static_cast<double>(g.size());
  double iou_sum = 0.0;
  for (Label c : classes) {
    const double denom = static_cast<double>(tp[c] + fp[c] + fn[c]);
    const double iou = static_cast<double>(tp[c]) / denom;
    s.per_class_iou[c] = iou;
    iou_sum += iou;
  }
  s.miou = iou_sum / static_cast<double>(classes.size());

  double frac_sum = 0.0, median_hits = 0.0, raw_mean_sum = 0.0, raw_median_sum = 0.0;
  std::size_t shared = 0;
  for (Label c : classes) {
    ClassCompleteness cc;
    const auto pred_c = detail::points_with_label(p, c);
    if (!pred_c.empty()) {
      const auto gt_c = detail::points_with_label(g, c);
      const bool forward = opts.direction == CompletenessDirection::PredToGt;
      const auto& targets = forward ? gt_c : pred_c;
      const auto& queries = forward ? pred_c : gt_c;
      const PointIndex index(targets);
      const auto hits = index.nearest_batch(queries, opts.threads);
      std::vector<double> d(hits.size());
      std::size_t within = 0;
      double sum = 0.0;
      for (std::size_t i = 0; i < hits.size(); ++i) {
        d[i] = hits[i].distance;
        sum += d[i];
        if (d[i] < opts.tau) ++within;
      }
      cc.shared = true;
      cc.queries = d.size();
      cc.fraction_within_tau = static_cast<double>(within) / static_cast<double>(d.size());
      cc.mean_distance = sum / static_cast<double>(d.size());
      cc.median_distance = median_inplace(d);
      frac_sum += cc.fraction_within_tau;
      if (cc.median_distance < opts.tau) median_hits += 1.0;
      raw_mean_sum += cc.mean_distance;
      raw_median_sum += cc.median_distance;
      ++shared;
    }
    s.per_class_completeness[c] = cc;
  }
  const double n_classes = static_cast<double>(classes.size());
  s.mcomp = frac_sum / n_classes;
  s.mdcomp = median_hits / n_classes;
  s.no_shared_classes = shared == 0;
  if (shared > 0) {
    s.raw_mean_nn_distance = raw_mean_sum / static_cast<double>(shared);
    s.raw_median_nn_distance = raw_median_sum / static_cast<double>(shared);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Monocular depth

enum class DepthScaleMode { Median, None };

struct DepthScores {
  double absrel = 0.0;
  double delta_125 = 0.0;
  double scale = 1.0;  // factor applied to the prediction
  std::size_t valid_pixels = 0;
};

/// AbsRel = mean |y - s*yhat| / y and delta_1.25 = fraction with
/// max(s*yhat / y, y / (s*yhat)) < 1.25, over pixels where both depths are
/// positive. s is median(y / yhat) in Median mode and 1 otherwise.
inline DepthScores depth_scores(const DepthGrid& pred, const DepthGrid& gt,
                                DepthScaleMode mode = DepthScaleMode::Median) {
  if (pred.height != gt.height || pred.width != gt.width || pred.size() != gt.size())
    throw Error(Errc::DimensionMismatch, "predicted and ground-truth depth differ in size");
  std::vector<std::size_t> valid;
  valid.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double y = gt.data[i], yhat = pred.data[i];
    if (y > 0.0 && yhat > 0.0 && std::isfinite(y) && std::isfinite(yhat)) valid.push_back(i);
  }
  if (valid.empty()) throw Error(Errc::NoValidPixels, "no pixel with positive gt and prediction");
  DepthScores s;
  s.valid_pixels = valid.size();
  if (mode == DepthScaleMode::Median) {
    std::vector<double> ratios;
    ratios.reserve(valid.size());
    for (std::size_t i : valid) ratios.push_back(double(gt.data[i]) / double(pred.data[i]));
    s.scale = median_inplace(ratios);
  }
  double rel_sum = 0.0;
  std::size_t within = 0;
  for (std::size_t i : valid) {
    const double y = gt.data[i];
    const double yhat = s.scale * double(pred.data[i]);
    rel_sum += std::abs(y - yhat) / y;
    if (std::max(yhat / y, y / yhat) < 1.25) ++within;
  }
  s.absrel = rel_sum / static_cast<double>(valid.size());
  s.delta_125 = static_cast<double>(within) / static_cast<double>(valid.size());
  return s;
}

// ---------------------------------------------------------------------------
// Relative pose

struct PosePair {
  RigidTransform gt;    // ground-truth relative pose
  RigidTransform pred;  // predicted relative pose
};

struct PoseError {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
  bool degenerate_translation = false;
};

struct PoseScores {
  std::map<int, double> rra_at;  // threshold (deg) -> fraction
  std::map<int, double> rta_at;
  double maa30 = 0.0;
  std::vector<PoseError> errors;
};

/// Angles within this many degrees of a threshold count as reaching it, so
/// an error constructed as exactly theta is not "below theta" by round-off.
inline constexpr double kThresholdSlackDeg = 1e-9;

inline double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }
inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

inline PoseError pose_error(const PosePair& pair) {
  PoseError e;
  e.rotation_deg = rad_to_deg(rotation_geodesic(pair.gt.rotation, pair.pred.rotation));
  try {
    e.translation_deg =
        rad_to_deg(translation_angle(pair.gt.translation, pair.pred.translation));
  } catch (const Error& err) {
    if (err.code() != Errc::DegenerateTranslation) throw;
    e.translation_deg = 180.0;
    e.degenerate_translation = true;
  }
  return e;
}

/// RRA@t / RTA@t: fraction of pairs with rotation / translation-direction
/// error below t degrees. mAA@30 = (1/30) sum_{t=1..30} min(RRA@t, RTA@t).
inline PoseScores pose_scores(std::span<const PosePair> pairs,
                              std::span<const int> thresholds = {}) {
  if (pairs.empty()) throw Error(Errc::InvalidArgument, "pose_scores needs at least one pair");
  PoseScores s;
  s.errors.reserve(pairs.size());
  for (const auto& p : pairs) s.errors.push_back(pose_error(p));
  const double n = static_cast<double>(pairs.size());
  auto accuracy = [&](double theta, bool rotation) {
    std::size_t hits = 0;
    for (const auto& e : s.errors) {
      const double err = rotation ? e.rotation_deg : e.translation_deg;
      if (err < theta - kThresholdSlackDeg) ++hits;
    }
    return static_cast<double>(hits) / n;
  };
  double area = 0.0;
  for (int t = 1; t <= 30; ++t) area += std::min(accuracy(t, true), accuracy(t, false));
  s.maa30 = area / 30.0;
  for (int t : thresholds) {
    if (t <= 0) throw Error(Errc::InvalidArgument, "thresholds must be positive degrees");
    s.rra_at[t] = accuracy(t, true);
    s.rta_at[t] = accuracy(t, false);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Zero-shot segmentation

/// H x W x D per-pixel features, row-major with D fastest.
struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  std::span<const float> pixel(std::size_t i) const { return {data.data() + i * dim, dim}; }

  void validate() const {
    if (data.size() != height * width * dim)
      throw Error(Errc::ShapeMismatch, "feature grid data does not match H x W x D");
  }
};

/// Class text embeddings; row i is the class with label i + 1 (label 0 is
/// void).
struct ClassEmbeddings {
  static constexpr double kNormTolerance = 1e-6;

  std::vector<std::string> names;
  std::size_t dim = 0;
  std::vector<float> vectors;  // L x D

  std::size_t size() const { return dim ? vectors.size() / dim : 0; }
  std::span<const float> row(std::size_t i) const { return {vectors.data() + i * dim, dim}; }

  void validate() const {
    if (dim == 0 || vectors.empty() || vectors.size() % dim != 0)
      throw Error(Errc::ShapeMismatch, "class embeddings must be a nonempty L x D matrix");
    if (!names.empty() && names.size() != size())
      throw Error(Errc::LengthMismatch, std::to_string(names.size()) + " class names for " +
                                            std::to_string(size()) + " embedding rows");
    if (size() >= 0xFFFF) throw Error(Errc::InvalidArgument, "too many classes for u16 labels");
    for (std::size_t r = 0; r < size(); ++r) {
      double sq = 0.0;
      for (float v : row(r)) sq += double(v) * double(v);
      if (std::abs(std::sqrt(sq) - 1.0) > kNormTolerance)
        throw Error(Errc::InvalidArgument,
                    "embedding row " + std::to_string(r) + " is not unit-norm");
    }
  }

  static ClassEmbeddings from_tensor(const Tensor& t, std::vector<std::string> names = {}) {
    if (t.rank() != 2) throw Error(Errc::ShapeMismatch, "class embeddings must be rank 2");
    ClassEmbeddings e;
    e.names = std::move(names);
    e.dim = static_cast<std::size_t>(t.shape[1]);
    e.vectors = t.values<float>();
    e.validate();
    return e;
  }
};

/// Per pixel, the label of the class whose embedding has the highest cosine
/// similarity with the pixel feature. Zero-norm features become void; ties
/// go to the smaller class index.
inline LabelGrid classify_pixels(const FeatureGrid& features, const ClassEmbeddings& classes) {
  features.validate();
  if (features.dim != classes.dim)
    throw Error(Errc::DimensionMismatch, "feature dim " + std::to_string(features.dim) +
                                             " vs embedding dim " + std::to_string(classes.dim));
  LabelGrid out(features.height, features.width, kVoidLabel);
  std::vector<double> row_norm(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    double sq = 0.0;
    for (float v : classes.row(c)) sq += double(v) * double(v);
    row_norm[c] = std::sqrt(sq);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto f = features.pixel(i);
    double fsq = 0.0;
    for (float v : f) fsq += double(v) * double(v);
    const double fnorm = std::sqrt(fsq);
    if (!(fnorm > 0.0) || !std::isfinite(fnorm)) continue;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const auto e = classes.row(c);
      double dot = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) dot += double(f[k]) * double(e[k]);
      const double cosine = dot / (fnorm * row_norm[c]);
      if (cosine > best) {
        best = cosine;
        best_c = c;
      }
    }
    out.data[i] = static_cast<Label>(best_c + 1);
  }
  return out;
}

/// Nearest-neighbor resampling of a label grid to height x width.
inline LabelGrid resize_labels_nearest(const LabelGrid& in, std::size_t height, std::size_t width) {
  if (in.size() == 0 || height == 0 || width == 0)
    throw Error(Errc::DimensionMismatch, "cannot resize an empty label grid");
  LabelGrid out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t sr = std::min(in.height - 1, (2 * r + 1) * in.height / (2 * height));
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t sc = std::min(in.width - 1, (2 * c + 1) * in.width / (2 * width));
      out(r, c) = in(sr, sc);
    }
  }
  return out;
}

struct SegmentationScores {
  double miou = 0.0;
  double pixel_acc = 0.0;
  std::map<Label, double> per_class_iou;
  std::size_t valid_pixels = 0;
};

/// Confusion-matrix mIoU over labels 1..num_classes. Void GT pixels are
/// excluded; the mean runs over classes present in the GT.
inline SegmentationScores segmentation_miou(const LabelGrid& pred, const LabelGrid& gt,
                                            std::size_t num_classes) {
  if (pred.height != gt.height || pred.width != gt.width || pred.size() != gt.size())
    throw Error(Errc::DimensionMismatch, "prediction and ground truth differ in size");
  const std::size_t n = num_classes + 1;
  std::vector<std::uint64_t> confusion(n * n, 0);  // [gt][pred]
  std::size_t valid = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Label g = gt.data[i], p = pred.data[i];
    if (g > num_classes || p > num_classes)
      throw Error(Errc::InvalidArgument, "label exceeds num_classes");
    if (g == kVoidLabel) continue;
    ++confusion[g * n + p];
    ++valid;
  }
  if (valid == 0) throw Error(Errc::NoValidPixels, "ground truth is entirely void");
  SegmentationScores s;
  s.valid_pixels = valid;
  std::uint64_t correct = 0;
  double sum = 0.0;
  for (std::size_t c = 1; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += confusion[c * n + k];
      col += confusion[k * n + c];
    }
    if (row == 0) continue;
    const std::uint64_t tp = confusion[c * n + c];
    correct += tp;
    const double iou = double(tp) / double(row + col - tp);
    s.per_class_iou[static_cast<Label>(c)] = iou;
    sum += iou;
  }
  s.miou = sum / static_cast<double>(s.per_class_iou.size());
  s.pixel_acc = double(correct) / double(valid);
  return s;
}

}  // namespace maploc
