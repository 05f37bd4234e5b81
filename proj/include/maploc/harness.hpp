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

// Bundle-level evaluation runs and their JSON/CSV reports. Each run
// evaluates groups independently (optionally in parallel) and reduces the
// results in manifest order, so reports do not depend on the thread count.
// Wall-clock data lives only under the report's "timing" key.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "maploc/alignment.hpp"
#include "maploc/bundle.hpp"
#include "maploc/curation.hpp"
#include "maploc/error.hpp"
#include "maploc/geometry.hpp"
#include "maploc/metrics.hpp"
#include "maploc/parallel.hpp"

namespace maploc {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Configuration

enum class AlignmentMode { MedianRatio, Umeyama };

struct EvalConfig {
  double tau = 0.10;
  double conf_min = 0.0;
  double min_overlap = 0.3;
  DepthScaleMode scale_mode = DepthScaleMode::Median;
  CompletenessDirection completeness_direction = CompletenessDirection::PredToGt;
  AlignmentMode alignment_mode = AlignmentMode::MedianRatio;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<int> pose_thresholds{5, 10, 15, 30};
  // curation
  std::vector<std::size_t> group_sizes{2, 3, 4};
  std::size_t groups_per_size = 2;
  std::string label_map;
  std::size_t covisibility_stride = 1;
  // stats
  double translation_bin = 0.25;   // meters
  double rotation_bin_deg = 5.0;
};

inline const char* to_string(DepthScaleMode m) { return m == DepthScaleMode::Median ? "median" : "none"; }
inline const char* to_string(CompletenessDirection d) {
  return d == CompletenessDirection::PredToGt ? "pred_to_gt" : "gt_to_pred";
}
inline const char* to_string(AlignmentMode m) {
  return m == AlignmentMode::MedianRatio ? "median_ratio" : "umeyama";
}

// The thread count is execution detail; it is reported under "timing" so the
// rest of a report is identical across thread counts.
inline json config_to_json(const EvalConfig& c) {
  return {{"tau", c.tau},
          {"conf_min", c.conf_min},
          {"min_overlap", c.min_overlap},
          {"scale_mode", to_string(c.scale_mode)},
          {"completeness_direction", to_string(c.completeness_direction)},
          {"alignment_mode", to_string(c.alignment_mode)},
          {"seed", c.seed},
          {"pose_thresholds", c.pose_thresholds},
          {"group_sizes", c.group_sizes},
          {"groups_per_size", c.groups_per_size},
          {"label_map", c.label_map},
          {"covisibility_stride", c.covisibility_stride},
          {"translation_bin", c.translation_bin},
          {"rotation_bin_deg", c.rotation_bin_deg}};
}

/// Parses a config document; absent keys keep their defaults, unknown keys
/// are rejected.
inline EvalConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
  EvalConfig c;
  auto fail = [](const std::string& key, const std::string& why) {
    throw Error(Errc::InvalidConfig, "\"" + key + "\": " + why);
  };
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "tau") {
        c.tau = v.get<double>();
        if (!(c.tau > 0.0)) fail(key, "must be positive");
      } else if (key == "conf_min") {
        c.conf_min = v.get<double>();
      } else if (key == "min_overlap") {
        c.min_overlap = v.get<double>();
        if (!(c.min_overlap >= 0.0 && c.min_overlap <= 1.0)) fail(key, "must be in [0, 1]");
      } else if (key == "scale_mode") {
        const auto s = v.get<std::string>();
        if (s == "median") c.scale_mode = DepthScaleMode::Median;
        else if (s == "none") c.scale_mode = DepthScaleMode::None;
        else fail(key, "expected median|none");
      } else if (key == "completeness_direction") {
        const auto s = v.get<std::string>();
        if (s == "pred_to_gt") c.completeness_direction = CompletenessDirection::PredToGt;
        else if (s == "gt_to_pred") c.completeness_direction = CompletenessDirection::GtToPred;
        else fail(key, "expected pred_to_gt|gt_to_pred");
      } else if (key == "alignment_mode") {
        const auto s = v.get<std::string>();
        if (s == "median_ratio") c.alignment_mode = AlignmentMode::MedianRatio;
        else if (s == "umeyama") c.alignment_mode = AlignmentMode::Umeyama;
        else fail(key, "expected median_ratio|umeyama");
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "threads") {
        c.threads = v.get<unsigned>();
      } else if (key == "pose_thresholds") {
        c.pose_thresholds = v.get<std::vector<int>>();
        for (int t : c.pose_thresholds)
          if (t <= 0) fail(key, "thresholds must be positive");
      } else if (key == "group_sizes") {
        c.group_sizes = v.get<std::vector<std::size_t>>();
      } else if (key == "groups_per_size") {
        c.groups_per_size = v.get<std::size_t>();
      } else if (key == "label_map") {
        c.label_map = v.get<std::string>();
      } else if (key == "covisibility_stride") {
        c.covisibility_stride = v.get<std::size_t>();
        if (c.covisibility_stride == 0) fail(key, "must be >= 1");
      } else if (key == "translation_bin") {
        c.translation_bin = v.get<double>();
        if (!(c.translation_bin > 0.0)) fail(key, "must be positive");
      } else if (key == "rotation_bin_deg") {
        c.rotation_bin_deg = v.get<double>();
        if (!(c.rotation_bin_deg > 0.0)) fail(key, "must be positive");
      } else {
        fail(key, "unknown key");
      }
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }
  return c;
}

inline EvalConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::InvalidConfig, "cannot open config " + path.string());
  try {
    return config_from_json(json::parse(is));
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run plumbing

/// A finished run: the JSON report, the CSV summary and whether any group
/// failed.
struct RunResult {
  json report;
  std::string csv;
  bool any_failed = false;
};

struct GroupRef {
  const SceneEntry* scene;
  const GroupEntry* group;
};

inline std::vector<GroupRef> group_refs(const Bundle& b) {
  std::vector<GroupRef> refs;
  for (const auto& s : b.scenes)
    for (const auto& g : s.groups) refs.push_back({&s, &g});
  return refs;
}

inline json error_json(const std::exception& e) {
  if (const auto* me = dynamic_cast<const Error*>(&e)) {
    json j = {{"code", std::string(to_string(me->code()))}, {"message", me->message()}};
    if (!me->details().empty()) j["details"] = me->details();
    return j;
  }
  return {{"code", "Internal"}, {"message", e.what()}};
}

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json report_header(const char* command, const EvalConfig& c, const Bundle& b) {
  return {{"schema_version", kReportSchemaVersion},
          {"tool_version", kToolVersion},
          {"command", command},
          {"bundle", b.root.filename().string()},
          {"config", config_to_json(c)}};
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

/// Per-view-count means of `fields` over successful groups.
inline json aggregate_by_views(const json& per_group, const std::vector<std::string>& fields) {
  std::map<int, std::pair<std::size_t, std::map<std::string, double>>> acc;
  for (const auto& g : per_group) {
    if (g.at("status") != "ok") continue;
    auto& [count, sums] = acc[g.at("views").get<int>()];
    ++count;
    for (const auto& f : fields) sums[f] += g.at("scores").at(f).get<double>();
  }
  json out = json::array();
  for (const auto& [views, entry] : acc) {
    json row = {{"views", views}, {"groups", entry.first}};
    for (const auto& f : fields) row[f] = entry.second.at(f) / static_cast<double>(entry.first);
    out.push_back(row);
  }
  return out;
}

/// Recomputes the aggregate rows from the per-group rows; throws if any
/// differs by more than 1e-12.
inline void verify_aggregate(const json& per_group, const json& aggregate,
                             const std::vector<std::string>& fields) {
  const json expected = aggregate_by_views(per_group, fields);
  if (expected.size() != aggregate.size())
    throw Error(Errc::InvalidArgument, "aggregate row count mismatch");
  for (std::size_t i = 0; i < expected.size(); ++i)
    for (const auto& f : fields)
      if (std::abs(expected[i][f].get<double>() - aggregate[i][f].get<double>()) > 1e-12)
        throw Error(Errc::InvalidArgument, "aggregate " + f + " differs from per-group mean");
}

template <class EvalFn>
json run_groups(const Bundle& b, unsigned threads, EvalFn&& eval) {
  const auto refs = group_refs(b);
  std::vector<json> rows(refs.size());
  parallel_for(refs.size(), threads, [&](std::size_t i) {
    const auto& [scene, group] = refs[i];
    json row = {{"scene", scene->id}, {"group", group->id}, {"views", group->frames.size()}};
    try {
      row["scores"] = eval(*scene, *group);
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "failed";
      row["error"] = error_json(e);
      row["error"]["context"] = scene->id + "/" + group->id;
    }
    rows[i] = std::move(row);
  });
  json out = json::array();
  for (auto& r : rows) out.push_back(std::move(r));
  return out;
}

inline bool any_failed(const json& per_group) {
  for (const auto& g : per_group)
    if (g.at("status") != "ok") return true;
  return false;
}

inline std::string group_csv(const json& per_group, const std::vector<std::string>& fields) {
  std::ostringstream os;
  os << "scene,group,views,status";
  for (const auto& f : fields) os << "," << f;
  os << "\n";
  for (const auto& g : per_group) {
    os << csv_field(g["scene"].get<std::string>()) << "," << csv_field(g["group"].get<std::string>())
       << "," << g["views"].get<int>() << "," << g["status"].get<std::string>();
    for (const auto& f : fields) {
      os << ",";
      if (g["status"] == "ok") os << fmt(g["scores"][f].get<double>());
    }
    os << "\n";
  }
  return os.str();
}

class Stopwatch {
 public:
  explicit Stopwatch(unsigned threads)
      : start_(std::chrono::steady_clock::now()), started_at_(utc_timestamp()), threads_(threads) {}
  json timing() const {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    return {{"wall_seconds", dt.count()},
            {"started_at", started_at_},
            {"threads", resolve_threads(threads_)}};
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::string started_at_;
  unsigned threads_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Map and Locate

/// World-aligned predicted pointmaps of one group plus the reference
/// transform that produced them.
struct AlignedGroup {
  std::vector<FrameGroundTruth> gt;
  std::vector<FramePrediction> pred;
  std::vector<Pointmap> world;      // per frame, world coordinates
  SimilarityTransform to_world;     // reference-camera prediction -> world
  double reference_residual_rms = 0.0;
};

/// Scales and places a group's predictions in world coordinates using the
/// first frame's ground-truth depth and pose.
inline AlignedGroup align_group(const Bundle& b, const SceneEntry& scene, const GroupEntry& group,
                                const EvalConfig& cfg) {
  AlignedGroup out;
  for (const auto& f : group.frames) {
    out.gt.push_back(load_frame_gt(b, scene.id, group.id, f));
    out.pred.push_back(load_frame_prediction(b, scene.id, group.id, f));
    if (!out.pred.back().pointmap)
      throw Error(Errc::MissingFile, "frame " + f + " has no " + files::kPredPointmap,
                  {(b.frame_dir(scene.id, group.id, f) / files::kPredPointmap).string()});
    const auto& pm = *out.pred.back().pointmap;
    if (!out.gt.back().depth.same_dims(pm.height, pm.width))
      throw Error(Errc::DimensionMismatch, "frame " + f + ": prediction does not match gt size");
  }
  const auto& ref_gt = out.gt.front();
  const auto& ref_pm = *out.pred.front().pointmap;
  SimilarityTransform in_ref_camera;
  if (cfg.alignment_mode == AlignmentMode::MedianRatio) {
    in_ref_camera.scale = reference_scale(ref_pm, ref_gt.depth);
  } else {
    in_ref_camera = reference_similarity(ref_pm, ref_gt.depth, ref_gt.intrinsics).transform;
  }
  out.to_world = compose(SimilarityTransform{1.0, ref_gt.pose}, in_ref_camera);

  const Pointmap ref_gt_world =
      apply_transform({1.0, ref_gt.pose}, unproject(ref_gt.depth, ref_gt.intrinsics));
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref_pm.size(); ++i) {
    if (ref_gt_world.conf(i) <= 0.0 || ref_pm.conf(i) <= 0.0) continue;
    sq += (out.to_world.apply(ref_pm.points[i]) - ref_gt_world.points[i]).squaredNorm();
    ++n;
  }
  out.reference_residual_rms = n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;

  for (const auto& p : out.pred) {
    Pointmap w = apply_transform(out.to_world, *p.pointmap);
    w.frame = "world";
    out.world.push_back(std::move(w));
  }
  return out;
}

/// Ground-truth labeled cloud of a frame in world coordinates.
inline LabeledCloud gt_world_cloud(const FrameGroundTruth& f) {
  const Pointmap pm = apply_transform({1.0, f.pose}, unproject(f.depth, f.intrinsics));
  return flatten(pm, f.labels, 0.0, f.instances ? &*f.instances : nullptr);
}

inline LabelGrid predicted_labels(const FramePrediction& p, const ClassEmbeddings* classes,
                                  std::size_t height, std::size_t width) {
  LabelGrid labels;
  if (p.labels) {
    labels = *p.labels;
  } else if (p.features) {
    if (!classes)
      throw Error(Errc::MissingFile, "pred_feat present but bundle has no classes/embeddings.mltf");
    labels = classify_pixels(*p.features, *classes);
  } else {
    throw Error(Errc::MissingFile, "frame has neither pred_labels nor pred_feat");
  }
  if (!labels.same_dims(height, width)) labels = resize_labels_nearest(labels, height, width);
  return labels;
}

inline json scores_json(const MapLocateScores& s) {
  json per_class = json::object();
  for (const auto& [c, iou] : s.per_class_iou) per_class[std::to_string(c)] = iou;
  json completeness = json::object();
  for (const auto& [c, cc] : s.per_class_completeness)
    completeness[std::to_string(c)] = {{"fraction_within_tau", cc.fraction_within_tau},
                                       {"mean_distance", cc.mean_distance},
                                       {"median_distance", cc.median_distance},
                                       {"queries", cc.queries},
                                       {"shared", cc.shared}};
  return {{"miou", s.miou},
          {"miou_percent", 100.0 * s.miou},
          {"acc", s.acc},
          {"acc_percent", 100.0 * s.acc},
          {"mcomp", s.mcomp},
          {"mdcomp", s.mdcomp},
          {"raw_mean_nn_distance", s.raw_mean_nn_distance},
          {"raw_median_nn_distance", s.raw_median_nn_distance},
          {"no_shared_classes", s.no_shared_classes},
          {"gt_points", s.gt_points},
          {"pred_points", s.pred_points},
          {"per_class_iou", per_class},
          {"per_class_completeness", completeness}};
}

inline MapLocateScores evaluate_maploc_group(const Bundle& b, const SceneEntry& scene,
                                             const GroupEntry& group, const EvalConfig& cfg,
                                             const ClassEmbeddings* classes) {
  const AlignedGroup aligned = align_group(b, scene, group, cfg);
  LabeledCloud pred, gt;
  for (std::size_t i = 0; i < group.frames.size(); ++i) {
    const auto& pm = aligned.world[i];
    const LabelGrid labels = predicted_labels(aligned.pred[i], classes, pm.height, pm.width);
    const LabeledCloud pc = flatten(pm, labels, cfg.conf_min);
    pred.points.insert(pred.points.end(), pc.points.begin(), pc.points.end());
    pred.labels.insert(pred.labels.end(), pc.labels.begin(), pc.labels.end());
    const LabeledCloud gc = gt_world_cloud(aligned.gt[i]);
    gt.points.insert(gt.points.end(), gc.points.begin(), gc.points.end());
    gt.labels.insert(gt.labels.end(), gc.labels.begin(), gc.labels.end());
  }
  return semantic_scores(pred, gt, {cfg.tau, cfg.completeness_direction, 1});
}

inline const std::vector<std::string>& maploc_fields() {
  static const std::vector<std::string> f{"miou",  "miou_percent", "acc",
                                          "acc_percent", "mcomp", "mdcomp",
                                          "raw_mean_nn_distance", "raw_median_nn_distance"};
  return f;
}

inline RunResult eval_maploc(const Bundle& b, const EvalConfig& cfg) {
  detail::Stopwatch clock(cfg.threads);
  std::optional<ClassEmbeddings> classes;
  std::optional<json> classes_error;
  if (has_class_embeddings(b)) {
    try {
      classes = load_class_embeddings(b);
    } catch (const Error& e) {
      classes_error = error_json(e);
    }
  }
  const json per_group = detail::run_groups(b, cfg.threads, [&](const SceneEntry& s,
                                                                const GroupEntry& g) {
    if (classes_error) throw Error(Errc::InvalidArgument, (*classes_error)["message"].get<std::string>());
    return scores_json(evaluate_maploc_group(b, s, g, cfg, classes ? &*classes : nullptr));
  });
  RunResult r;
  r.report = detail::report_header("eval-maploc", cfg, b);
  r.report["per_group"] = per_group;
  r.report["aggregate"] = detail::aggregate_by_views(per_group, maploc_fields());
  detail::verify_aggregate(per_group, r.report["aggregate"], maploc_fields());
  r.any_failed = detail::any_failed(per_group);
  std::size_t failed = 0;
  for (const auto& g : per_group) failed += g["status"] != "ok";
  r.report["failed_groups"] = failed;
  r.csv = detail::group_csv(per_group, {"miou", "acc", "mcomp", "mdcomp", "raw_mean_nn_distance",
                                        "raw_median_nn_distance"});
  r.report["timing"] = clock.timing();
  return r;
}

// ---------------------------------------------------------------------------
// Monocular depth

inline RunResult eval_depth(const Bundle& b, const EvalConfig& cfg) {
  detail::Stopwatch clock(cfg.threads);
  const json per_group = detail::run_groups(b, cfg.threads, [&](const SceneEntry& s,
                                                                const GroupEntry& g) {
    double absrel = 0.0, delta = 0.0;
    json frames = json::array();
    for (const auto& f : g.frames) {
      const auto gt = load_frame_gt(b, s.id, g.id, f);
      const auto pred = load_frame_prediction(b, s.id, g.id, f);
      DepthGrid pd;
      if (pred.depth) {
        pd = *pred.depth;
      } else if (pred.pointmap_local) {
        pd = DepthGrid(pred.pointmap_local->height, pred.pointmap_local->width);
        for (std::size_t i = 0; i < pd.size(); ++i)
          pd.data[i] = static_cast<float>(pred.pointmap_local->points[i].z());
      } else {
        throw Error(Errc::MissingFile, "frame " + f + " has neither pred_depth nor pred_pointmap_local");
      }
      const DepthScores ds = depth_scores(pd, gt.depth, cfg.scale_mode);
      frames.push_back({{"frame", f},
                        {"absrel", ds.absrel},
                        {"delta_125", ds.delta_125},
                        {"scale", ds.scale},
                        {"valid_pixels", ds.valid_pixels}});
      absrel += ds.absrel;
      delta += ds.delta_125;
    }
    const double n = static_cast<double>(g.frames.size());
    return json{{"absrel", absrel / n},
                {"absrel_x100", 100.0 * absrel / n},
                {"delta_125", delta / n},
                {"delta_125_x100", 100.0 * delta / n},
                {"frames", frames}};
  });
  const std::vector<std::string> fields{"absrel", "absrel_x100", "delta_125", "delta_125_x100"};
  RunResult r;
  r.report = detail::report_header("eval-depth", cfg, b);
  r.report["per_group"] = per_group;
  r.report["aggregate"] = detail::aggregate_by_views(per_group, fields);
  detail::verify_aggregate(per_group, r.report["aggregate"], fields);
  r.any_failed = detail::any_failed(per_group);
  r.csv = detail::group_csv(per_group, fields);
  r.report["timing"] = clock.timing();
  return r;
}

// ---------------------------------------------------------------------------
// Relative pose

/// Predicted camera-to-reference poses of a group's frames, recovered by
/// rigidly registering each frame's own-frame pointmap onto its prediction
/// in the reference frame. The first frame is the reference (identity).
inline std::vector<RigidTransform> predicted_group_poses(
    const std::vector<FrameGroundTruth>& gt, const std::vector<FramePrediction>& pred) {
  std::vector<RigidTransform> poses{RigidTransform::identity()};
  for (std::size_t i = 1; i < pred.size(); ++i) {
    if (!pred[i].pointmap)
      throw Error(Errc::MissingFile, "frame " + gt[i].id + " has no pred_pointmap");
    Pointmap local;
    if (pred[i].pointmap_local) {
      local = *pred[i].pointmap_local;
    } else if (pred[i].depth) {
      local = unproject(*pred[i].depth, gt[i].intrinsics);
    } else {
      throw Error(Errc::MissingFile,
                  "frame " + gt[i].id + " needs pred_pointmap_local or pred_depth for pose recovery");
    }
    poses.push_back(pose_from_pointmaps(local, *pred[i].pointmap).transform.rigid);
  }
  return poses;
}

inline json pose_scores_json(const PoseScores& s) {
  json rra = json::object(), rta = json::object(), out = json::object();
  for (const auto& [t, v] : s.rra_at) {
    rra[std::to_string(t)] = v;
    out["rra_" + std::to_string(t)] = v;
    out["rra_" + std::to_string(t) + "_x100"] = 100.0 * v;
  }
  for (const auto& [t, v] : s.rta_at) {
    rta[std::to_string(t)] = v;
    out["rta_" + std::to_string(t)] = v;
    out["rta_" + std::to_string(t) + "_x100"] = 100.0 * v;
  }
  out["rra_at"] = rra;
  out["rta_at"] = rta;
  out["maa30"] = s.maa30;
  out["maa30_x100"] = 100.0 * s.maa30;
  out["pairs"] = s.errors.size();
  return out;
}

inline RunResult eval_pose(const Bundle& b, const EvalConfig& cfg) {
  detail::Stopwatch clock(cfg.threads);
  const auto refs = group_refs(b);
  std::vector<std::vector<PosePair>> group_pairs(refs.size());
  std::map<const GroupEntry*, std::size_t> slot;
  for (std::size_t i = 0; i < refs.size(); ++i) slot[refs[i].group] = i;
  const json per_group = detail::run_groups(b, cfg.threads, [&](const SceneEntry& s,
                                                                const GroupEntry& g) {
    std::vector<FrameGroundTruth> gt;
    std::vector<FramePrediction> pred;
    for (const auto& f : g.frames) {
      gt.push_back(load_frame_gt(b, s.id, g.id, f));
      pred.push_back(load_frame_prediction(b, s.id, g.id, f));
    }
    const auto est = predicted_group_poses(gt, pred);
    std::vector<PosePair> pairs;
    for (std::size_t i = 0; i < gt.size(); ++i)
      for (std::size_t j = i + 1; j < gt.size(); ++j)
        pairs.push_back({relative_pose(gt[i].pose, gt[j].pose), relative_pose(est[i], est[j])});
    group_pairs[slot.at(&g)] = pairs;
    return pose_scores_json(pose_scores(pairs, cfg.pose_thresholds));
  });

  // Pair-level accuracy per view count and over the whole bundle.
  std::map<int, std::vector<PosePair>> by_views;
  std::vector<PosePair> all;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (per_group[i]["status"] != "ok") continue;
    auto& bucket = by_views[static_cast<int>(refs[i].group->frames.size())];
    bucket.insert(bucket.end(), group_pairs[i].begin(), group_pairs[i].end());
    all.insert(all.end(), group_pairs[i].begin(), group_pairs[i].end());
  }
  json aggregate = json::array();
  for (const auto& [views, pairs] : by_views) {
    json row = pose_scores_json(pose_scores(pairs, cfg.pose_thresholds));
    row["views"] = views;
    aggregate.push_back(row);
  }
  RunResult r;
  r.report = detail::report_header("eval-pose", cfg, b);
  r.report["per_group"] = per_group;
  r.report["aggregate"] = aggregate;
  r.report["overall"] = all.empty() ? json(nullptr) : pose_scores_json(pose_scores(all, cfg.pose_thresholds));
  r.any_failed = detail::any_failed(per_group);
  std::vector<std::string> fields;
  for (int t : cfg.pose_thresholds) fields.push_back("rra_" + std::to_string(t));
  for (int t : cfg.pose_thresholds) fields.push_back("rta_" + std::to_string(t));
  fields.push_back("maa30");
  r.csv = detail::group_csv(per_group, fields);
  r.report["timing"] = clock.timing();
  return r;
}

// ---------------------------------------------------------------------------
// Alignment export

/// Aligns every group's predictions to world coordinates and writes
/// `<out>/<scene>/<group>/<frame>/aligned_pointmap.mltf`.
inline RunResult run_align(const Bundle& b, const EvalConfig& cfg, const fs::path& out_dir) {
  detail::Stopwatch clock(cfg.threads);
  const json per_group = detail::run_groups(b, cfg.threads, [&](const SceneEntry& s,
                                                                const GroupEntry& g) {
    const AlignedGroup a = align_group(b, s, g, cfg);
    for (std::size_t i = 0; i < g.frames.size(); ++i) {
      const fs::path dir = out_dir / s.id / g.id / g.frames[i];
      fs::create_directories(dir);
      write_tensor(dir / "aligned_pointmap.mltf", pointmap_to_tensor(a.world[i]));
    }
    const Mat4 m = a.to_world.rigid.matrix();
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    return json{{"scale", a.to_world.scale},
                {"rigid", rows},
                {"reference_frame", g.frames.front()},
                {"reference_residual_rms", a.reference_residual_rms}};
  });
  RunResult r;
  r.report = detail::report_header("align", cfg, b);
  r.report["per_group"] = per_group;
  r.any_failed = detail::any_failed(per_group);
  r.csv = detail::group_csv(per_group, {"scale", "reference_residual_rms"});
  r.report["timing"] = clock.timing();
  return r;
}

// ---------------------------------------------------------------------------
// Camera statistics

struct StatsResult {
  json summary;
  std::string pairs_csv;
  std::string histogram_csv;
};

inline StatsResult run_stats(const Bundle& b, const EvalConfig& cfg) {
  struct PairRow {
    int views;
    std::string scene, group, a, b;
    CameraDelta delta;
  };
  std::vector<PairRow> rows;
  for (const auto& s : b.scenes)
    for (const auto& g : s.groups) {
      std::vector<RigidTransform> poses;
      for (const auto& f : g.frames)
        poses.push_back(pose_from_tensor(read_tensor(b.frame_dir(s.id, g.id, f) / files::kGtPose)));
      for (std::size_t i = 0; i < poses.size(); ++i)
        for (std::size_t j = i + 1; j < poses.size(); ++j)
          rows.push_back({static_cast<int>(g.frames.size()), s.id, g.id, g.frames[i], g.frames[j],
                          camera_delta(poses[i], poses[j])});
    }

  StatsResult out;
  std::ostringstream pairs;
  pairs << "views,scene,group,frame_a,frame_b,d_translation,d_rotation\n";
  for (const auto& r : rows)
    pairs << r.views << "," << detail::csv_field(r.scene) << "," << detail::csv_field(r.group) << ","
          << detail::csv_field(r.a) << "," << detail::csv_field(r.b) << ","
          << detail::fmt(r.delta.d_translation) << "," << detail::fmt(r.delta.d_rotation) << "\n";
  out.pairs_csv = pairs.str();

  // Bin indices get a 1e-9 nudge so values on a bin edge (e.g. exactly 30 deg
  // recovered through acos) land in the upper bin.
  auto bin_of = [](double v, double width) { return static_cast<long>(std::floor(v / width + 1e-9)); };
  std::map<std::tuple<int, std::string, long>, std::size_t> hist;
  std::map<int, std::tuple<std::size_t, double, double>> means;
  for (const auto& r : rows) {
    ++hist[{r.views, "d_translation", bin_of(r.delta.d_translation, cfg.translation_bin)}];
    ++hist[{r.views, "d_rotation_deg", bin_of(rad_to_deg(r.delta.d_rotation), cfg.rotation_bin_deg)}];
    auto& [n, t, rr] = means[r.views];
    ++n;
    t += r.delta.d_translation;
    rr += r.delta.d_rotation;
  }
  std::ostringstream h;
  h << "views,quantity,bin,bin_lo,bin_hi,count\n";
  for (const auto& [key, count] : hist) {
    const auto& [views, quantity, bin] = key;
    const double width = quantity == "d_translation" ? cfg.translation_bin : cfg.rotation_bin_deg;
    h << views << "," << quantity << "," << bin << "," << detail::fmt(bin * width) << ","
      << detail::fmt((bin + 1) * width) << "," << count << "\n";
  }
  out.histogram_csv = h.str();

  json per_views = json::array();
  for (const auto& [views, m] : means) {
    const auto& [n, t, rr] = m;
    per_views.push_back({{"views", views},
                         {"pairs", n},
                         {"mean_d_translation", t / static_cast<double>(n)},
                         {"mean_d_rotation", rr / static_cast<double>(n)}});
  }
  out.summary = detail::report_header("stats", cfg, b);
  out.summary["per_views"] = per_views;
  return out;
}

// ---------------------------------------------------------------------------
// Curation

/// Reads `<scans>/<scene>/<frame>/{gt_depth,gt_pose,intrinsics,raw_labels}.mltf`
/// scans, selects overlap-constrained groups per scene, maps raw labels to
/// NYU40 and writes a bundle. Returns the curation summary.
inline RunResult run_curate(const fs::path& scans, const fs::path& out_root, const EvalConfig& cfg) {
  detail::Stopwatch clock(cfg.threads);
  if (!fs::is_directory(scans)) throw Error(Errc::Io, "scan directory not found: " + scans.string());
  if (cfg.label_map.empty())
    throw Error(Errc::InvalidConfig, "curation requires \"label_map\" (TSV raw id -> NYU40 id)");
  const LabelMapping mapping = LabelMapping::from_tsv(cfg.label_map);

  std::vector<std::string> scene_ids;
  for (const auto& e : fs::directory_iterator(scans))
    if (e.is_directory()) scene_ids.push_back(e.path().filename().string());
  std::sort(scene_ids.begin(), scene_ids.end());

  Bundle bundle;
  bundle.root = out_root;
  json scenes = json::array();
  bool failed = false;
  for (const auto& scene : scene_ids) {
    json entry = {{"scene", scene}};
    try {
      std::vector<std::string> frame_ids;
      for (const auto& e : fs::directory_iterator(scans / scene))
        if (e.is_directory()) frame_ids.push_back(e.path().filename().string());
      std::sort(frame_ids.begin(), frame_ids.end());
      std::vector<CameraFrame> frames;
      for (const auto& f : frame_ids) {
        const fs::path dir = scans / scene / f;
        frames.push_back({f, grid_from_tensor<float>(read_tensor(dir / files::kGtDepth)),
                          pose_from_tensor(read_tensor(dir / files::kGtPose)),
                          intrinsics_from_tensor(read_tensor(dir / files::kIntrinsics))});
      }
      GroupingOptions opts;
      opts.sizes = cfg.group_sizes;
      opts.groups_per_size = cfg.groups_per_size;
      opts.min_overlap = cfg.min_overlap;
      opts.seed = cfg.seed;
      opts.covisibility.pixel_stride = cfg.covisibility_stride;
      opts.threads = cfg.threads;
      const auto groups = build_groups(scene, frames, opts);

      SceneEntry se{scene, {}};
      std::map<std::size_t, std::size_t> per_size;
      json group_json = json::array();
      for (const auto& chosen : groups) {
        const std::size_t k = chosen.frames.size();
        GroupEntry ge{"v" + std::to_string(k) + "_" + std::to_string(per_size[k]++), chosen.frames};
        for (const auto& f : chosen.frames) {
          const fs::path src = scans / scene / f;
          FrameGroundTruth gt;
          gt.id = f;
          gt.depth = grid_from_tensor<float>(read_tensor(src / files::kGtDepth));
          gt.pose = pose_from_tensor(read_tensor(src / files::kGtPose));
          gt.intrinsics = intrinsics_from_tensor(read_tensor(src / files::kIntrinsics));
          gt.labels = map_labels(grid_from_tensor<std::uint16_t>(read_tensor(src / "raw_labels.mltf")),
                                 mapping);
          if (fs::is_regular_file(src / files::kGtInstances))
            gt.instances = grid_from_tensor<std::uint16_t>(read_tensor(src / files::kGtInstances));
          write_frame_gt(bundle, scene, ge.id, gt);
        }
        group_json.push_back({{"id", ge.id},
                              {"frames", chosen.frames},
                              {"overlap", chosen.overlap},
                              {"min_rotation", chosen.min_rotation}});
        se.groups.push_back(std::move(ge));
      }
      bundle.scenes.push_back(std::move(se));
      entry["status"] = "ok";
      entry["frames"] = frame_ids.size();
      entry["groups"] = group_json;
    } catch (const std::exception& e) {
      failed = true;
      entry["status"] = "failed";
      entry["error"] = error_json(e);
    }
    scenes.push_back(entry);
  }
  write_manifest(bundle);
  fs::create_directories(bundle.class_dir());
  {
    std::ofstream names(bundle.class_dir() / files::kClassNames, std::ios::trunc);
    for (Label c = 1; c <= kMaxNyu40Label; ++c) {
      const auto it = mapping.names.find(c);
      names << (it != mapping.names.end() ? it->second : "class_" + std::to_string(c)) << "\n";
    }
  }
  RunResult r;
  r.report = {{"schema_version", kReportSchemaVersion},
              {"tool_version", kToolVersion},
              {"command", "curate"},
              {"config", config_to_json(cfg)},
              {"scenes", scenes}};
  r.any_failed = failed;
  r.report["timing"] = clock.timing();
  return r;
}

// ---------------------------------------------------------------------------
// Output

/// Report JSON without the timing block, as used for determinism checks.
inline std::string deterministic_dump(json report) {
  report.erase("timing");
  return report.dump(2);
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  os << text;
}

/// Writes `<out>` (JSON) and the CSV summary next to it with a .csv extension.
inline void write_run(const RunResult& r, const fs::path& out) {
  write_text(out, r.report.dump(2) + "\n");
  if (!r.csv.empty()) {
    fs::path csv = out;
    csv.replace_extension(".csv");
    write_text(csv, r.csv);
  }
}

}  // namespace maploc
