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

// Scene/group/frame bundle layout.
//
//   <root>/manifest.json
//   <root>/classes/embeddings.mltf      L x D f32, unit rows (optional)
//   <root>/classes/names.txt            line i names embedding row i
//   <root>/<scene>/<group>/<frame>/
//       gt_depth.mltf        H x W f32, meters, 0 = invalid
//       gt_pose.mltf         4 x 4 f64 camera-to-world
//       intrinsics.mltf      3 x 3 f64
//       gt_labels.mltf       H x W u16, 0 = void
//       gt_instances.mltf    H x W u16 (optional)
//       pred_pointmap.mltf   H x W x 3 f32, group reference camera frame
//       pred_conf.mltf       H x W f32 (optional)
//       pred_feat.mltf       H x W x D f32 (optional)
//       pred_depth.mltf      H x W f32 (optional)
//       pred_labels.mltf     H x W u16 (optional, takes precedence over pred_feat)
//       pred_pointmap_local.mltf  H x W x 3 f32, the frame's own camera (optional)
//
// The manifest is one JSON document:
//   {"schema_version": 1,
//    "scenes": [{"id": "...", "groups": [{"id": "...", "frames": ["...", ...]}]}]}

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "maploc/error.hpp"
#include "maploc/geometry.hpp"
#include "maploc/metrics.hpp"
#include "maploc/tensor.hpp"

namespace maploc {

namespace fs = std::filesystem;

namespace files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kClassDir = "classes";
inline constexpr const char* kClassEmbeddings = "embeddings.mltf";
inline constexpr const char* kClassNames = "names.txt";
inline constexpr const char* kGtDepth = "gt_depth.mltf";
inline constexpr const char* kGtPose = "gt_pose.mltf";
inline constexpr const char* kIntrinsics = "intrinsics.mltf";
inline constexpr const char* kGtLabels = "gt_labels.mltf";
inline constexpr const char* kGtInstances = "gt_instances.mltf";
inline constexpr const char* kPredPointmap = "pred_pointmap.mltf";
inline constexpr const char* kPredConf = "pred_conf.mltf";
inline constexpr const char* kPredFeat = "pred_feat.mltf";
inline constexpr const char* kPredDepth = "pred_depth.mltf";
inline constexpr const char* kPredLabels = "pred_labels.mltf";
inline constexpr const char* kPredPointmapLocal = "pred_pointmap_local.mltf";
inline constexpr const char* kMandatory[] = {kGtDepth, kGtPose, kIntrinsics, kGtLabels};
}  // namespace files

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr std::size_t kMinGroupSize = 2;
inline constexpr std::size_t kMaxGroupSize = 4;

struct GroupEntry {
  std::string id;
  std::vector<std::string> frames;
};

struct SceneEntry {
  std::string id;
  std::vector<GroupEntry> groups;
};

struct Bundle {
  fs::path root;
  std::vector<SceneEntry> scenes;

  fs::path frame_dir(const std::string& scene, const std::string& group,
                     const std::string& frame) const {
    return root / scene / group / frame;
  }
  fs::path class_dir() const { return root / files::kClassDir; }

  std::size_t group_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.groups.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Manifest

inline nlohmann::json manifest_json(const Bundle& b) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : b.scenes) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : s.groups) groups.push_back({{"id", g.id}, {"frames", g.frames}});
    scenes.push_back({{"id", s.id}, {"groups", groups}});
  }
  return {{"schema_version", kManifestSchemaVersion}, {"scenes", scenes}};
}

inline void write_manifest(const Bundle& b) {
  fs::create_directories(b.root);
  std::ofstream os(b.root / files::kManifest, std::ios::trunc);
  if (!os) throw Error(Errc::Io, "cannot write manifest under " + b.root.string());
  os << manifest_json(b).dump(2) << "\n";
}

namespace detail {

inline void check_id(const std::string& id, const std::string& what) {
  if (id.empty() || id == "." || id == ".." || id.find('/') != std::string::npos ||
      id.find('\\') != std::string::npos)
    throw Error(Errc::InvalidManifest, "invalid " + what + " id \"" + id + "\"");
}

inline std::string json_string(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string())
    throw Error(Errc::InvalidManifest, ctx + ": missing string field \"" + key + "\"");
  return j.at(key).get<std::string>();
}

}  // namespace detail

/// Reads and validates `<root>/manifest.json`. Every group must hold 2-4
/// frames and every frame its mandatory ground-truth files; all violations
/// of a kind are reported together.
inline Bundle load_bundle(const fs::path& root) {
  const fs::path manifest_path = root / files::kManifest;
  if (!fs::is_regular_file(manifest_path))
    throw Error(Errc::MissingManifest, "no manifest at " + manifest_path.string());
  nlohmann::json j;
  {
    std::ifstream is(manifest_path);
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidManifest, manifest_path.string() + ": " + e.what());
    }
  }
  if (!j.is_object()) throw Error(Errc::InvalidManifest, "manifest must be a JSON object");
  if (j.contains("schema_version") &&
      (!j["schema_version"].is_number_integer() || j["schema_version"] != kManifestSchemaVersion))
    throw Error(Errc::InvalidManifest, "unsupported manifest schema_version");

  Bundle b;
  b.root = root;
  if (j.contains("scenes")) {
    if (!j["scenes"].is_array()) throw Error(Errc::InvalidManifest, "\"scenes\" must be an array");
    std::set<std::string> scene_ids;
    for (const auto& sj : j["scenes"]) {
      SceneEntry s;
      s.id = detail::json_string(sj, "id", "scene");
      detail::check_id(s.id, "scene");
      if (!scene_ids.insert(s.id).second)
        throw Error(Errc::InvalidManifest, "duplicate scene id " + s.id);
      std::set<std::string> group_ids;
      if (sj.contains("groups")) {
        if (!sj["groups"].is_array())
          throw Error(Errc::InvalidManifest, s.id + ": \"groups\" must be an array");
        for (const auto& gj : sj["groups"]) {
          GroupEntry g;
          g.id = detail::json_string(gj, "id", s.id + " group");
          detail::check_id(g.id, "group");
          if (!group_ids.insert(g.id).second)
            throw Error(Errc::InvalidManifest, "duplicate group id " + s.id + "/" + g.id);
          if (!gj.contains("frames") || !gj["frames"].is_array())
            throw Error(Errc::InvalidManifest, s.id + "/" + g.id + ": missing frames array");
          std::set<std::string> frame_ids;
          for (const auto& fj : gj["frames"]) {
            if (!fj.is_string())
              throw Error(Errc::InvalidManifest, s.id + "/" + g.id + ": frame ids must be strings");
            g.frames.push_back(fj.get<std::string>());
            detail::check_id(g.frames.back(), "frame");
            if (!frame_ids.insert(g.frames.back()).second)
              throw Error(Errc::InvalidManifest, "duplicate frame id in " + s.id + "/" + g.id);
          }
          s.groups.push_back(std::move(g));
        }
      }
      b.scenes.push_back(std::move(s));
    }
  }

  std::vector<std::string> bad_groups;
  for (const auto& s : b.scenes)
    for (const auto& g : s.groups)
      if (g.frames.size() < kMinGroupSize || g.frames.size() > kMaxGroupSize)
        bad_groups.push_back(s.id + "/" + g.id + " (" + std::to_string(g.frames.size()) +
                             " frames)");
  if (!bad_groups.empty()) {
    std::sort(bad_groups.begin(), bad_groups.end());
    throw Error(Errc::GroupSizeOutOfRange,
                std::to_string(bad_groups.size()) + " group(s) outside 2-4 frames: " +
                    bad_groups.front(),
                bad_groups);
  }

  std::vector<std::string> missing;
  for (const auto& s : b.scenes)
    for (const auto& g : s.groups)
      for (const auto& f : g.frames)
        for (const char* name : files::kMandatory) {
          const fs::path p = b.frame_dir(s.id, g.id, f) / name;
          if (!fs::is_regular_file(p)) missing.push_back(p.string());
        }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw Error(Errc::MissingFile,
                std::to_string(missing.size()) + " missing file(s): " + missing.front(),
                missing);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Tensor <-> domain conversions

namespace detail {

inline void expect_shape(const Tensor& t, std::vector<std::uint64_t> shape, const char* what) {
  if (t.shape != shape) {
    std::string got;
    for (auto d : t.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
    throw Error(Errc::ShapeMismatch, std::string(what) + " has shape " + got);
  }
}

}  // namespace detail

template <TensorElement T>
Grid<T> grid_from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw Error(Errc::ShapeMismatch, "expected an H x W tensor");
  return Grid<T>(t.shape[0], t.shape[1], t.values<T>());
}

template <TensorElement T>
Tensor grid_to_tensor(const Grid<T>& g) {
  return Tensor::from<T>({g.height, g.width}, g.data);
}

/// 4x4 camera-to-world pose. Rotation blocks within 1e-4 of orthonormal
/// (typical of single-precision exports) are projected onto SO(3).
inline RigidTransform pose_from_tensor(const Tensor& t) {
  detail::expect_shape(t, {4, 4}, "pose");
  const auto v = t.values<double>();
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[r * 4 + c];
  Mat3 rot = m.topLeftCorner<3, 3>();
  if (!is_rotation(rot, 1e-4)) throw Error(Errc::NonOrthonormal, "pose rotation is not orthonormal");
  if (!is_rotation(rot, 1e-12)) {
    Eigen::JacobiSVD<Mat3> svd(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot = svd.matrixU() * svd.matrixV().transpose();
  }
  return {rot, m.topRightCorner<3, 1>()};
}

inline Tensor pose_to_tensor(const RigidTransform& p) {
  const Mat4 m = p.matrix();
  std::vector<double> v(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v[r * 4 + c] = m(r, c);
  return Tensor::from<double>({4, 4}, v);
}

inline Intrinsics intrinsics_from_tensor(const Tensor& t) {
  detail::expect_shape(t, {3, 3}, "intrinsics");
  const auto v = t.values<double>();
  Mat3 k;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) k(r, c) = v[r * 3 + c];
  return Intrinsics::from_matrix(k);
}

inline Tensor intrinsics_to_tensor(const Intrinsics& k) {
  const Mat3 m = k.matrix();
  std::vector<double> v(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[r * 3 + c] = m(r, c);
  return Tensor::from<double>({3, 3}, v);
}

inline Pointmap pointmap_from_tensor(const Tensor& t, std::string frame = {}) {
  if (t.rank() != 3 || t.shape[2] != 3)
    throw Error(Errc::ShapeMismatch, "pointmap must be H x W x 3");
  const auto v = t.values<float>();
  Pointmap pm(t.shape[0], t.shape[1], std::move(frame));
  for (std::size_t i = 0; i < pm.size(); ++i)
    pm.points[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return pm;
}

inline Tensor pointmap_to_tensor(const Pointmap& pm) {
  pm.validate();
  std::vector<float> v(pm.size() * 3);
  for (std::size_t i = 0; i < pm.size(); ++i)
    for (int k = 0; k < 3; ++k) v[3 * i + k] = static_cast<float>(pm.points[i][k]);
  return Tensor::from<float>({pm.height, pm.width, 3}, v);
}

inline FeatureGrid features_from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw Error(Errc::ShapeMismatch, "features must be H x W x D");
  return {t.shape[0], t.shape[1], t.shape[2], t.values<float>()};
}

inline Tensor features_to_tensor(const FeatureGrid& f) {
  f.validate();
  return Tensor::from<float>({f.height, f.width, f.dim}, f.data);
}

// ---------------------------------------------------------------------------
// Frame loading

struct FrameGroundTruth {
  std::string id;
  DepthGrid depth;
  RigidTransform pose;
  Intrinsics intrinsics;
  LabelGrid labels;
  std::optional<Grid<std::uint16_t>> instances;
};

struct FramePrediction {
  std::optional<Pointmap> pointmap;        // reference camera frame
  std::optional<Pointmap> pointmap_local;  // own camera frame
  std::optional<DepthGrid> depth;
  std::optional<FeatureGrid> features;
  std::optional<LabelGrid> labels;
};

inline FrameGroundTruth load_frame_gt(const Bundle& b, const std::string& scene,
                                      const std::string& group, const std::string& frame) {
  const fs::path dir = b.frame_dir(scene, group, frame);
  FrameGroundTruth f;
  f.id = frame;
  f.depth = grid_from_tensor<float>(read_tensor(dir / files::kGtDepth));
  f.pose = pose_from_tensor(read_tensor(dir / files::kGtPose));
  f.intrinsics = intrinsics_from_tensor(read_tensor(dir / files::kIntrinsics));
  f.labels = grid_from_tensor<Label>(read_tensor(dir / files::kGtLabels));
  if (!f.labels.same_dims(f.depth.height, f.depth.width))
    throw Error(Errc::DimensionMismatch, dir.string() + ": labels do not match depth");
  if (fs::is_regular_file(dir / files::kGtInstances)) {
    f.instances = grid_from_tensor<std::uint16_t>(read_tensor(dir / files::kGtInstances));
    if (!f.instances->same_dims(f.depth.height, f.depth.width))
      throw Error(Errc::DimensionMismatch, dir.string() + ": instances do not match depth");
  }
  return f;
}

inline FramePrediction load_frame_prediction(const Bundle& b, const std::string& scene,
                                             const std::string& group, const std::string& frame) {
  const fs::path dir = b.frame_dir(scene, group, frame);
  FramePrediction p;
  auto present = [&](const char* name) { return fs::is_regular_file(dir / name); };
  if (present(files::kPredPointmap)) {
    p.pointmap = pointmap_from_tensor(read_tensor(dir / files::kPredPointmap), "reference");
    if (present(files::kPredConf)) {
      const auto conf = grid_from_tensor<float>(read_tensor(dir / files::kPredConf));
      if (!conf.same_dims(p.pointmap->height, p.pointmap->width))
        throw Error(Errc::DimensionMismatch, dir.string() + ": confidence does not match pointmap");
      p.pointmap->confidence = std::vector<double>(conf.data.begin(), conf.data.end());
    }
  }
  if (present(files::kPredPointmapLocal))
    p.pointmap_local = pointmap_from_tensor(read_tensor(dir / files::kPredPointmapLocal), frame);
  if (present(files::kPredDepth))
    p.depth = grid_from_tensor<float>(read_tensor(dir / files::kPredDepth));
  if (present(files::kPredFeat)) p.features = features_from_tensor(read_tensor(dir / files::kPredFeat));
  if (present(files::kPredLabels))
    p.labels = grid_from_tensor<Label>(read_tensor(dir / files::kPredLabels));
  return p;
}

inline void write_frame_gt(const Bundle& b, const std::string& scene, const std::string& group,
                           const FrameGroundTruth& f) {
  const fs::path dir = b.frame_dir(scene, group, f.id);
  fs::create_directories(dir);
  write_tensor(dir / files::kGtDepth, grid_to_tensor(f.depth));
  write_tensor(dir / files::kGtPose, pose_to_tensor(f.pose));
  write_tensor(dir / files::kIntrinsics, intrinsics_to_tensor(f.intrinsics));
  write_tensor(dir / files::kGtLabels, grid_to_tensor(f.labels));
  if (f.instances) write_tensor(dir / files::kGtInstances, grid_to_tensor(*f.instances));
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline bool has_class_embeddings(const Bundle& b) {
  return fs::is_regular_file(b.class_dir() / files::kClassEmbeddings);
}

inline ClassEmbeddings load_class_embeddings(const Bundle& b) {
  const fs::path emb = b.class_dir() / files::kClassEmbeddings;
  if (!fs::is_regular_file(emb)) throw Error(Errc::MissingFile, emb.string(), {emb.string()});
  std::vector<std::string> names;
  const fs::path names_path = b.class_dir() / files::kClassNames;
  if (fs::is_regular_file(names_path)) names = read_lines(names_path);
  return ClassEmbeddings::from_tensor(read_tensor(emb), std::move(names));
}

}  // namespace maploc
