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

#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "maploc/bundle.hpp"
#include "support/synthetic.hpp"
#include "support/test_util.hpp"

namespace maploc {
namespace {

void write_json(const fs::path& p, const nlohmann::json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump();
}

FrameGroundTruth tiny_frame(const std::string& id) {
  FrameGroundTruth f;
  f.id = id;
  f.depth = DepthGrid(2, 3, 1.5f);
  f.pose = RigidTransform::identity();
  f.intrinsics = {10, 10, 1, 1};
  f.labels = LabelGrid(2, 3, 4);
  return f;
}

TEST(Bundle, EmptyManifestHasNoScenes) {
  test::TempDir dir;
  write_json(dir / "manifest.json", nlohmann::json::object());
  EXPECT_TRUE(load_bundle(dir.path()).scenes.empty());
  write_json(dir / "manifest.json", {{"schema_version", 1}, {"scenes", nlohmann::json::array()}});
  EXPECT_EQ(load_bundle(dir.path()).group_count(), 0u);
}

TEST(Bundle, MissingManifest) {
  test::TempDir dir;
  EXPECT_ERRC(load_bundle(dir.path()), Errc::MissingManifest);
}

TEST(Bundle, MalformedManifest) {
  test::TempDir dir;
  std::ofstream(dir / "manifest.json") << "{not json";
  EXPECT_ERRC(load_bundle(dir.path()), Errc::InvalidManifest);
  write_json(dir / "manifest.json", {{"scenes", {{{"id", "../x"}, {"groups", nlohmann::json::array()}}}}});
  EXPECT_ERRC(load_bundle(dir.path()), Errc::InvalidManifest);
  write_json(dir / "manifest.json", {{"schema_version", 2}});
  EXPECT_ERRC(load_bundle(dir.path()), Errc::InvalidManifest);
}

TEST(Bundle, FiveFrameGroupIsOutOfRange) {
  test::TempDir dir;
  write_json(dir / "manifest.json",
             {{"scenes",
               {{{"id", "s"},
                 {"groups", {{{"id", "g"}, {"frames", {"a", "b", "c", "d", "e"}}}}}}}}});
  EXPECT_ERRC(load_bundle(dir.path()), Errc::GroupSizeOutOfRange);
  write_json(dir / "manifest.json",
             {{"scenes", {{{"id", "s"}, {"groups", {{{"id", "g"}, {"frames", {"a"}}}}}}}}});
  EXPECT_ERRC(load_bundle(dir.path()), Errc::GroupSizeOutOfRange);
}

TEST(Bundle, FixtureCountsAndRoundTrip) {
  test::TempDir dir;
  Bundle b;
  b.root = dir.path();
  b.scenes.push_back({"scene0", {{"g0", {"a", "b"}}, {"g1", {"c", "d"}}}});
  for (const auto& g : b.scenes[0].groups)
    for (const auto& f : g.frames) write_frame_gt(b, "scene0", g.id, tiny_frame(f));
  write_manifest(b);
  const Bundle back = load_bundle(dir.path());
  ASSERT_EQ(back.scenes.size(), 1u);
  EXPECT_EQ(back.scenes[0].groups.size(), 2u);
  for (const auto& g : back.scenes[0].groups) EXPECT_EQ(g.frames.size(), 2u);
  const auto f = load_frame_gt(back, "scene0", "g1", "d");
  EXPECT_EQ(f.depth, tiny_frame("d").depth);
  EXPECT_EQ(f.labels, tiny_frame("d").labels);
  EXPECT_DOUBLE_EQ(f.intrinsics.fx, 10.0);
}

TEST(Bundle, MissingFilesAreAllReported) {
  test::TempDir dir;
  Bundle b;
  b.root = dir.path();
  b.scenes.push_back({"s", {{"g", {"a", "b"}}}});
  write_frame_gt(b, "s", "g", tiny_frame("a"));
  write_manifest(b);
  fs::remove(b.frame_dir("s", "g", "a") / files::kGtPose);
  try {
    load_bundle(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingFile);
    EXPECT_EQ(e.details().size(), 5u);  // a/gt_pose + four files of b
    EXPECT_TRUE(std::is_sorted(e.details().begin(), e.details().end()));
  }
}

TEST(Bundle, VerdictIsIndependentOfManifestOrder) {
  test::TempDir dir;
  Bundle b;
  b.root = dir.path();
  b.scenes.push_back({"s0", {{"g0", {"a", "b"}}, {"g1", {"a", "b", "c"}}}});
  b.scenes.push_back({"s1", {{"g0", {"x", "y"}}}});
  for (const auto& s : b.scenes)
    for (const auto& g : s.groups)
      for (const auto& f : g.frames) write_frame_gt(b, s.id, g.id, tiny_frame(f));
  std::mt19937_64 rng(9);
  for (int broken = 0; broken < 2; ++broken) {
    if (broken) fs::remove(b.frame_dir("s1", "g0", "y") / files::kGtLabels);
    std::string first;
    for (int trial = 0; trial < 6; ++trial) {
      Bundle shuffled = b;
      std::shuffle(shuffled.scenes.begin(), shuffled.scenes.end(), rng);
      for (auto& s : shuffled.scenes) {
        std::shuffle(s.groups.begin(), s.groups.end(), rng);
        for (auto& g : s.groups) std::shuffle(g.frames.begin(), g.frames.end(), rng);
      }
      write_manifest(shuffled);
      std::string verdict = "ok";
      try {
        load_bundle(dir.path());
      } catch (const Error& e) {
        verdict = std::string(to_string(e.code())) + ":" + std::to_string(e.details().size()) +
                  ":" + e.details().front();
      }
      if (trial == 0) first = verdict;
      EXPECT_EQ(verdict, first);
    }
    EXPECT_EQ(first == "ok", broken == 0);
  }
}

TEST(Bundle, PoseAndIntrinsicsConversions) {
  std::mt19937_64 rng(5);
  const RigidTransform p = test::random_rigid(rng, 3.0);
  const RigidTransform back = pose_from_tensor(pose_to_tensor(p));
  EXPECT_TRUE(back.rotation.isApprox(p.rotation, 1e-12));
  EXPECT_TRUE(back.translation.isApprox(p.translation, 1e-12));

  // Single-precision round-off is projected back onto SO(3).
  Mat4 m = p.matrix();
  std::vector<double> v(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v[r * 4 + c] = static_cast<float>(m(r, c));
  EXPECT_TRUE(is_rotation(pose_from_tensor(Tensor::from<double>({4, 4}, v)).rotation, 1e-12));

  v[0] += 0.1;
  EXPECT_ERRC(pose_from_tensor(Tensor::from<double>({4, 4}, v)), Errc::NonOrthonormal);
  EXPECT_ERRC(pose_from_tensor(Tensor::from<double>({3, 3}, std::vector<double>(9))),
              Errc::ShapeMismatch);

  const Intrinsics k{500, 510, 320, 240};
  const Intrinsics kb = intrinsics_from_tensor(intrinsics_to_tensor(k));
  EXPECT_EQ(kb.fx, 500);
  EXPECT_EQ(kb.fy, 510);
  EXPECT_EQ(kb.cx, 320);
  EXPECT_EQ(kb.cy, 240);
}

TEST(Bundle, PredictionFilesLoad) {
  test::TempDir dir;
  synth::FixtureOptions opts;
  opts.sizes = {2};
  opts.groups_per_size = 1;
  opts.height = 12;
  opts.width = 16;
  opts.frames_per_scene = 3;
  opts.pred_labels = synth::PredLabels::Features;
  const Bundle b = synth::write_synthetic_bundle(dir.path(), opts);
  const Bundle back = load_bundle(dir.path());
  ASSERT_EQ(back.group_count(), 1u);
  const auto& g = back.scenes[0].groups[0];
  const auto p = load_frame_prediction(back, back.scenes[0].id, g.id, g.frames[1]);
  ASSERT_TRUE(p.pointmap && p.pointmap_local && p.depth && p.features);
  EXPECT_FALSE(p.labels);
  EXPECT_TRUE(p.pointmap->confidence.has_value());
  EXPECT_EQ(p.features->dim, synth::kEmbeddingDim);
  ASSERT_TRUE(has_class_embeddings(back));
  const auto classes = load_class_embeddings(back);
  EXPECT_EQ(classes.size(), synth::kEmbeddingClasses);
  EXPECT_EQ(classes.names.front(), "class_1");
}

TEST(Bundle, ClassNamesMustMatchRows) {
  test::TempDir dir;
  Bundle b;
  b.root = dir.path();
  write_manifest(b);
  auto e = synth::make_class_embeddings();
  e.names.pop_back();
  fs::create_directories(b.class_dir());
  write_tensor(b.class_dir() / files::kClassEmbeddings, Tensor::from<float>({e.size(), e.dim}, e.vectors));
  std::ofstream os(b.class_dir() / files::kClassNames);
  for (const auto& n : e.names) os << n << "\n";
  os.close();
  EXPECT_ERRC(load_class_embeddings(b), Errc::LengthMismatch);
}

}  // namespace
}  // namespace maploc
