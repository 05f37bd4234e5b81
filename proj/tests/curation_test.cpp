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
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "maploc/curation.hpp"
#include "support/synthetic.hpp"
#include "support/test_util.hpp"

namespace maploc {
namespace {

constexpr double kPi = std::numbers::pi;

// A camera at x = offset looking down +z at a frontal wall 2 m away; the
// 64-pixel-wide image spans 4 m of wall.
CameraFrame wall_frame(const std::string& id, double offset) {
  CameraFrame f;
  f.id = id;
  f.depth = DepthGrid(48, 64, 2.0f);
  f.intrinsics = {32.0, 32.0, 32.0, 24.0};
  f.pose.translation = Vec3(offset, 0.0, 0.0);
  return f;
}

std::vector<CameraFrame> scene_frames(std::uint64_t seed, std::size_t n) {
  const auto room = synth::make_room(seed);
  std::vector<CameraFrame> frames;
  for (const auto& v : synth::render_scene(room, n, seed, 24, 32))
    frames.push_back({v.id, v.depth, v.pose, v.intrinsics});
  return frames;
}

TEST(Covisibility, IdenticalFramesFullyOverlap) {
  const auto a = wall_frame("a", 0.0);
  EXPECT_EQ(covisibility(a, a), 1.0);
  for (const auto& f : scene_frames(3, 3)) EXPECT_EQ(covisibility(f, f), 1.0);
}

TEST(Covisibility, BackToBackFramesDoNotOverlap) {
  const auto a = wall_frame("a", 0.0);
  auto b = a;
  b.pose.rotation = rotation_from_axis_angle(Vec3::UnitY(), kPi);
  EXPECT_EQ(covisibility(a, b), 0.0);
  EXPECT_EQ(covisibility(b, a), 0.0);
}

TEST(Covisibility, HalfShiftedFrameSeesHalf) {
  const auto a = wall_frame("a", 0.0);
  const auto b = wall_frame("b", 2.0);
  EXPECT_NEAR(covisibility(a, b), 0.5, 0.02);
  EXPECT_NEAR(covisibility(b, a), 0.5, 0.02);
  EXPECT_NEAR(overlap_matrix({a, b})[0][1], 0.5, 0.02);
}

TEST(Covisibility, DepthDisagreementIsNotCovisible) {
  const auto a = wall_frame("a", 0.0);
  auto b = a;
  b.depth = DepthGrid(48, 64, 1.0f);  // occluder in front of the wall
  EXPECT_EQ(covisibility(a, b), 0.0);
  EXPECT_ERRC(covisibility({"z", DepthGrid(2, 2, 0.0f), {}, {1, 1, 1, 1}}, a), Errc::NoValidPixels);
}

TEST(CameraDelta, Examples) {
  RigidTransform b;
  b.translation = Vec3(3, 4, 0);
  b.rotation = rotation_from_axis_angle(Vec3(1, 1, 0), kPi / 6);
  const auto d = camera_delta(RigidTransform::identity(), b);
  EXPECT_NEAR(d.d_translation, 5.0, 1e-12);
  EXPECT_NEAR(d.d_rotation, kPi / 6, 1e-12);
}

TEST(CameraDelta, SymmetricAndMatchesGeodesic) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const RigidTransform a = test::random_rigid(rng, 3.0), b = test::random_rigid(rng, 3.0);
    const auto ab = camera_delta(a, b), ba = camera_delta(b, a);
    EXPECT_NEAR(ab.d_translation, ba.d_translation, 1e-12);
    EXPECT_NEAR(ab.d_rotation, ba.d_rotation, 1e-9);
    EXPECT_NEAR(ab.d_rotation, rotation_geodesic(a.rotation, b.rotation), 1e-9);
  }
}

TEST(BuildGroups, TwoFrameScene) {
  GroupingOptions opts;
  opts.sizes = {2};
  opts.groups_per_size = 3;
  opts.min_overlap = 0.3;
  const auto groups = build_groups("s", {wall_frame("b", 0.5), wall_frame("a", 0.0)}, opts);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].frames, (std::vector<std::string>{"a", "b"}));
  EXPECT_GT(groups[0].overlap[0][1], 0.3);
  EXPECT_EQ(groups[0].overlap[0][1], groups[0].overlap[1][0]);
}

TEST(BuildGroups, NoFeasibleGroup) {
  GroupingOptions opts;
  opts.sizes = {2};
  opts.min_overlap = 0.3;
  EXPECT_ERRC(build_groups("s", {wall_frame("a", 0.0), wall_frame("b", 10.0)}, opts),
              Errc::NoFeasibleGroup);
  EXPECT_ERRC(build_groups("s", {wall_frame("a", 0.0)}, opts), Errc::InsufficientFrames);
  opts.sizes = {5};
  EXPECT_ERRC(build_groups("s", {wall_frame("a", 0.0), wall_frame("b", 0.1)}, opts),
              Errc::InvalidArgument);
}

TEST(BuildGroups, GroupsSatisfyOverlapAndSize) {
  GroupingOptions opts;
  opts.min_overlap = 0.2;
  const auto groups = build_groups("s", scene_frames(5, 10), opts);
  ASSERT_FALSE(groups.empty());
  for (const auto& g : groups) {
    EXPECT_GE(g.frames.size(), 2u);
    EXPECT_LE(g.frames.size(), 4u);
    EXPECT_TRUE(std::is_sorted(g.frames.begin(), g.frames.end()));
    // Every member overlaps at least one other member.
    for (std::size_t a = 0; a < g.frames.size(); ++a) {
      bool linked = false;
      for (std::size_t b = 0; b < g.frames.size(); ++b)
        if (a != b && g.overlap[a][b] >= opts.min_overlap) linked = true;
      EXPECT_TRUE(linked);
    }
  }
}

TEST(BuildGroups, DeterministicAndOrderIndependent) {
  GroupingOptions opts;
  opts.min_overlap = 0.2;
  opts.seed = 42;
  auto frames = scene_frames(6, 10);
  const auto a = build_groups("s", frames, opts);
  const auto b = build_groups("s", frames, opts);
  std::mt19937_64 rng(9);
  std::shuffle(frames.begin(), frames.end(), rng);
  opts.threads = 4;
  const auto c = build_groups("s", frames, opts);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].frames, b[i].frames);
    EXPECT_EQ(a[i].frames, c[i].frames);
    EXPECT_EQ(a[i].overlap, c[i].overlap);
  }
}

TEST(MapLabels, Example) {
  LabelMapping m;
  m.add(5, 3);
  m.add(7, 40);
  const Grid<std::uint16_t> raw(1, 3, std::vector<std::uint16_t>{5, 7, 9});
  EXPECT_EQ(map_labels(raw, m).data, (std::vector<Label>{3, 40, 0}));
  EXPECT_ERRC(m.add(8, 41), Errc::InvalidArgument);
  EXPECT_ERRC(m.add(5, 4), Errc::InvalidArgument);
}

TEST(LabelMapping, ParsesTsv) {
  std::istringstream is(
      "id\traw_category\tnyu40id\tnyu40class\n"
      "1\twall\t1\twall\r\n"
      "\n"
      "2\tchair\t5\tchair\n"
      "3\tthing\t0\tvoid\n");
  const auto m = LabelMapping::parse_tsv(is);
  EXPECT_EQ(m.lookup(1), 1);
  EXPECT_EQ(m.lookup(2), 5);
  EXPECT_EQ(m.lookup(3), 0);
  EXPECT_EQ(m.lookup(99), 0);
  EXPECT_EQ(m.names.at(5), "chair");
  EXPECT_FALSE(m.names.contains(0));

  std::istringstream bad("1\twall\tx\twall\n");
  EXPECT_ERRC(LabelMapping::parse_tsv(bad), Errc::InvalidArgument);
  std::istringstream range("1\twall\t41\twall\n");
  EXPECT_ERRC(LabelMapping::parse_tsv(range), Errc::InvalidArgument);
  EXPECT_ERRC(LabelMapping::from_tsv("/nonexistent/map.tsv"), Errc::Io);
}

}  // namespace
}  // namespace maploc
