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

// Camera and pointmap math. Poses are camera-to-world everywhere: a pose
// (R, t) maps a point x in camera coordinates to R*x + t in world coordinates.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "maploc/error.hpp"

namespace maploc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

using Label = std::uint16_t;
inline constexpr Label kVoidLabel = 0;

/// Row-major H x W grid of values.
template <class T>
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{})
      : height(h), width(w), data(h * w, fill) {}
  Grid(std::size_t h, std::size_t w, std::vector<T> values)
      : height(h), width(w), data(std::move(values)) {
    if (data.size() != h * w)
      throw Error(Errc::DimensionMismatch, "grid data does not match H x W");
  }

  std::size_t size() const { return data.size(); }
  T& operator()(std::size_t row, std::size_t col) { return data[row * width + col]; }
  const T& operator()(std::size_t row, std::size_t col) const {
    return data[row * width + col];
  }
  bool same_dims(std::size_t h, std::size_t w) const { return height == h && width == w; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using DepthGrid = Grid<float>;
using LabelGrid = Grid<Label>;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw Error(Errc::InvalidArgument, "focal lengths must be positive");
  }

  static Intrinsics from_matrix(const Mat3& k) {
    Intrinsics out{k(0, 0), k(1, 1), k(0, 2), k(1, 2)};
    out.validate();
    return out;
  }

  Mat3 matrix() const {
    Mat3 k = Mat3::Identity();
    k(0, 0) = fx;
    k(1, 1) = fy;
    k(0, 2) = cx;
    k(1, 2) = cy;
    return k;
  }
};

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  if (!r.allFinite()) return false;
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

inline Mat3 rotation_from_axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Axis-angle vector (axis * angle) of a rotation matrix.
inline Vec3 rotation_log(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  /// Builds from a 4x4 homogeneous matrix, checking the rotation block.
  static RigidTransform from_matrix(const Mat4& m, double tol = 1e-9) {
    RigidTransform t{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
    if (!is_rotation(t.rotation, tol))
      throw Error(Errc::NonOrthonormal, "pose rotation block is not a rotation");
    return t;
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  /// (this * other)(x) == this(other(x))
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
};

struct SimilarityTransform {
  double scale = 1.0;
  RigidTransform rigid;

  static SimilarityTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const {
    return scale * (rigid.rotation * x) + rigid.translation;
  }

  SimilarityTransform inverse() const {
    const Mat3 rt = rigid.rotation.transpose();
    return {1.0 / scale, {rt, -(rt * rigid.translation) / scale}};
  }
};

/// compose(a, b)(x) == a(b(x))
inline SimilarityTransform compose(const SimilarityTransform& a,
                                   const SimilarityTransform& b) {
  return {a.scale * b.scale,
          {a.rigid.rotation * b.rigid.rotation,
           a.scale * (a.rigid.rotation * b.rigid.translation) + a.rigid.translation}};
}

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return a * b;
}

/// Per-pixel 3D points in the coordinate system of camera `frame`, with an
/// optional per-pixel confidence (0 marks an invalid pixel).
struct Pointmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Vec3> points;
  std::optional<std::vector<double>> confidence;
  std::string frame;

  Pointmap() = default;
  Pointmap(std::size_t h, std::size_t w, std::string frame_id = {})
      : height(h), width(w), points(h * w, Vec3::Zero()), frame(std::move(frame_id)) {}

  std::size_t size() const { return points.size(); }
  Vec3& at(std::size_t row, std::size_t col) { return points[row * width + col]; }
  const Vec3& at(std::size_t row, std::size_t col) const { return points[row * width + col]; }
  double conf(std::size_t i) const { return confidence ? (*confidence)[i] : 1.0; }

  void validate() const {
    if (points.size() != height * width)
      throw Error(Errc::DimensionMismatch, "pointmap holds " +
                                               std::to_string(points.size()) +
                                               " points for " + std::to_string(height) +
                                               "x" + std::to_string(width) + " pixels");
    if (confidence && confidence->size() != points.size())
      throw Error(Errc::DimensionMismatch, "confidence grid does not match pointmap");
  }
};

/// Flat set of labeled points (label 0 is void).
struct LabeledCloud {
  std::vector<Vec3> points;
  std::vector<Label> labels;
  std::optional<std::vector<std::uint16_t>> instances;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void validate() const {
    if (labels.size() != points.size() ||
        (instances && instances->size() != points.size()))
      throw Error(Errc::LengthMismatch, "labeled cloud lists differ in length");
  }

  void append(const LabeledCloud& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    if (instances && other.instances)
      instances->insert(instances->end(), other.instances->begin(), other.instances->end());
    else
      instances.reset();
  }
};

/// Pinhole back-projection of a depth grid. Pixel (u, v) is column u, row v;
/// depth is the camera z coordinate. Pixels with depth <= 0 or non-finite
/// depth get confidence 0 and a zero point.
inline Pointmap unproject(const DepthGrid& depth, const Intrinsics& k,
                          std::string frame = {}) {
  k.validate();
  if (depth.data.size() != depth.height * depth.width)
    throw Error(Errc::DimensionMismatch, "depth grid does not match H x W");
  Pointmap pm(depth.height, depth.width, std::move(frame));
  std::vector<double> conf(depth.size(), 0.0);
  for (std::size_t v = 0; v < depth.height; ++v) {
    for (std::size_t u = 0; u < depth.width; ++u) {
      const double d = depth(v, u);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      const std::size_t i = v * depth.width + u;
      pm.points[i] = Vec3((static_cast<double>(u) - k.cx) / k.fx * d,
                          (static_cast<double>(v) - k.cy) / k.fy * d, d);
      conf[i] = 1.0;
    }
  }
  pm.confidence = std::move(conf);
  return pm;
}

/// Pixel coordinates (u, v) of a camera-frame point; z must be positive.
inline Eigen::Vector2d project(const Intrinsics& k, const Vec3& x) {
  return {k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy};
}

inline Pointmap apply_transform(const SimilarityTransform& t, Pointmap pm) {
  for (auto& p : pm.points) p = t.apply(p);
  return pm;
}

inline LabeledCloud apply_transform(const SimilarityTransform& t, LabeledCloud cloud) {
  for (auto& p : cloud.points) p = t.apply(p);
  return cloud;
}

/// Geodesic angle between two rotations, in [0, pi].
inline double rotation_geodesic(const Mat3& ra, const Mat3& rb) {
  if (!is_rotation(ra, 1e-6) || !is_rotation(rb, 1e-6))
    throw Error(Errc::NonOrthonormal, "rotation_geodesic expects rotation matrices");
  // atan2 of the sine and cosine parts stays accurate near 0 and pi, where
  // arccos of the trace alone loses about half the digits.
  const Mat3 m = ra.transpose() * rb;
  const double c = (m.trace() - 1.0) / 2.0;
  const double s = 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)).norm();
  return std::atan2(s, c);
}

inline constexpr double kDegenerateTranslationNorm = 1e-12;

/// Angle between translation directions, in [0, pi].
inline double translation_angle(const Vec3& ta, const Vec3& tb) {
  const double na = ta.norm();
  const double nb = tb.norm();
  if (na < kDegenerateTranslationNorm || nb < kDegenerateTranslationNorm)
    throw Error(Errc::DegenerateTranslation, "translation norm below 1e-12");
  return std::acos(std::clamp(ta.dot(tb) / (na * nb), -1.0, 1.0));
}

/// Pose of camera b expressed in the frame of camera a (both camera-to-world):
/// R = Ra^T Rb, t = Ra^T (tb - ta).
inline RigidTransform relative_pose(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 rat = a.rotation.transpose();
  return {rat * b.rotation, rat * (b.translation - a.translation)};
}

/// One labeled point per pixel with a non-void label and confidence that is
/// positive and >= conf_min, in raster order. Zero confidence marks an
/// invalid pixel, so such pixels are dropped even when conf_min is 0.
inline LabeledCloud flatten(const Pointmap& pm, const LabelGrid& labels, double conf_min,
                            const Grid<std::uint16_t>* instances = nullptr) {
  pm.validate();
  if (!labels.same_dims(pm.height, pm.width) || labels.data.size() != pm.size())
    throw Error(Errc::DimensionMismatch, "label grid does not match pointmap");
  if (instances && !instances->same_dims(pm.height, pm.width))
    throw Error(Errc::DimensionMismatch, "instance grid does not match pointmap");
  LabeledCloud out;
  if (instances) out.instances.emplace();
  for (std::size_t i = 0; i < pm.size(); ++i) {
    const double c = pm.conf(i);
    if (labels.data[i] == kVoidLabel || !(c > 0.0) || c < conf_min) continue;
    out.points.push_back(pm.points[i]);
    out.labels.push_back(labels.data[i]);
    if (instances) out.instances->push_back(instances->data[i]);
  }
  return out;
}

}  // namespace maploc
