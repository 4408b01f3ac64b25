// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstdint>
#include <string>

#include "tensor/tensor.hpp"

namespace ssmflow {

enum class Transform {
  kIdentity,   // no motion
  kTranslate,  // one translation of `magnitude` for the whole scene
  kRotate30,   // one 30 degree rotation about a random axis through the origin
  kRigid,      // per object: rotation <= 30 degrees about its centroid, translation <= magnitude
};

Transform parse_transform(const std::string& name);
std::string to_string(Transform t);

struct SceneSpec {
  std::size_t objects = 3;
  std::size_t points = 256;  // total, split evenly over objects
  Transform transform = Transform::kRigid;
  double magnitude = 0.5;
  double noise = 0.0;      // isotropic Gaussian sigma added to the second frame
  double occlusion = 0.0;  // fraction of second-frame points dropped

  void validate() const;
};

struct SyntheticScene {
  Tensor source;  // P_t [N x 3]
  Tensor target;  // P_{t+1} [M x 3], M = N without occlusion
  Tensor flow;    // ground truth per source point [N x 3]
  SceneSpec spec;
  std::uint64_t seed = 0;
};

SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Writes `x y z fx fy fz` lines for the source frame. When the target is not
/// exactly source + flow, it goes to `<path>.target` as `x y z` lines.
void write_scene(const SyntheticScene& scene, const std::string& path);

/// Reads a scene file and its optional `.target` sidecar.
SyntheticScene read_scene(const std::string& path);

}  // namespace ssmflow
