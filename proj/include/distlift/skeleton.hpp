#pragma once

#include <string>
#include <utility>
#include <vector>

#include "distlift/geometry.hpp"

namespace distlift::skeleton {

// Kinematic tree plus the left/right bone pairing used by the symmetry loss
// and the head segment used by PCKh.  Bones are indexed in ascending child
// joint order (bone b connects bones[b].first = child to .second = parent).
struct SkeletonTopology {
  std::vector<std::string> joint_names;
  std::vector<int> parent;                       // -1 marks the root
  std::vector<std::pair<int, int>> bones;        // (child, parent)
  std::vector<std::pair<int, int>> mirror_pairs; // (left bone, right bone)
  int neck_joint = -1;
  int head_top_joint = -1;

  int joint_count() const { return static_cast<int>(parent.size()); }
  int bone_count() const { return static_cast<int>(bones.size()); }
  int root() const;
  int joint_index(const std::string& name) const;  // -1 when absent

  // Throws InvalidInputError when any structural invariant fails
  // (multiple roots, cycles, bad bone/pair/head indices).
  void validate() const;
};

// Canonical 17-joint layout (H36M-style): pelvis root, spine-thorax-neck-
// head_top chain, left/right hip-knee-ankle legs and shoulder-elbow-wrist
// arms hanging off thorax.  Six left/right bone pairs.
const SkeletonTopology& default_topology();

struct Pose3D {
  std::vector<Vec3> joints;  // mm
  bool root_relative = false;
};

struct Pose3DSequence {
  std::vector<Pose3D> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int joint_count() const {
    return frames.empty() ? 0 : static_cast<int>(frames[0].joints.size());
  }
};

struct BoneLengths {
  int frames = 0;
  int bones = 0;
  std::vector<double> lengths;  // row-major [frame][bone], mm

  double at(int t, int b) const { return lengths[t * bones + b]; }
};

BoneLengths bone_lengths(const Pose3DSequence& seq, const SkeletonTopology& topo);

// Subtracts the root joint from every joint of every frame.
Pose3D root_relative(const Pose3D& pose, const SkeletonTopology& topo);

}  // namespace distlift::skeleton
