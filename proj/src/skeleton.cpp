#include "distlift/skeleton.hpp"

#include <algorithm>
#include <set>

#include "distlift/errors.hpp"

namespace distlift::skeleton {

int SkeletonTopology::root() const {
  for (int j = 0; j < joint_count(); ++j)
    if (parent[j] < 0) return j;
  return -1;
}

int SkeletonTopology::joint_index(const std::string& name) const {
  for (int j = 0; j < static_cast<int>(joint_names.size()); ++j)
    if (joint_names[j] == name) return j;
  return -1;
}

void SkeletonTopology::validate() const {
  const int J = joint_count();
  if (J < 2) throw InvalidInputError("topology: needs at least 2 joints");
  if (static_cast<int>(joint_names.size()) != J)
    throw InvalidInputError("topology: name/parent size mismatch");

  int roots = 0;
  for (int j = 0; j < J; ++j) {
    if (parent[j] < 0) {
      ++roots;
    } else if (parent[j] >= J) {
      throw InvalidInputError("topology: parent index out of range");
    }
  }
  if (roots != 1) throw InvalidInputError("topology: exactly one root required");

  // Every joint must reach the root without revisiting a joint.
  for (int j = 0; j < J; ++j) {
    int steps = 0;
    for (int cur = j; parent[cur] >= 0; cur = parent[cur]) {
      if (++steps > J) throw InvalidInputError("topology: cycle in parent array");
    }
  }

  if (static_cast<int>(bones.size()) != J - 1)
    throw InvalidInputError("topology: bone count must be J-1");
  for (const auto& [child, par] : bones) {
    if (child < 0 || child >= J || par < 0 || par >= J)
      throw InvalidInputError("topology: bone index out of range");
    if (parent[child] != par)
      throw InvalidInputError("topology: bone does not match parent array");
  }

  std::set<int> seen;
  for (const auto& [left, right] : mirror_pairs) {
    if (left < 0 || left >= bone_count() || right < 0 || right >= bone_count())
      throw InvalidInputError("topology: mirror pair references invalid bone");
    if (left == right)
      throw InvalidInputError("topology: mirror pair must use distinct bones");
    if (!seen.insert(left).second || !seen.insert(right).second)
      throw InvalidInputError("topology: bone appears in two mirror pairs");
  }

  if (neck_joint < 0 || neck_joint >= J || head_top_joint < 0 ||
      head_top_joint >= J || neck_joint == head_top_joint)
    throw InvalidInputError("topology: bad head segment");
}

const SkeletonTopology& default_topology() {
  static const SkeletonTopology topo = [] {
    SkeletonTopology t;
    t.joint_names = {"pelvis",                                    // 0
                     "rhip", "rknee", "rankle",                   // 1-3
                     "lhip", "lknee", "lankle",                   // 4-6
                     "spine", "thorax", "neck", "head_top",       // 7-10
                     "lshoulder", "lelbow", "lwrist",             // 11-13
                     "rshoulder", "relbow", "rwrist"};            // 14-16
    t.parent = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    for (int j = 1; j < static_cast<int>(t.parent.size()); ++j)
      t.bones.emplace_back(j, t.parent[j]);
    // Bone b = bones[b] has child joint b+1; pairs are (left, right).
    t.mirror_pairs = {
        {3, 0},    // hip
        {4, 1},    // thigh
        {5, 2},    // shin
        {10, 13},  // shoulder
        {11, 14},  // upper arm
        {12, 15},  // forearm
    };
    t.neck_joint = 9;
    t.head_top_joint = 10;
    t.validate();
    return t;
  }();
  return topo;
}

BoneLengths bone_lengths(const Pose3DSequence& seq, const SkeletonTopology& topo) {
  const int T = seq.frame_count();
  const int J = seq.joint_count();
  if (J != topo.joint_count())
    throw InvalidInputError("bone_lengths: sequence joints do not match topology");

  BoneLengths out;
  out.frames = T;
  out.bones = topo.bone_count();
  out.lengths.resize(static_cast<std::size_t>(T) * out.bones);
  for (int t = 0; t < T; ++t) {
    const auto& joints = seq.frames[t].joints;
    if (static_cast<int>(joints.size()) != J)
      throw InvalidInputError("bone_lengths: ragged sequence");
    for (int b = 0; b < out.bones; ++b) {
      const auto& [child, par] = topo.bones[b];
      out.lengths[t * out.bones + b] = norm(joints[child] - joints[par]);
    }
  }
  return out;
}

Pose3D root_relative(const Pose3D& pose, const SkeletonTopology& topo) {
  Pose3D out = pose;
  const Vec3 root = pose.joints.at(topo.root());
  for (auto& j : out.joints) j = j - root;
  out.root_relative = true;
  return out;
}

}  // namespace distlift::skeleton
