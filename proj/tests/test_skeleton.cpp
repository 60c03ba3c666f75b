#include <cmath>

#include "distlift/errors.hpp"
#include "distlift/geometry.hpp"
#include "distlift/skeleton.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace distlift;
using skeleton::Pose3D;
using skeleton::Pose3DSequence;
using skeleton::SkeletonTopology;

namespace {

SkeletonTopology two_joint_chain() {
  SkeletonTopology topo;
  topo.joint_names = {"root", "tip"};
  topo.parent = {-1, 0};
  topo.bones = {{1, 0}};
  topo.neck_joint = 0;
  topo.head_top_joint = 1;
  return topo;
}

}  // namespace

TEST_SUITE("skeleton") {
  TEST_CASE("default topology is a valid 17-joint tree") {
    const auto& topo = skeleton::default_topology();
    CHECK(topo.joint_count() == 17);
    CHECK(topo.bone_count() == 16);
    CHECK_NOTHROW(topo.validate());
    CHECK(topo.parent[topo.root()] == -1);
    CHECK(topo.neck_joint >= 0);
    CHECK(topo.head_top_joint >= 0);
  }

  TEST_CASE("mirror pairs cover exactly the limb bones") {
    const auto& topo = skeleton::default_topology();
    // 16 bones minus the 4 unpaired spine/head bones leaves 12 limb bones,
    // i.e. 6 left/right pairs; no arrangement of this topology yields more.
    CHECK(topo.mirror_pairs.size() == 6);
    std::vector<int> seen;
    for (auto [l, r] : topo.mirror_pairs) {
      CHECK(l != r);
      CHECK(l >= 0);
      CHECK(r >= 0);
      CHECK(l < topo.bone_count());
      CHECK(r < topo.bone_count());
      seen.push_back(l);
      seen.push_back(r);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  }

  TEST_CASE("validation rejects structural defects") {
    auto topo = skeleton::default_topology();
    SUBCASE("cycle") {
      topo.parent[1] = 2;
      topo.parent[2] = 1;
      CHECK_THROWS_AS(topo.validate(), InvalidInputError);
    }
    SUBCASE("two roots") {
      topo.parent[5] = -1;
      CHECK_THROWS_AS(topo.validate(), InvalidInputError);
    }
    SUBCASE("mirror pair out of range") {
      topo.mirror_pairs[0].first = 99;
      CHECK_THROWS_AS(topo.validate(), InvalidInputError);
    }
    SUBCASE("bad head segment") {
      topo.head_top_joint = 99;
      CHECK_THROWS_AS(topo.validate(), InvalidInputError);
    }
  }

  TEST_CASE("bone length of a two-joint chain") {
    auto topo = two_joint_chain();
    Pose3DSequence seq;
    Pose3D pose;
    pose.joints = {{0.0, 0.0, 0.0}, {0.0, 0.0, 10.0}};
    seq.frames.push_back(pose);
    auto lengths = skeleton::bone_lengths(seq, topo);
    CHECK(lengths.frames == 1);
    CHECK(lengths.bones == 1);
    CHECK(lengths.at(0, 0) == 10.0);
  }

  TEST_CASE("coincident joints give zero lengths") {
    const auto& topo = skeleton::default_topology();
    Pose3DSequence seq;
    Pose3D pose;
    pose.joints.assign(17, {3.0, -2.0, 7.0});
    seq.frames.push_back(pose);
    auto lengths = skeleton::bone_lengths(seq, topo);
    for (int b = 0; b < lengths.bones; ++b) CHECK(lengths.at(0, b) == 0.0);
  }

  TEST_CASE("bone lengths match a brute-force recomputation") {
    const auto& topo = skeleton::default_topology();
    RngStream rng(51);
    auto seq = testutil::random_sequence(rng, 7, 17);
    auto lengths = skeleton::bone_lengths(seq, topo);
    for (int t = 0; t < 7; ++t) {
      for (int b = 0; b < topo.bone_count(); ++b) {
        const auto& child = seq.frames[t].joints[topo.bones[b].first];
        const auto& parent = seq.frames[t].joints[topo.bones[b].second];
        const double want = std::sqrt((child.x - parent.x) * (child.x - parent.x) +
                                      (child.y - parent.y) * (child.y - parent.y) +
                                      (child.z - parent.z) * (child.z - parent.z));
        CHECK(lengths.at(t, b) == doctest::Approx(want).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("bone lengths are invariant under rigid motion") {
    const auto& topo = skeleton::default_topology();
    RngStream rng(52);
    auto seq = testutil::random_sequence(rng, 5, 17);
    auto base = skeleton::bone_lengths(seq, topo);

    Mat3 R = axis_angle({0.3, -0.5, 0.81}, 1.234);
    Vec3 t{40.0, -11.0, 230.0};
    auto moved = seq;
    for (auto& frame : moved.frames)
      for (auto& j : frame.joints) j = R * j + t;
    auto rotated = skeleton::bone_lengths(moved, topo);
    for (int i = 0; i < base.frames * base.bones; ++i) {
      const double rel = std::abs(rotated.lengths[i] - base.lengths[i]) /
                         std::max(1e-30, base.lengths[i]);
      CHECK(rel <= 1e-9);
    }
  }

  TEST_CASE("bone_lengths rejects mismatched joint counts") {
    const auto& topo = skeleton::default_topology();
    Pose3DSequence seq;
    Pose3D pose;
    pose.joints.assign(5, {0.0, 0.0, 0.0});
    seq.frames.push_back(pose);
    CHECK_THROWS_AS(skeleton::bone_lengths(seq, topo), InvalidInputError);
  }

  TEST_CASE("root_relative subtracts the root joint") {
    const auto& topo = skeleton::default_topology();
    RngStream rng(53);
    auto pose = testutil::random_pose(rng, 17);
    auto rel = skeleton::root_relative(pose, topo);
    CHECK(rel.root_relative);
    const auto& root = pose.joints[topo.root()];
    for (int j = 0; j < 17; ++j) {
      CHECK(rel.joints[j].x == pose.joints[j].x - root.x);
      CHECK(rel.joints[j].y == pose.joints[j].y - root.y);
      CHECK(rel.joints[j].z == pose.joints[j].z - root.z);
    }
    CHECK(rel.joints[topo.root()].x == 0.0);
  }
}
