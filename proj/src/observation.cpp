#include "carm/observation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace carm {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "R.Ankle",    "R.Knee",     "R.Hip",   "L.Hip",   "L.Knee",
    "L.Ankle",    "R.Wrist",    "R.Elbow", "R.Shoulder", "L.Shoulder",
    "L.Elbow",    "L.Wrist",    "Neck",    "HeadTop", "Nose",
};

}  // namespace

std::string_view joint_name(JointId j) { return kJointNames[static_cast<std::size_t>(index(j))]; }

std::optional<JointId> joint_from_name(std::string_view name) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (kJointNames[static_cast<std::size_t>(i)] == name) return static_cast<JointId>(i);
  }
  return std::nullopt;
}

void FrameObservations::set(const Observation2D& obs) {
  auto it = std::lower_bound(observations_.begin(), observations_.end(), obs.joint,
                             [](const Observation2D& o, JointId j) { return o.joint < j; });
  if (it != observations_.end() && it->joint == obs.joint) {
    *it = obs;
  } else {
    observations_.insert(it, obs);
  }
}

const Observation2D* FrameObservations::find(JointId joint) const {
  auto it = std::lower_bound(observations_.begin(), observations_.end(), joint,
                             [](const Observation2D& o, JointId j) { return o.joint < j; });
  return (it != observations_.end() && it->joint == joint) ? &*it : nullptr;
}

void NoiseConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(pixel_sigma >= 0.0) || !prob(dropout_prob) || !prob(outlier_prob) ||
      !(outlier_magnitude >= 0.0) || !(occluded_offset >= 0.0)) {
    throw Error(Errc::InvalidArgument, "noise probabilities must lie in [0,1], sigma >= 0");
  }
}

Score score_model(const Vec2& exact_pixel, const Vec2& emitted_pixel, bool occluded,
                  bool in_frame) {
  double rho = std::clamp(std::exp(-(emitted_pixel - exact_pixel).norm() / kConfidenceScale), 0.0,
                          1.0);
  if (occluded) rho *= kOcclusionFactor;
  return {rho, in_frame ? 1 : 0};
}

bool is_occluded(const Camera& camera, const Vec3& point, const std::vector<Primitive>& occluders) {
  const Vec3 origin = camera.extrinsics.center();
  const Vec3 to_point = point - origin;
  const double dist = to_point.norm();
  const Ray ray{origin, to_point / dist};
  return std::any_of(occluders.begin(), occluders.end(), [&](const Primitive& p) {
    const auto t = intersect(ray, p);
    return t && *t < dist - 1e-6;
  });
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

FrameObservations synth_detect(const JointPositions& joints, const Camera& camera,
                               const std::vector<Primitive>& occluders, const NoiseConfig& noise,
                               int timestep) {
  noise.validate();
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  FrameObservations frame(camera.id, timestep);
  for (JointId j : kAllJoints) {
    // Fixed draw count per joint keeps every joint's stream independent of
    // the branch taken for earlier joints.
    const double g0 = gauss(rng);
    const double g1 = gauss(rng);
    const double u_outlier = unit(rng);
    const double u_angle = unit(rng);
    const double u_drop = unit(rng);
    const double u_occ_angle = unit(rng);

    const Vec3 pc = camera.extrinsics.to_camera(joints[static_cast<std::size_t>(index(j))]);
    if (pc.z() <= kMinDepth) continue;
    const Vec2 exact = project(camera, joints[static_cast<std::size_t>(index(j))]);
    const bool in_frame = camera.intrinsics.contains(exact);
    const bool occluded = is_occluded(camera, joints[static_cast<std::size_t>(index(j))], occluders);

    if ((!in_frame || occluded) && u_drop < noise.dropout_prob) continue;

    Vec2 offset(noise.pixel_sigma * g0, noise.pixel_sigma * g1);
    if (u_outlier < noise.outlier_prob) {
      const double angle = 2.0 * kPi * u_angle;
      offset = noise.outlier_magnitude * Vec2(std::cos(angle), std::sin(angle));
    }
    if (occluded && noise.occluded_offset > 0.0) {
      const double angle = 2.0 * kPi * u_occ_angle;
      offset += noise.occluded_offset * Vec2(std::cos(angle), std::sin(angle));
    }
    const Vec2 emitted = exact + offset;
    const Score s = score_model(exact, emitted, occluded, in_frame);
    frame.set({j, emitted, s.confidence, s.visibility});
  }
  return frame;
}

}  // namespace carm
