#include "carm/bodyfit.hpp"

#include "carm/lsq.hpp"

#include <algorithm>
#include <cmath>

namespace carm {

namespace {

struct BoneSpec {
  JointId joint;
  JointId parent;
  Vec3 offset;
};

// Template-local offsets of each joint from its parent, in mm.
const std::array<BoneSpec, kNumJoints - 1> kBones = {{
    {JointId::HeadTop, JointId::Neck, {230, 0, 20}},
    {JointId::Nose, JointId::Neck, {150, 0, 110}},
    {JointId::RightShoulder, JointId::Neck, {-30, -180, 0}},
    {JointId::LeftShoulder, JointId::Neck, {-30, 180, 0}},
    {JointId::RightElbow, JointId::RightShoulder, {-290, -30, 0}},
    {JointId::LeftElbow, JointId::LeftShoulder, {-290, 30, 0}},
    {JointId::RightWrist, JointId::RightElbow, {-250, -10, 0}},
    {JointId::LeftWrist, JointId::LeftElbow, {-250, 10, 0}},
    {JointId::RightHip, JointId::Neck, {-520, -100, 0}},
    {JointId::LeftHip, JointId::Neck, {-520, 100, 0}},
    {JointId::RightKnee, JointId::RightHip, {-430, -10, 0}},
    {JointId::LeftKnee, JointId::LeftHip, {-430, 10, 0}},
    {JointId::RightAnkle, JointId::RightKnee, {-420, 0, -10}},
    {JointId::LeftAnkle, JointId::LeftKnee, {-420, 0, -10}},
}};

std::size_t at(JointId j) { return static_cast<std::size_t>(index(j)); }

}  // namespace

SkeletonTemplate default_template() {
  SkeletonTemplate t;
  t.order.push_back(JointId::Neck);
  t.rest_direction[at(JointId::Neck)] = Vec3::UnitX();
  for (const auto& bone : kBones) {
    t.parent[at(bone.joint)] = bone.parent;
    t.rest_direction[at(bone.joint)] = bone.offset.normalized();
    t.bone_length[at(bone.joint)] = bone.offset.norm();
    t.order.push_back(bone.joint);
  }
  return t;
}

void SkeletonTemplate::validate() const {
  if (order.size() != static_cast<std::size_t>(kNumJoints)) {
    throw Error(Errc::InvalidArgument, "skeleton order must list all 15 joints");
  }
  std::array<bool, kNumJoints> seen{};
  int roots = 0;
  for (JointId j : order) {
    const auto& p = parent[at(j)];
    if (!p) {
      ++roots;
    } else if (!seen[at(*p)]) {
      throw Error(Errc::InvalidArgument, "skeleton order visits a child before its parent");
    }
    if (seen[at(j)]) throw Error(Errc::InvalidArgument, "skeleton order repeats a joint");
    seen[at(j)] = true;
    if (p && std::abs(rest_direction[at(j)].norm() - 1.0) > 1e-9) {
      throw Error(Errc::InvalidArgument, "rest directions must be unit length");
    }
  }
  if (roots != 1) throw Error(Errc::InvalidArgument, "skeleton must have exactly one root");
}

void BodyParams::validate() const {
  auto orthonormal = [](const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6 &&
           std::abs(r.determinant() - 1.0) < 1e-6;
  };
  if (!orthonormal(root_orientation)) {
    throw Error(Errc::InvalidArgument, "root orientation is not a rotation");
  }
  for (int i = 0; i < kNumJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (bone_scales[k] < kMinBoneScale || bone_scales[k] > kMaxBoneScale) {
      throw Error(Errc::InvalidArgument, "bone scale outside [0.5, 2]");
    }
    if (!orthonormal(joint_rotations[k])) {
      throw Error(Errc::InvalidArgument, "joint rotation is not a rotation");
    }
  }
}

JointPositions forward_kinematics(const SkeletonTemplate& skeleton, const BodyParams& params) {
  JointPositions pos;
  std::array<Mat3, kNumJoints> chain;
  for (JointId j : skeleton.order) {
    const auto& parent = skeleton.parent[at(j)];
    if (!parent) {
      chain[at(j)] = params.root_orientation;
      pos[at(j)] = params.root_position;
      continue;
    }
    chain[at(j)] = chain[at(*parent)] * params.joint_rotations[at(j)];
    pos[at(j)] = pos[at(*parent)] + params.bone_scales[at(j)] * skeleton.bone_length[at(j)] *
                                        (chain[at(j)] * skeleton.rest_direction[at(j)]);
  }
  return pos;
}

namespace {

// Parameter layout: [root position 3 | root rotation delta 3 |
//                    per-joint (scale, rotation vector 3) for 15 joints].
constexpr Eigen::Index kRootSize = 6;
constexpr Eigen::Index kJointBlock = 4;
constexpr Eigen::Index kParamSize = kRootSize + kJointBlock * kNumJoints;

struct FitProblem {
  const SkeletonTemplate& skeleton;
  Mat3 base_orientation;
  std::array<double, kNumJoints> weight{};  // sqrt(rho), 0 when unused
  std::array<Vec3, kNumJoints> target{};
  double rotation_prior = 1.0;

  [[nodiscard]] int block_size() const { return 3; }

  [[nodiscard]] BodyParams params(const Eigen::VectorXd& x) const {
    BodyParams p;
    p.root_position = x.segment<3>(0);
    p.root_orientation = rotation_from_vector<double>(x.segment<3>(3)) * base_orientation;
    for (int i = 0; i < kNumJoints; ++i) {
      const Eigen::Index b = kRootSize + kJointBlock * i;
      p.bone_scales[static_cast<std::size_t>(i)] = x(b);
      p.joint_rotations[static_cast<std::size_t>(i)] =
          rotation_from_vector<double>(x.segment<3>(b + 1));
    }
    return p;
  }

  [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    const JointPositions fk = forward_kinematics(skeleton, params(x));
    Eigen::VectorXd r(3 * kNumJoints * 2);
    for (int i = 0; i < kNumJoints; ++i) {
      const auto k = static_cast<std::size_t>(i);
      r.segment<3>(3 * i) = weight[k] * (fk[k] - target[k]);
      r.segment<3>(3 * (kNumJoints + i)) =
          rotation_prior * x.segment<3>(kRootSize + kJointBlock * i + 1);
    }
    return r;
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    r = residuals(x);
    if (jac != nullptr) {
      *jac = lsq::numeric_jacobian([this](const Eigen::VectorXd& v) { return residuals(v); }, x,
                                   r.size());
    }
  }

  [[nodiscard]] Eigen::VectorXd plus(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
    Eigen::VectorXd out = x + dx;
    for (int i = 0; i < kNumJoints; ++i) {
      const Eigen::Index b = kRootSize + kJointBlock * i;
      out(b) = std::clamp(out(b), kMinBoneScale, kMaxBoneScale);
    }
    return out;
  }
};

// Rotation R minimizing sum |R a_i + t - b_i|^2 (Kabsch).
Mat3 kabsch(const std::vector<Vec3>& from, const std::vector<Vec3>& to, Vec3& translation) {
  Vec3 ca = Vec3::Zero();
  Vec3 cb = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    ca += from[i];
    cb += to[i];
  }
  ca /= static_cast<double>(from.size());
  cb /= static_cast<double>(to.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h += (from[i] - ca) * (to[i] - cb).transpose();
  const Mat3 r = nearest_rotation<double>(h.transpose());
  translation = cb - r * ca;
  return r;
}

}  // namespace

FitResult fit_body(std::span<const ScoredKeypoint3D> keypoints, const SkeletonTemplate& skeleton,
                   const FitOptions& options) {
  skeleton.validate();
  FitProblem problem{skeleton, Mat3::Identity()};
  problem.rotation_prior = options.rotation_prior;
  std::array<bool, kNumJoints> used{};
  for (const auto& kp : keypoints) {
    const auto k = at(kp.joint);
    const double score = kp.score.confidence * kp.score.visibility;
    if (score < options.confidence_floor || !kp.position.allFinite()) continue;
    // Duplicate joints keep the more confident entry, independent of order.
    if (used[k] && problem.weight[k] * problem.weight[k] >= kp.score.confidence) continue;
    used[k] = true;
    problem.weight[k] = std::sqrt(kp.score.confidence);
    problem.target[k] = kp.position;
  }
  const int count = static_cast<int>(std::count(used.begin(), used.end(), true));
  if (count < options.min_joints) {
    throw Error(Errc::InsufficientKeypoints,
                "only " + std::to_string(count) + " usable keypoints for the body fit");
  }

  // Rigid alignment of the canonical pose onto the observed joints.
  const JointPositions rest = forward_kinematics(skeleton, BodyParams{});
  std::vector<Vec3> from;
  std::vector<Vec3> to;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!used[k]) continue;
    from.push_back(rest[k]);
    to.push_back(problem.target[k]);
  }
  Vec3 translation;
  problem.base_orientation = kabsch(from, to, translation);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(kParamSize);
  x.segment<3>(0) = translation;  // rest root sits at the origin
  for (int i = 0; i < kNumJoints; ++i) x(kRootSize + kJointBlock * i) = 1.0;

  lsq::Options opts;
  opts.max_iterations = options.max_iterations;
  const lsq::Summary summary = lsq::solve(problem, x, opts);
  if (!summary.converged) throw Error(Errc::NoConvergence, "body fit hit the iteration cap");

  FitResult result;
  result.params = problem.params(x);
  result.params.root_orientation = nearest_rotation(result.params.root_orientation);
  result.joints_used = count;
  result.iterations = summary.iterations;
  const JointPositions fk = forward_kinematics(skeleton, result.params);
  double sum = 0.0;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (used[k]) sum += (fk[k] - problem.target[k]).squaredNorm();
  }
  result.residual_rms = std::sqrt(sum / count);
  return result;
}

std::string_view target_name(TargetName t) {
  switch (t) {
    case TargetName::HeadTop: return "HeadTop";
    case TargetName::RightRadialArtery: return "RightRadialArtery";
    case TargetName::LeftRadialArtery: return "LeftRadialArtery";
    case TargetName::RightFemoralArtery: return "RightFemoralArtery";
    case TargetName::LeftFemoralArtery: return "LeftFemoralArtery";
  }
  return "?";
}

std::optional<TargetName> target_from_name(std::string_view name) {
  for (auto t : {TargetName::HeadTop, TargetName::RightRadialArtery, TargetName::LeftRadialArtery,
                 TargetName::RightFemoralArtery, TargetName::LeftFemoralArtery}) {
    if (target_name(t) == name) return t;
  }
  return std::nullopt;
}

std::vector<AnatomicalTarget> default_targets() {
  return {
      {TargetName::HeadTop, {JointId::HeadTop}, Vec3::Zero()},
      // 20 mm proximal of the wrist along the forearm.
      {TargetName::RightRadialArtery, {JointId::RightWrist, JointId::RightElbow}, {-20, 0, 0}},
      {TargetName::LeftRadialArtery, {JointId::LeftWrist, JointId::LeftElbow}, {-20, 0, 0}},
      // Groin: distal, medial and anterior of the hip joint.
      {TargetName::RightFemoralArtery, {JointId::RightHip, JointId::RightKnee}, {-40, 30, 40}},
      {TargetName::LeftFemoralArtery, {JointId::LeftHip, JointId::LeftKnee}, {-40, -30, 40}},
  };
}

const AnatomicalTarget& find_target(std::span<const AnatomicalTarget> targets, TargetName name) {
  for (const auto& t : targets) {
    if (t.name == name) return t;
  }
  throw Error(Errc::InvalidArgument, "unknown target " + std::string(target_name(name)));
}

Vec3 locate_target(const JointPositions& joints, const Mat3& body_orientation,
                   const AnatomicalTarget& target) {
  if (target.defining_joints.empty()) {
    throw Error(Errc::InvalidArgument, "target has no defining joints");
  }
  const Vec3 origin = joints[at(target.defining_joints[0])];
  if (target.defining_joints.size() == 1) return origin + body_orientation * target.offset;

  const Vec3 axis = origin - joints[at(target.defining_joints[1])];
  if (axis.norm() < 1e-6) {
    throw Error(Errc::FrameDegenerate, "defining joints of " +
                                           std::string(target_name(target.name)) + " coincide");
  }
  const Vec3 x = axis.normalized();
  Vec3 up = body_orientation.col(2);
  if (x.cross(up).norm() < 1e-6) up = body_orientation.col(1);
  const Vec3 y = up.cross(x).normalized();
  const Vec3 z = x.cross(y);
  Mat3 frame;
  frame << x, y, z;
  return origin + frame * target.offset;
}

Vec3 locate_target(const BodyParams& params, const SkeletonTemplate& skeleton,
                   const AnatomicalTarget& target) {
  return locate_target(forward_kinematics(skeleton, params), params.root_orientation, target);
}

double positioning_error(const Vec3& predicted, const Vec3& ground_truth) {
  return (predicted - ground_truth).head<2>().norm();
}

}  // namespace carm
