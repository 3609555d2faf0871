#include <cmath>
#include <numbers>
#include <string>

#include <gtest/gtest.h>

#include "handxfer/error.hpp"
#include "handxfer/kinematics.hpp"
#include "support/oracles.hpp"

namespace handxfer {
namespace {

using testing::fk_oracle;
using testing::jacobian_fd;
using testing::planar_chain;
using testing::planar_chain_doc;

constexpr double kPi = std::numbers::pi;

std::string single_joint_doc(const std::string& axis, const std::string& limits,
                             const std::string& keypoint_link = "tip_link") {
  return R"({"name": "one",
    "links": [{"name": "base"}, {"name": "tip_link"}],
    "joints": [{"name": "j0", "kind": "revolute", "parent": "base",
                "child": "tip_link",
                "origin": {"xyz": [0, 0, 0], "wxyz": [1, 0, 0, 0]},
                "axis": )" + axis + R"(, "limits": )" + limits + R"(}],
    "keypoints": [{"id": "tip", "link": ")" + keypoint_link + R"(",
                   "offset": {"xyz": [1, 0, 0], "wxyz": [1, 0, 0, 0]}}]})";
}

template <typename Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(ParseChain, MinimalSingleRevolute) {
  const auto chain = parse_chain(single_joint_doc("[0, 0, 1]", "[-3.2, 3.2]"));
  EXPECT_EQ(chain.dof(), 1);
  EXPECT_EQ(chain.keypoints().size(), 1u);
  EXPECT_TRUE(chain.fingertip_indices().empty());
}

TEST(ParseChain, DanglingKeypointLinkIsNamed) {
  const auto msg = error_message(
      [] { parse_chain(single_joint_doc("[0, 0, 1]", "[-1, 1]", "palm2")); });
  EXPECT_NE(msg.find("palm2"), std::string::npos) << msg;
  EXPECT_THROW(parse_chain(single_joint_doc("[0, 0, 1]", "[-1, 1]", "palm2")),
               SemanticError);
}

TEST(ParseChain, ArmPlusHandCountsEntities) {
  const auto chain = load_chain(testing::data_path("chains/arm7_hand16.json"));
  EXPECT_EQ(chain.dof(), 23);
  ASSERT_EQ(chain.fingertip_indices().size(), 5u);
  int arm = 0;
  for (bool b : chain.group_mask(JointGroup::kArm)) arm += b;
  EXPECT_EQ(arm, 7);
}

TEST(ParseChain, ToyHandLoads) {
  const auto chain = load_chain(testing::data_path("chains/toy_hand.json"));
  EXPECT_EQ(chain.dof(), 14);
  EXPECT_EQ(chain.keypoints().size(), 21u);
  EXPECT_EQ(chain.fingertip_indices().size(), 5u);
  EXPECT_TRUE(chain.wrist_index().has_value());
}

TEST(ParseChain, SyntaxErrorReportsLine) {
  const std::string text = "{\n  \"name\": \"x\",\n  \"links\": [\n    {\"name\": }\n  ]\n}";
  try {
    parse_chain(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(ParseChain, NonUnitAxisNamesJoint) {
  const auto msg =
      error_message([] { parse_chain(single_joint_doc("[0, 0, 2]", "[-1, 1]")); });
  EXPECT_NE(msg.find("j0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("axis"), std::string::npos) << msg;
}

TEST(ParseChain, InvertedLimitsNamesJoint) {
  const auto msg =
      error_message([] { parse_chain(single_joint_doc("[0, 0, 1]", "[1, -1]")); });
  EXPECT_NE(msg.find("j0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("limits"), std::string::npos) << msg;
}

TEST(ParseChain, CycleIsRejected) {
  const std::string doc = R"({"name": "loop",
    "links": [{"name": "a"}, {"name": "b"}],
    "joints": [
      {"name": "ab", "kind": "revolute", "parent": "a", "child": "b",
       "origin": {"xyz": [0, 0, 0], "wxyz": [1, 0, 0, 0]},
       "axis": [0, 0, 1], "limits": [-1, 1]},
      {"name": "ba", "kind": "revolute", "parent": "b", "child": "a",
       "origin": {"xyz": [0, 0, 0], "wxyz": [1, 0, 0, 0]},
       "axis": [0, 0, 1], "limits": [-1, 1]}],
    "keypoints": []})";
  const auto msg = error_message([&] { parse_chain(doc); });
  EXPECT_NE(msg.find("cycle"), std::string::npos) << msg;
}

TEST(ParseChain, DanglingJointParentIsNamed) {
  auto doc = planar_chain_doc(2);
  doc.replace(doc.find("\"parent\": \"l0\""), 14, "\"parent\": \"lx\"");
  const auto msg = error_message([&] { parse_chain(doc); });
  EXPECT_NE(msg.find("lx"), std::string::npos) << msg;
}

TEST(ParseChain, UnknownKeyIsRejected) {
  auto doc = single_joint_doc("[0, 0, 1]", "[-1, 1]");
  doc.replace(doc.find("\"kind\""), 6, "\"mass\": 1, \"kind\"");
  try {
    parse_chain(doc);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("joints[0].mass"), std::string::npos)
        << e.what();
  }
}

TEST(ParseChain, RoundTripIsStructurallyIdentical) {
  for (const char* file : {"chains/toy_hand.json", "chains/arm7_hand16.json"}) {
    const auto chain = load_chain(testing::data_path(file));
    const auto text = serialize_chain(chain);
    const auto again = parse_chain(text);
    EXPECT_EQ(serialize_chain(again), text);
    ASSERT_EQ(again.dof(), chain.dof());
    for (int j = 0; j < chain.dof(); ++j) {
      EXPECT_EQ(again.joints()[j].origin, chain.joints()[j].origin);
      EXPECT_EQ(again.joints()[j].axis, chain.joints()[j].axis);
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto chain = testing::random_chain(seed);
    const auto again = parse_chain(serialize_chain(chain));
    const auto q = testing::random_config(chain, seed);
    const auto a = forward_kinematics(chain, q);
    const auto b = forward_kinematics(again, q);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
  }
}

TEST(ForwardKinematics, SingleRevoluteExamples) {
  const auto chain = planar_chain(1);
  JointConfig q(1);
  q << 0.0;
  EXPECT_TRUE(forward_kinematics(chain, q).at("tip").isApprox(Vec3(1, 0, 0), 1e-15));
  q << kPi / 2;
  const Vec3 tip = forward_kinematics(chain, q).at("tip");
  EXPECT_NEAR(tip.x(), 0.0, 1e-12);
  EXPECT_NEAR(tip.y(), 1.0, 1e-12);
  EXPECT_NEAR(tip.z(), 0.0, 1e-12);
}

TEST(ForwardKinematics, TwoLinkPlanar) {
  const auto chain = planar_chain(2);
  JointConfig q(2);
  q << kPi / 4, kPi / 4;
  const Vec3 tip = forward_kinematics(chain, q).at("tip");
  // Hand composition: the second link points at the summed angle.
  const Vec3 expected(std::cos(kPi / 4) + std::cos(kPi / 2),
                      std::sin(kPi / 4) + std::sin(kPi / 2), 0.0);
  EXPECT_NEAR((tip - expected).norm(), 0.0, 1e-12);
  EXPECT_NEAR(tip.x(), 0.7071, 1e-4);
  EXPECT_NEAR(tip.y(), 1.7071, 1e-4);
}

TEST(ForwardKinematics, DimensionMismatchThrows) {
  const auto chain = planar_chain(2);
  EXPECT_THROW(forward_kinematics(chain, JointConfig::Zero(3)), DimensionError);
}

TEST(ForwardKinematics, OutOfLimitValuesAreAccepted) {
  const auto chain = planar_chain(1);
  JointConfig q(1);
  q << 10.0;
  EXPECT_NO_THROW(forward_kinematics(chain, q));
}

TEST(ForwardKinematics, MatchesHomogeneousOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto chain = testing::random_chain(seed);
    const auto q = testing::random_config(chain, seed);
    const auto fk = forward_kinematics(chain, q);
    for (int k = 0; k < static_cast<int>(fk.size()); ++k) {
      EXPECT_LT((fk[k] - fk_oracle(chain, q, k)).cwiseAbs().maxCoeff(), 1e-12)
          << "seed " << seed << " keypoint " << k;
    }
  }
  for (const char* file : {"chains/toy_hand.json", "chains/arm7_hand16.json"}) {
    const auto chain = load_chain(testing::data_path(file));
    const auto q = testing::random_config(chain, 7);
    const auto fk = forward_kinematics(chain, q);
    for (int k = 0; k < static_cast<int>(fk.size()); ++k) {
      EXPECT_LT((fk[k] - fk_oracle(chain, q, k)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(KeypointJacobian, RevoluteTangent) {
  const auto chain = planar_chain(1);
  const auto jac = keypoint_jacobian(chain, JointConfig::Zero(1), "tip");
  EXPECT_NEAR((jac.col(0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(KeypointJacobian, PrismaticColumnIsAxis) {
  const auto chain = testing::prismatic_chain();
  for (double v : {-0.7, 0.0, 0.3, 5.0}) {
    JointConfig q(1);
    q << v;
    const auto jac = keypoint_jacobian(chain, q, "tip");
    EXPECT_EQ(jac.col(0), Vec3(1, 0, 0));
  }
}

TEST(KeypointJacobian, TwoLinkMatchesFiniteDifference) {
  const auto chain = planar_chain(2);
  JointConfig q(2);
  q << 0.3, 0.7;
  const auto jac = keypoint_jacobian(chain, q, "tip");
  const auto fd = jacobian_fd(chain, q, 0);
  EXPECT_LT((jac - fd).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(KeypointJacobian, UnknownKeypointThrows) {
  const auto chain = planar_chain(1);
  EXPECT_THROW(keypoint_jacobian(chain, JointConfig::Zero(1), "nope"), Error);
}

TEST(KeypointJacobian, RandomChainsMatchFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto chain = testing::random_chain(1000 + seed);
    const auto q = testing::random_config(chain, seed);
    for (int k = 0; k < static_cast<int>(chain.keypoints().size()); ++k) {
      const auto jac = keypoint_jacobian(chain, q, chain.keypoints()[k].id);
      EXPECT_LT((jac - jacobian_fd(chain, q, k)).cwiseAbs().maxCoeff(), 1e-5)
          << "seed " << seed << " keypoint " << k;
    }
  }
}

TEST(KeypointJacobian, BatchAgreesWithSingle) {
  const auto chain = load_chain(testing::data_path("chains/toy_hand.json"));
  const auto q = testing::random_config(chain, 3);
  const auto& tips = chain.fingertip_indices();
  const auto batch = keypoint_jacobians(chain, q, tips);
  for (std::size_t i = 0; i < tips.size(); ++i) {
    const auto single = keypoint_jacobian(chain, q, chain.keypoints()[tips[i]].id);
    EXPECT_LT((batch.jacobians[i] - single).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(KeypointJacobian, FrameJacobianAngularRows) {
  const auto chain = testing::random_chain(42);
  const auto q = testing::random_config(chain, 42);
  const int k = 0;
  const auto jac = keypoint_frame_jacobian(chain, q, k);
  const double h = 1e-6;
  for (int j = 0; j < chain.dof(); ++j) {
    JointConfig plus = q, minus = q;
    plus[j] += h;
    minus[j] -= h;
    const Quat qp = keypoint_pose(chain, plus, k).rotation();
    const Quat qm = keypoint_pose(chain, minus, k).rotation();
    const Vec3 omega = rotation_log(qp * qm.conjugate()) / (2 * h);
    EXPECT_LT((jac.block<3, 1>(3, j) - omega).cwiseAbs().maxCoeff(), 1e-5);
  }
}

}  // namespace
}  // namespace handxfer
