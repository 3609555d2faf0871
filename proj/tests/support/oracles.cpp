#include "support/oracles.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

namespace handxfer::testing {

std::string data_path(const std::string& relative) {
  return std::string(HANDXFER_DATA_DIR) + "/" + relative;
}

std::string planar_chain_doc(int n, double length) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"name\": \"planar" << n << "\", \"links\": [{\"name\": \"base\"}";
  for (int i = 0; i < n; ++i) os << ", {\"name\": \"l" << i << "\"}";
  os << "], \"joints\": [";
  for (int i = 0; i < n; ++i) {
    os << (i ? ", " : "") << "{\"name\": \"j" << i
       << "\", \"kind\": \"revolute\", \"parent\": \""
       << (i == 0 ? std::string("base") : "l" + std::to_string(i - 1))
       << "\", \"child\": \"l" << i << "\", \"origin\": {\"xyz\": ["
       << (i == 0 ? 0.0 : length)
       << ", 0, 0], \"wxyz\": [1, 0, 0, 0]}, \"axis\": [0, 0, 1], "
          "\"limits\": [-3.2, 3.2]}";
  }
  os << "], \"keypoints\": [{\"id\": \"tip\", \"link\": \"l" << n - 1
     << "\", \"offset\": {\"xyz\": [" << length
     << ", 0, 0], \"wxyz\": [1, 0, 0, 0]}}]}";
  return os.str();
}

KinematicChain planar_chain(int n, double length) {
  return parse_chain(planar_chain_doc(n, length));
}

KinematicChain prismatic_chain() {
  return parse_chain(R"({"name": "slider",
    "links": [{"name": "base"}, {"name": "carriage"}],
    "joints": [{"name": "slide", "kind": "prismatic", "parent": "base",
                "child": "carriage",
                "origin": {"xyz": [0.1, 0.2, 0.3], "wxyz": [1, 0, 0, 0]},
                "axis": [1, 0, 0], "limits": [-1, 1]}],
    "keypoints": [{"id": "tip", "link": "carriage",
                   "offset": {"xyz": [0, 0, 0], "wxyz": [1, 0, 0, 0]}}]})");
}

namespace {

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle) {
  Eigen::Matrix3d k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
         (1.0 - std::cos(angle)) * k * k;
}

Eigen::Matrix3d quat_matrix(const Eigen::Quaterniond& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = r;
  m.block<3, 1>(0, 3) = t;
  return m;
}

Eigen::Matrix4d homogeneous(const RigidTransform& t) {
  return homogeneous(quat_matrix(t.rotation()), t.translation());
}

}  // namespace

KinematicChain random_chain(std::uint64_t seed, int max_joints) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_joints(1, max_joints);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  ChainDescription d;
  d.name = "random" + std::to_string(seed);
  d.links.push_back("base");
  const int n = n_joints(rng);
  for (int j = 0; j < n; ++j) {
    const std::string child = "link" + std::to_string(j);
    std::uniform_int_distribution<int> parent(0, static_cast<int>(d.links.size()) - 1);
    Joint joint;
    joint.name = "joint" + std::to_string(j);
    joint.kind = std::bernoulli_distribution(0.75)(rng) ? JointKind::kRevolute
                                                         : JointKind::kPrismatic;
    joint.parent_link = d.links[parent(rng)];
    joint.child_link = child;
    joint.origin = RigidTransform(random_quat(rng), Vec3(u(rng), u(rng), u(rng)));
    joint.axis = random_unit(rng);
    joint.lower = -2.0;
    joint.upper = 2.0;
    d.joints.push_back(joint);
    d.links.push_back(child);
  }
  std::uniform_int_distribution<int> link(0, static_cast<int>(d.links.size()) - 1);
  const int n_kp = 1 + static_cast<int>(rng() % 5);
  for (int k = 0; k < n_kp; ++k) {
    d.keypoints.push_back({"kp" + std::to_string(k), d.links[link(rng)],
                           RigidTransform(random_quat(rng),
                                          Vec3(u(rng), u(rng), u(rng)))});
  }
  return KinematicChain(std::move(d));
}

JointConfig random_config(const KinematicChain& chain, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  JointConfig q(chain.dof());
  for (int j = 0; j < chain.dof(); ++j) q[j] = u(rng);
  return q;
}

Eigen::Vector3d fk_oracle(const KinematicChain& chain, const JointConfig& q,
                          int keypoint) {
  // Walk from the keypoint's link up to the base, prepending transforms.
  Eigen::Matrix4d m = homogeneous(chain.keypoints()[keypoint].offset);
  int link = chain.link_index(chain.keypoints()[keypoint].link);
  while (true) {
    int joint_index = -1;
    for (int j = 0; j < chain.dof(); ++j) {
      if (chain.joints()[j].child_link == chain.links()[link]) joint_index = j;
    }
    if (joint_index < 0) break;
    const Joint& joint = chain.joints()[joint_index];
    Eigen::Matrix4d motion;
    if (joint.kind == JointKind::kRevolute) {
      motion = homogeneous(rodrigues(joint.axis, q[joint_index]), Vec3::Zero());
    } else {
      motion = homogeneous(Eigen::Matrix3d::Identity(), joint.axis * q[joint_index]);
    }
    m = homogeneous(joint.origin) * motion * m;
    link = chain.link_index(joint.parent_link);
  }
  return m.block<3, 1>(0, 3);
}

Eigen::Matrix<double, 3, Eigen::Dynamic> jacobian_fd(const KinematicChain& chain,
                                                     const JointConfig& q,
                                                     int keypoint, double step) {
  Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, chain.dof());
  for (int j = 0; j < chain.dof(); ++j) {
    JointConfig plus = q, minus = q;
    plus[j] += step;
    minus[j] -= step;
    jac.col(j) = (fk_oracle(chain, plus, keypoint) - fk_oracle(chain, minus, keypoint)) /
                 (2.0 * step);
  }
  return jac;
}

GridMinimum grid_minimum(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         double resolution,
                         const std::function<bool(const Eigen::VectorXd&)>& keep) {
  GridMinimum best{std::numeric_limits<double>::infinity(), lo};
  const int dims = static_cast<int>(lo.size());
  std::vector<long> counts(dims);
  for (int d = 0; d < dims; ++d) {
    counts[d] = static_cast<long>(std::floor((hi[d] - lo[d]) / resolution)) + 1;
  }
  std::vector<long> idx(dims, 0);
  Eigen::VectorXd x(dims);
  while (true) {
    for (int d = 0; d < dims; ++d) x[d] = lo[d] + idx[d] * resolution;
    if (keep(x)) {
      const double v = f(x);
      if (v < best.value) best = {v, x};
    }
    int d = 0;
    while (d < dims && ++idx[d] == counts[d]) idx[d++] = 0;
    if (d == dims) break;
  }
  return best;
}

std::vector<double> gae_double_loop(const std::vector<double>& rewards,
                                    const std::vector<double>& values,
                                    const std::vector<bool>& dones,
                                    double last_value, double gamma,
                                    double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? values[t + 1] : last_value;
    delta[t] = rewards[t] + gamma * next * (dones[t] ? 0.0 : 1.0) - values[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      adv[t] += weight * delta[l];
      if (dones[l]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace handxfer::testing
