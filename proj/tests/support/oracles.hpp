#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handxfer/kinematics.hpp"

namespace handxfer::testing {

std::string data_path(const std::string& relative);

// Chain document for `n` planar revolute links about +z, each of length
// `length` along +x, with a keypoint "tip" at the end of the last link.
std::string planar_chain_doc(int n, double length = 1.0);
KinematicChain planar_chain(int n, double length = 1.0);

// Single prismatic joint along +x with keypoint "tip" at the child origin.
KinematicChain prismatic_chain();

// Random tree: mixed revolute/prismatic joints with random origins, axes
// and keypoints on random links.
KinematicChain random_chain(std::uint64_t seed, int max_joints = 8);
JointConfig random_config(const KinematicChain& chain, std::uint64_t seed);

// Keypoint position by explicit 4x4 homogeneous composition along the path
// from the base, using Rodrigues rotation matrices.
Eigen::Vector3d fk_oracle(const KinematicChain& chain, const JointConfig& q,
                          int keypoint);

// Central finite differences of forward kinematics.
Eigen::Matrix<double, 3, Eigen::Dynamic> jacobian_fd(const KinematicChain& chain,
                                                     const JointConfig& q,
                                                     int keypoint,
                                                     double step = 1e-6);

// Minimum of `f` over a regular grid of spacing `resolution` covering the
// box [lo, hi] (dimension 1 or 2), keeping only points accepted by `keep`.
struct GridMinimum {
  double value;
  Eigen::VectorXd argmin;
};
GridMinimum grid_minimum(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         double resolution,
                         const std::function<bool(const Eigen::VectorXd&)>& keep);

// Generalized advantage estimate by the direct double sum
// A_t = sum_l (gamma*lambda)^l delta_{t+l}, truncated at episode ends.
std::vector<double> gae_double_loop(const std::vector<double>& rewards,
                                    const std::vector<double>& values,
                                    const std::vector<bool>& dones,
                                    double last_value, double gamma,
                                    double lambda);

}  // namespace handxfer::testing
