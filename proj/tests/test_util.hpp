#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sensact/netmodel.hpp"

namespace sensact::test {

/// Network with one scalar state, actuator and sensor per node.
inline DynNetwork scalar_network(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  return DynNetwork(std::vector<NodeDims>(n, NodeDims{1, 1, 1}), A,
                    Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n));
}

/// The random generator's network at desk scale.
inline DynNetwork random_net(int nodes, std::uint64_t seed, double shift = 0.2) {
  RandomNetworkParams p;
  p.num_nodes = nodes;
  p.seed = seed;
  p.instability_shift = shift;
  return gen_random_network(p);
}

inline double max_abs(const Eigen::MatrixXd& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

}  // namespace sensact::test
