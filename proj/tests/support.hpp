#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "iclcp/lsa_model.hpp"
#include "iclcp/rng.hpp"

namespace iclcp::testing {

// Hand-rolled generators for property tests.

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline Eigen::VectorXd random_vector(Rng& rng, int size, double scale = 1.0) {
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = scale * rng.normal();
  return v;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace iclcp::testing
