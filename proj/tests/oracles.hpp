#pragma once

// Independent references shared by the unit tests and the acceptance run:
// the full 2^N Hilbert space built from Kronecker products.

#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>
#include <complex>
#include <vector>

#include "rydjc/dynamics.hpp"

namespace oracle {

using namespace rydjc;

// Dense full 2^N Hamiltonian from Kronecker products, bit i of the row index
// marking atom i in |r>.
inline Eigen::MatrixXd kronecker_hamiltonian(const PhysicalParams& p, const SpatialConfiguration& c) {
  const int n = int(c.size());
  const int dim = 1 << n;
  Eigen::Matrix2d sx, nr, id = Eigen::Matrix2d::Identity();
  sx << 0, 1, 1, 0;
  nr << 0, 0, 0, 1;
  auto embed = [&](const std::vector<Eigen::Matrix2d>& ops) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 1);
    for (int i = n - 1; i >= 0; --i) {
      Eigen::MatrixXd next(m.rows() * 2, m.cols() * 2);
      for (int r = 0; r < m.rows(); ++r)
        for (int col = 0; col < m.cols(); ++col) next.block<2, 2>(2 * r, 2 * col) = m(r, col) * ops[i];
      m = next;
    }
    return m;
  };
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::Matrix2d> ops(n, id);
    ops[i] = sx;
    h += p.rabi / 2.0 * embed(ops);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      std::vector<Eigen::Matrix2d> ops(n, id);
      ops[i] = nr;
      ops[j] = nr;
      const double r = std::sqrt(distance_squared(c.positions[i], c.positions[j]));
      h += p.c6 / std::pow(r, 6) * embed(ops);
    }
  return h;
}

// q[n](t) from exp(-iHt) of the full dense matrix.
inline std::vector<std::vector<double>> brute_force_histogram(const Eigen::MatrixXd& h, int n_atoms,
                                                       const std::vector<double>& grid) {
  const int dim = int(h.rows());
  std::vector<std::vector<double>> q(n_atoms + 1, std::vector<double>(grid.size(), 0.0));
  const Eigen::MatrixXcd hc = h.cast<std::complex<double>>();
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const Eigen::MatrixXcd u = (std::complex<double>(0.0, -grid[t]) * hc).exp();
    for (int s = 0; s < dim; ++s) q[std::popcount(unsigned(s))][t] += std::norm(u(s, 0));
  }
  return q;
}

}  // namespace oracle
