#pragma once

// Brute-force reference GP built on an explicit LU inverse and a separately
// written squared-exponential formula.

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mfdgp/gp.hpp"

namespace oracle {

inline double se(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& ls, double s2) {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) r2 += std::pow((a[i] - b[i]) / ls[i], 2);
  return s2 * std::exp(-0.5 * r2);
}

struct DenseGP {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd ls;
  double s2;
  double noise;
  Eigen::MatrixXd k_inv;
  double log_det;

  DenseGP(Eigen::MatrixXd inputs, Eigen::VectorXd targets, Eigen::VectorXd lengthscales, double signal, double nv)
      : x(std::move(inputs)), y(std::move(targets)), ls(std::move(lengthscales)), s2(signal), noise(nv) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        k(i, j) = se(x.row(i).transpose(), x.row(j).transpose(), ls, s2) + (i == j ? noise : 0.0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    k_inv = lu.inverse();
    log_det = std::log(lu.determinant());
  }

  Eigen::VectorXd cross(const Eigen::VectorXd& q) const {
    Eigen::VectorXd k(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) k[i] = se(x.row(i).transpose(), q, ls, s2);
    return k;
  }
  double mean(const Eigen::VectorXd& q) const { return cross(q).dot(k_inv * y); }
  double variance(const Eigen::VectorXd& q) const {
    const Eigen::VectorXd k = cross(q);
    return s2 - k.dot(k_inv * k);
  }
  double lml() const {
    return -0.5 * y.dot(k_inv * y) - 0.5 * log_det - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * M_PI);
  }
};

/// Random dataset with inputs spread in [0, 1]^d and smooth targets.
inline mfdgp::GPDataset random_dataset(std::mt19937_64& rng, int n, int d, double noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mfdgp::GPDataset data;
  data.inputs.resize(n, d);
  data.targets.resize(n);
  data.noise_variance = noise;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      data.inputs(i, j) = u(rng);
      acc += std::sin(3.0 * data.inputs(i, j) + j);
    }
    data.targets[i] = acc + 0.1 * u(rng);
  }
  return data;
}

}  // namespace oracle
