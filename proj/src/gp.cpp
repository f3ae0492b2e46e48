#include "mfdgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Cholesky>

#include "mfdgp/error.hpp"
#include "mfdgp/minimize.hpp"
#include "mfdgp/rng.hpp"

namespace mfdgp {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::SquaredExponential:
      return "squared-exponential";
    case KernelKind::Matern52:
      return "matern-5/2";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "squared-exponential" || name == "se") return KernelKind::SquaredExponential;
  if (name == "matern-5/2" || name == "matern52") return KernelKind::Matern52;
  throw InputError("unknown kernel kind '" + name + "'");
}

void KernelSpec::validate(Eigen::Index dim) const {
  if (lengthscales.size() != dim)
    throw InputShapeError("kernel has " + std::to_string(lengthscales.size()) + " lengthscales but inputs have dimension " +
                          std::to_string(dim));
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw InputError("signal_variance must be positive");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i])) throw InputError("lengthscales must be positive");
  if (coupling) {
    if (dim < 2) throw InputShapeError("linear coupling needs a design input plus the fidelity coordinate");
    if (coupling->lengthscales.size() != dim - 1)
      throw InputShapeError("coupling lengthscales must cover the design coordinates");
    if (!(coupling->linear_variance > 0.0) || !std::isfinite(coupling->linear_variance))
      throw InputError("linear_variance must be positive");
    for (Eigen::Index i = 0; i < coupling->lengthscales.size(); ++i)
      if (!(coupling->lengthscales[i] > 0.0) || !std::isfinite(coupling->lengthscales[i]))
        throw InputError("coupling lengthscales must be positive");
  }
}

KernelSpec KernelSpec::isotropic(Eigen::Index dim, double lengthscale, double signal_variance, KernelKind kind) {
  return KernelSpec{kind, Eigen::VectorXd::Constant(dim, lengthscale), signal_variance, std::nullopt};
}

void GPDataset::validate() const {
  if (inputs.rows() < 1) throw InsufficientDataError("dataset needs at least one observation");
  if (inputs.rows() != targets.size())
    throw InputShapeError("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                          std::to_string(targets.size()) + " targets");
  if (!inputs.allFinite() || !targets.allFinite()) throw InputError("dataset contains non-finite values");
  if (!(noise_variance >= 0.0)) throw InputError("noise_variance must be non-negative");
}

namespace {

inline double scaled_sq_dist(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b) {
  return ((a - b).array() / spec.lengthscales.array()).square().sum();
}

inline double kernel_from_sq(const KernelSpec& spec, double r2) {
  if (spec.kind == KernelKind::SquaredExponential) return spec.signal_variance * std::exp(-0.5 * r2);
  const double s5r = std::sqrt(5.0 * r2);
  return spec.signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
}

inline double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) {
  double k = kernel_from_sq(spec, scaled_sq_dist(spec, a, b));
  if (spec.coupling) {
    const Eigen::Index d = a.size() - 1;
    const double r2 = ((a.head(d) - b.head(d)).array() / spec.coupling->lengthscales.array()).square().sum();
    k += spec.coupling->linear_variance * a[d] * b[d] * std::exp(-0.5 * r2);
  }
  return k;
}

constexpr double kVarianceClamp = 1e-10;

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != spec.lengthscales.size() || b.size() != spec.lengthscales.size())
    throw InputShapeError("kernel_eval: point dimension does not match lengthscales");
  return kernel_value(spec, a, b);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != spec.lengthscales.size() || b.cols() != spec.lengthscales.size())
    throw InputShapeError("kernel_matrix: input dimension does not match lengthscales");
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      k(i, j) = kernel_value(spec, a.row(i).transpose(), b.row(j).transpose());
  return k;
}

double cholesky_with_jitter(const Eigen::MatrixXd& matrix, Eigen::MatrixXd& lower, double scale) {
  std::vector<double> attempted;
  auto try_factor = [&](double jitter) {
    attempted.push_back(jitter);
    Eigen::MatrixXd m = matrix;
    m.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    Eigen::MatrixXd l = llt.matrixL();
    if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) return false;
    lower = std::move(l);
    return true;
  };

  if (try_factor(0.0)) return 0.0;
  if (!(scale > 0.0)) scale = 1.0;
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    if (try_factor(rel * scale)) return rel * scale;
  }
  throw NumericalConditioningError("Cholesky factorization failed after jitter escalation", attempted);
}

double cholesky_with_jitter(const Eigen::MatrixXd& matrix, Eigen::MatrixXd& lower) {
  return cholesky_with_jitter(matrix, lower, matrix.diagonal().mean());
}

TrainedGP::TrainedGP(GPDataset data, KernelSpec kernel) : data_(std::move(data)), kernel_(std::move(kernel)) {
  data_.validate();
  kernel_.validate(data_.dim());
  Eigen::MatrixXd k = kernel_matrix(kernel_, data_.inputs, data_.inputs);
  const double scale = k.diagonal().mean();
  k.diagonal().array() += data_.noise_variance;
  jitter_ = cholesky_with_jitter(k, chol_, scale);
  alpha_ = chol_.triangularView<Eigen::Lower>().solve(data_.targets);
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
}

std::pair<double, double> TrainedGP::predict_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != data_.dim())
    throw InputShapeError("query has dimension " + std::to_string(x.size()) + ", model expects " +
                          std::to_string(data_.dim()));
  const Eigen::Index n = data_.size();
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kstar[i] = kernel_value(kernel_, data_.inputs.row(i).transpose(), x);
  const double mean = kstar.dot(alpha_);
  chol_.triangularView<Eigen::Lower>().solveInPlace(kstar);
  double var = kernel_value(kernel_, x, x) - kstar.squaredNorm();
  if (var < 0.0) {
    if (var < -kVarianceClamp)
      throw NumericalConditioningError("posterior variance " + std::to_string(var) + " below clamp threshold");
    var = 0.0;
  }
  return {mean, var};
}

namespace {

std::optional<double> lml_for(const GPDataset& data, const KernelSpec& spec) {
  try {
    TrainedGP gp(data, spec);
    double v = log_marginal_likelihood(gp);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const NumericalConditioningError&) {
    return std::nullopt;
  }
}

}  // namespace

double log_marginal_likelihood(const TrainedGP& gp) {
  const auto& y = gp.dataset().targets;
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(gp.alpha()) - gp.chol_factor().diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

namespace {

Eigen::VectorXd input_ranges(const GPDataset& data) {
  Eigen::VectorXd range(data.dim());
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    double r = data.inputs.col(j).maxCoeff() - data.inputs.col(j).minCoeff();
    range[j] = r > 0.0 ? r : 1.0;
  }
  return range;
}

double target_scale(const GPDataset& data) {
  const auto& y = data.targets;
  const double mean = y.mean();
  const double var = y.size() > 1 ? (y.array() - mean).square().mean() : 0.0;
  const double second = y.array().square().mean();
  if (var > 0.0) return var;
  if (second > 0.0) return second;
  return 1.0;
}

}  // namespace

KernelSpec default_kernel_init(const GPDataset& data, KernelKind kind) {
  data.validate();
  return KernelSpec{kind, 0.5 * input_ranges(data), target_scale(data), std::nullopt};
}

namespace {

double coordinate_scale(const Eigen::VectorXd& f) {
  const double m = f.array().square().mean();
  return m > 0.0 ? m : 1.0;
}

}  // namespace

KernelSpec coupled_kernel_init(const GPDataset& data, KernelKind kind) {
  KernelSpec spec = default_kernel_init(data, kind);
  const Eigen::Index d = data.dim() - 1;
  if (d < 1) throw InputShapeError("linear coupling needs a design input plus the fidelity coordinate");
  spec.coupling = LinearCoupling{spec.signal_variance / coordinate_scale(data.inputs.col(d)), spec.lengthscales.head(d)};
  return spec;
}

FitScales default_fit_scales(const GPDataset& data) {
  data.validate();
  return FitScales{input_ranges(data), target_scale(data), 1e-6, coordinate_scale(data.inputs.col(data.dim() - 1))};
}

TrainedGP fit(const GPDataset& data, const KernelSpec& init, int restarts, std::uint64_t rng_seed) {
  return fit(data, init, restarts, rng_seed, default_fit_scales(data));
}

TrainedGP fit(const GPDataset& data, const KernelSpec& init, int restarts, std::uint64_t rng_seed,
              const FitScales& scales) {
  data.validate();
  init.validate(data.dim());
  if (restarts < 1) throw InputError("fit: restarts must be >= 1");
  if (scales.input_range.size() != data.dim()) throw InputShapeError("fit: input_range must cover every dimension");
  if (!(scales.target_variance > 0.0) || !(scales.min_signal_ratio > 0.0) || !(scales.coupling_mean_square > 0.0))
    throw InputError("fit: reference scales must be positive");

  const Eigen::Index d = data.dim();
  const Eigen::VectorXd& range = scales.input_range;
  const double scale = scales.target_variance;
  const bool coupled = init.coupling.has_value();
  const Eigen::Index dx = d - 1;
  const double linear_scale = scale / scales.coupling_mean_square;

  // Log-parameters kept inside a box:
  // [lengthscale_1..d, signal_variance, (linear_variance, coupling lengthscale_1..d-1)].
  const Eigen::Index p = coupled ? 2 * d + 1 : d + 1;
  Eigen::VectorXd lo(p), hi(p);
  for (Eigen::Index j = 0; j < d; ++j) {
    lo[j] = std::log(0.01 * range[j]);
    hi[j] = std::log(100.0 * range[j]);
  }
  lo[d] = std::log(scales.min_signal_ratio * scale);
  hi[d] = std::log(1e6 * scale);
  if (coupled) {
    lo[d + 1] = std::log(1e-6 * linear_scale);
    hi[d + 1] = std::log(1e6 * linear_scale);
    lo.tail(dx) = lo.head(dx);
    hi.tail(dx) = hi.head(dx);
  }

  auto unpack = [&](const Eigen::VectorXd& q) {
    KernelSpec spec{init.kind, q.head(d).array().exp().matrix(), std::exp(q[d]), std::nullopt};
    if (coupled) spec.coupling = LinearCoupling{std::exp(q[d + 1]), q.tail(dx).array().exp().matrix()};
    return spec;
  };
  auto objective = [&](const Eigen::VectorXd& q) {
    if ((q.array() < lo.array()).any() || (q.array() > hi.array()).any())
      return std::numeric_limits<double>::infinity();
    auto v = lml_for(data, unpack(q));
    return v ? -*v : std::numeric_limits<double>::infinity();
  };

  Engine rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform_lengthscale = [&](Eigen::Index j) {
    const double lmin = std::log(0.05 * range[j]);
    const double lmax = std::log(2.0 * range[j]);
    return lmin + (lmax - lmin) * unit(rng);
  };

  std::optional<Eigen::VectorXd> best_params;
  double best_value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd start(p);
    if (r == 0) {
      start.head(d) = init.lengthscales.array().log();
      start[d] = std::log(init.signal_variance);
      if (coupled) {
        start[d + 1] = std::log(init.coupling->linear_variance);
        start.tail(dx) = init.coupling->lengthscales.array().log();
      }
    } else {
      for (Eigen::Index j = 0; j < d; ++j) start[j] = log_uniform_lengthscale(j);
      start[d] = std::log(scale);
      if (coupled) {
        start[d + 1] = std::log(linear_scale);
        for (Eigen::Index j = 0; j < dx; ++j) start[d + 2 + j] = log_uniform_lengthscale(j);
      }
    }
    start = start.cwiseMax(lo).cwiseMin(hi);
    MinimizeResult res = nelder_mead(objective, start);
    if (!best_params || res.value < best_value) {
      best_params = res.x;
      best_value = res.value;
    }
  }
  // If every start failed to factorize, the constructor reports the conditioning error.
  return TrainedGP(data, unpack(*best_params));
}

Prediction predict(const TrainedGP& gp, const Eigen::MatrixXd& queries) {
  if (queries.cols() != gp.input_dim())
    throw InputShapeError("predict: queries have dimension " + std::to_string(queries.cols()) + ", model expects " +
                          std::to_string(gp.input_dim()));
  Prediction out{Eigen::VectorXd(queries.rows()), Eigen::VectorXd(queries.rows())};
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    auto [m, v] = gp.predict_point(queries.row(i).transpose());
    out.mean[i] = m;
    out.variance[i] = v;
  }
  return out;
}

Eigen::MatrixXd sample_posterior(const TrainedGP& gp, const Eigen::MatrixXd& queries, int count,
                                 std::uint64_t rng_seed) {
  if (count < 1) throw InputError("sample_posterior: count must be >= 1");
  if (queries.cols() != gp.input_dim()) throw InputShapeError("sample_posterior: query dimension mismatch");

  const auto& chol = gp.chol_factor();
  const Eigen::MatrixXd kqx = kernel_matrix(gp.kernel(), queries, gp.dataset().inputs);
  const Eigen::MatrixXd prior = kernel_matrix(gp.kernel(), queries, queries);
  const Eigen::VectorXd mean = kqx * gp.alpha();
  const Eigen::MatrixXd v = chol.triangularView<Eigen::Lower>().solve(kqx.transpose());
  Eigen::MatrixXd cov = prior - v.transpose() * v;
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal() = cov.diagonal().cwiseMax(0.0);

  Eigen::MatrixXd lower;
  cholesky_with_jitter(cov, lower, prior.diagonal().mean());

  Engine rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index m = queries.rows();
  Eigen::MatrixXd samples(count, m);
  Eigen::VectorXd z(m);
  for (int s = 0; s < count; ++s) {
    for (Eigen::Index j = 0; j < m; ++j) z[j] = normal(rng);
    samples.row(s) = (mean + lower * z).transpose();
  }
  return samples;
}

}  // namespace mfdgp
