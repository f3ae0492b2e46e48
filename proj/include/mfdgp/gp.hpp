#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace mfdgp {

enum class KernelKind { SquaredExponential, Matern52 };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// Extra term for composed-fidelity layers whose last input coordinate is the
/// previous level's output f: linear_variance * f * f' * exp(-|x - x'|^2_l / 2)
/// with `lengthscales` over the design coordinates x.
struct LinearCoupling {
  double linear_variance = 1.0;
  Eigen::VectorXd lengthscales;
};

struct KernelSpec {
  KernelKind kind = KernelKind::SquaredExponential;
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  std::optional<LinearCoupling> coupling;

  /// Throws InputError on non-positive parameters, InputShapeError if the
  /// lengthscale count differs from `dim`.
  void validate(Eigen::Index dim) const;

  static KernelSpec isotropic(Eigen::Index dim, double lengthscale = 1.0, double signal_variance = 1.0,
                              KernelKind kind = KernelKind::SquaredExponential);
};

struct GPDataset {
  Eigen::MatrixXd inputs;  // n x d, one observation per row
  Eigen::VectorXd targets;
  double noise_variance = 0.0;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  void validate() const;
};

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b);

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Exact zero-mean GP posterior. Immutable once constructed; the Cholesky
/// factor of K + noise*I (plus any escalation jitter) is computed up front.
class TrainedGP {
 public:
  TrainedGP(GPDataset data, KernelSpec kernel);

  const GPDataset& dataset() const { return data_; }
  const KernelSpec& kernel() const { return kernel_; }
  const Eigen::MatrixXd& chol_factor() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  /// Diagonal jitter added on top of the noise variance (0 when none was needed).
  double jitter() const { return jitter_; }
  Eigen::Index input_dim() const { return data_.dim(); }

  /// Posterior mean and variance at a single point.
  std::pair<double, double> predict_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  GPDataset data_;
  KernelSpec kernel_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

/// Lower Cholesky factor of `matrix`, escalating diagonal jitter from
/// 1e-10 to 1e-4 times `scale` (default: mean diagonal). Returns the jitter used.
double cholesky_with_jitter(const Eigen::MatrixXd& matrix, Eigen::MatrixXd& lower, double scale);
double cholesky_with_jitter(const Eigen::MatrixXd& matrix, Eigen::MatrixXd& lower);

/// Scale-aware starting point: half the input range per dimension and the
/// target variance (falling back to the mean square, then 1).
KernelSpec default_kernel_init(const GPDataset& data, KernelKind kind = KernelKind::SquaredExponential);

/// As default_kernel_init plus a LinearCoupling on the last input column.
KernelSpec coupled_kernel_init(const GPDataset& data, KernelKind kind = KernelKind::SquaredExponential);

/// Reference scales for the log-space hyperparameter search box: lengthscales
/// within [0.01, 100] x input_range, signal variance within
/// [min_signal_ratio, 1e6] x target_variance.
struct FitScales {
  Eigen::VectorXd input_range;
  double target_variance = 1.0;
  double min_signal_ratio = 1e-6;
  /// Mean square of the coupled coordinate; sets the linear-variance box.
  double coupling_mean_square = 1.0;
};

/// Scales taken from the dataset itself.
FitScales default_fit_scales(const GPDataset& data);

TrainedGP fit(const GPDataset& data, const KernelSpec& init, int restarts, std::uint64_t rng_seed);
TrainedGP fit(const GPDataset& data, const KernelSpec& init, int restarts, std::uint64_t rng_seed,
              const FitScales& scales);

double log_marginal_likelihood(const TrainedGP& gp);

Prediction predict(const TrainedGP& gp, const Eigen::MatrixXd& queries);

/// count x m matrix of joint posterior draws at the query rows.
Eigen::MatrixXd sample_posterior(const TrainedGP& gp, const Eigen::MatrixXd& queries, int count,
                                 std::uint64_t rng_seed);

}  // namespace mfdgp
