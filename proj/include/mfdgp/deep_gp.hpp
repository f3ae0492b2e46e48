#pragma once

#include <cstdint>
#include <functional>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mfdgp/gp.hpp"

namespace mfdgp {

struct FidelityLevel {
  int index = 1;  // 1-based position on the ladder
  double nominal = 0.0;

  friend bool operator==(const FidelityLevel&, const FidelityLevel&) = default;
};

/// Ordered discrete fidelities. Nominal values lie in [0, 1] and strictly increase.
class FidelityLadder {
 public:
  explicit FidelityLadder(std::vector<double> nominals);

  /// {0, 0.25, 0.5, 0.75, 1}
  static FidelityLadder default_five();

  int size() const { return static_cast<int>(nominals_.size()); }
  FidelityLevel level(int index) const;
  FidelityLevel highest() const { return level(size()); }
  const std::vector<double>& nominals() const { return nominals_; }

  friend bool operator==(const FidelityLadder&, const FidelityLadder&) = default;

 private:
  std::vector<double> nominals_;
};

struct MultiFidelityDataset {
  std::vector<GPDataset> levels;

  int size() const { return static_cast<int>(levels.size()); }
  /// T >= 2, shared input dimension, at least one observation per level.
  void validate() const;
};

struct DeepGPConfig {
  KernelKind kernel = KernelKind::SquaredExponential;
  int fit_restarts = 3;
  std::uint64_t seed = 0;
  int propagation_samples = 100;
  /// Layers t > 1 add a linear term in the previous level's output (see LinearCoupling).
  bool linear_coupling = true;
  /// Lower bound of every layer's signal variance, relative to the variance of
  /// the targets pooled over all levels.
  double min_signal_ratio = 1e-2;
};

struct LevelPrediction {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Monte-Carlo population retained from one propagation pass. Entry t holds
/// the per-sample predictive means and variances of layer t+1 (level 1 has a
/// single exact entry).
struct PropagationTrace {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::VectorXd> variances;
};

/// Sequentially composed multi-fidelity GP. Layer 1 models level 1 on x;
/// layer t > 1 models level t on [x, f_{t-1}(x)].
class MFDeepGP {
 public:
  MFDeepGP() = default;
  MFDeepGP(std::vector<TrainedGP> layers, FidelityLadder ladder, int propagation_samples);

  bool trained() const { return !layers_.empty(); }
  int levels() const { return static_cast<int>(layers_.size()); }
  Eigen::Index input_dim() const;
  const TrainedGP& layer(int level_index) const;
  const std::vector<TrainedGP>& layers() const { return layers_; }
  const FidelityLadder& ladder() const { return ladder_; }
  int propagation_samples() const { return samples_; }

 private:
  std::vector<TrainedGP> layers_;
  FidelityLadder ladder_ = FidelityLadder::default_five();
  int samples_ = 100;
};

MFDeepGP train(const MultiFidelityDataset& data, const FidelityLadder& ladder, const DeepGPConfig& config);

/// Same composition as train, with fixed per-layer kernels instead of fitted ones.
MFDeepGP condition(const MultiFidelityDataset& data, const FidelityLadder& ladder, const std::vector<KernelSpec>& kernels,
                   int propagation_samples);

/// Plug-in composed posterior mean through layers 1..level_index. This is the
/// augmented coordinate used when training the next layer.
double composed_mean(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x, int level_index);

/// `samples` = 0 uses the model's default propagation sample count.
LevelPrediction predict_level(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const FidelityLevel& level, std::uint64_t rng_seed, int samples = 0);

std::vector<LevelPrediction> predict_all_levels(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                                std::uint64_t rng_seed, int samples = 0);

/// Same pass as predict_all_levels, also returning the sample population.
std::vector<LevelPrediction> propagate(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       int up_to_level, std::uint64_t rng_seed, int samples,
                                       PropagationTrace* trace = nullptr);

void write_checkpoint(const MFDeepGP& model, const std::filesystem::path& path);
MFDeepGP read_checkpoint(const std::filesystem::path& path);

}  // namespace mfdgp
