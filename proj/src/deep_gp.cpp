#include "mfdgp/deep_gp.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "mfdgp/error.hpp"
#include "mfdgp/rng.hpp"

namespace mfdgp {

FidelityLadder::FidelityLadder(std::vector<double> nominals) : nominals_(std::move(nominals)) {
  if (nominals_.size() < 2) throw InputError("fidelity ladder needs at least two levels");
  for (std::size_t i = 0; i < nominals_.size(); ++i) {
    if (!(nominals_[i] >= 0.0 && nominals_[i] <= 1.0)) throw InputError("fidelity nominals must lie in [0, 1]");
    if (i > 0 && !(nominals_[i] > nominals_[i - 1]))
      throw InputError("fidelity nominals must be strictly increasing");
  }
}

FidelityLadder FidelityLadder::default_five() { return FidelityLadder({0.0, 0.25, 0.5, 0.75, 1.0}); }

FidelityLevel FidelityLadder::level(int index) const {
  if (index < 1 || index > size())
    throw InputError("fidelity level " + std::to_string(index) + " outside ladder of size " + std::to_string(size()));
  return {index, nominals_[static_cast<std::size_t>(index - 1)]};
}

void MultiFidelityDataset::validate() const {
  if (levels.size() < 2) throw InputError("multi-fidelity dataset needs at least two levels");
  const Eigen::Index d = levels.front().dim();
  for (std::size_t t = 0; t < levels.size(); ++t) {
    if (levels[t].size() < 1)
      throw InsufficientDataError("fidelity level " + std::to_string(t + 1) + " has no observations");
    if (levels[t].dim() != d)
      throw InputShapeError("fidelity level " + std::to_string(t + 1) + " has input dimension " +
                            std::to_string(levels[t].dim()) + ", expected " + std::to_string(d));
    levels[t].validate();
  }
}

MFDeepGP::MFDeepGP(std::vector<TrainedGP> layers, FidelityLadder ladder, int propagation_samples)
    : layers_(std::move(layers)), ladder_(std::move(ladder)), samples_(propagation_samples) {
  if (static_cast<int>(layers_.size()) != ladder_.size())
    throw InputShapeError("layer count does not match the fidelity ladder");
  if (samples_ < 1) throw InputError("propagation_samples must be >= 1");
  const Eigen::Index d = layers_.front().input_dim();
  for (std::size_t t = 1; t < layers_.size(); ++t)
    if (layers_[t].input_dim() != d + 1) throw InputShapeError("layer inputs must be the design point plus one");
}

Eigen::Index MFDeepGP::input_dim() const {
  if (!trained()) throw StateError("model is not trained");
  return layers_.front().input_dim();
}

const TrainedGP& MFDeepGP::layer(int level_index) const {
  if (!trained()) throw StateError("model is not trained");
  if (level_index < 1 || level_index > levels()) throw InputError("layer index out of range");
  return layers_[static_cast<std::size_t>(level_index - 1)];
}

namespace {

double composed_mean_prefix(const std::vector<TrainedGP>& layers, const Eigen::Ref<const Eigen::VectorXd>& x,
                            std::size_t count) {
  double m = layers[0].predict_point(x).first;
  Eigen::VectorXd aug(x.size() + 1);
  aug.head(x.size()) = x;
  for (std::size_t t = 1; t < count; ++t) {
    aug[x.size()] = m;
    m = layers[t].predict_point(aug).first;
  }
  return m;
}

}  // namespace

namespace {

using LayerBuilder = std::function<TrainedGP(std::size_t level, GPDataset augmented)>;

std::vector<TrainedGP> compose_layers(const MultiFidelityDataset& data, const LayerBuilder& build) {
  std::vector<TrainedGP> layers;
  layers.reserve(data.levels.size());
  for (std::size_t t = 0; t < data.levels.size(); ++t) {
    GPDataset level = data.levels[t];
    if (t > 0) {
      const Eigen::Index n = level.size();
      const Eigen::Index d = level.dim();
      Eigen::MatrixXd augmented(n, d + 1);
      augmented.leftCols(d) = level.inputs;
      for (Eigen::Index i = 0; i < n; ++i)
        augmented(i, d) = composed_mean_prefix(layers, level.inputs.row(i).transpose(), t);
      level.inputs = std::move(augmented);
    }
    layers.push_back(build(t, std::move(level)));
  }
  return layers;
}

void check_ladder(const MultiFidelityDataset& data, const FidelityLadder& ladder) {
  data.validate();
  if (data.size() != ladder.size())
    throw InputShapeError("dataset has " + std::to_string(data.size()) + " levels, ladder has " +
                          std::to_string(ladder.size()));
}

}  // namespace

MFDeepGP train(const MultiFidelityDataset& data, const FidelityLadder& ladder, const DeepGPConfig& config) {
  check_ladder(data, ladder);

  // Every level observes the same quantity, so hyperparameter boxes come from
  // the pooled data rather than from the (often tiny) per-level samples.
  const Eigen::Index d = data.levels.front().dim();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  double sum = 0.0, sum_sq = 0.0;
  Eigen::Index count = 0;
  for (const auto& level : data.levels) {
    lo = lo.cwiseMin(level.inputs.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(level.inputs.colwise().maxCoeff().transpose());
    y_min = std::min(y_min, level.targets.minCoeff());
    y_max = std::max(y_max, level.targets.maxCoeff());
    sum += level.targets.sum();
    sum_sq += level.targets.squaredNorm();
    count += level.size();
  }
  const double mean = sum / count;
  const double mean_sq = sum_sq / count;
  const double var = mean_sq - mean * mean;
  FitScales scales;
  scales.input_range = Eigen::VectorXd(d + 1);
  for (Eigen::Index j = 0; j < d; ++j) scales.input_range[j] = hi[j] > lo[j] ? hi[j] - lo[j] : 1.0;
  scales.input_range[d] = y_max > y_min ? y_max - y_min : 1.0;
  scales.target_variance = var > 1e-12 * mean_sq ? var : (mean_sq > 0.0 ? mean_sq : 1.0);
  scales.min_signal_ratio = config.min_signal_ratio;
  scales.coupling_mean_square = mean_sq > 0.0 ? mean_sq : 1.0;

  auto layers = compose_layers(data, [&](std::size_t t, GPDataset level) {
    FitScales layer_scales = scales;
    if (t == 0) layer_scales.input_range.conservativeResize(d);
    KernelSpec init{config.kernel, 0.5 * layer_scales.input_range, scales.target_variance, std::nullopt};
    if (t > 0 && config.linear_coupling)
      init.coupling = LinearCoupling{scales.target_variance / scales.coupling_mean_square, init.lengthscales.head(d)};
    return fit(level, init, config.fit_restarts, derive_seed(config.seed, "layer", t + 1), layer_scales);
  });
  return MFDeepGP(std::move(layers), ladder, config.propagation_samples);
}

MFDeepGP condition(const MultiFidelityDataset& data, const FidelityLadder& ladder, const std::vector<KernelSpec>& kernels,
                   int propagation_samples) {
  check_ladder(data, ladder);
  if (static_cast<int>(kernels.size()) != data.size()) throw InputShapeError("one kernel per level is required");
  auto layers = compose_layers(data, [&](std::size_t t, GPDataset level) { return TrainedGP(std::move(level), kernels[t]); });
  return MFDeepGP(std::move(layers), ladder, propagation_samples);
}

double composed_mean(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x, int level_index) {
  if (!model.trained()) throw StateError("model is not trained");
  if (level_index < 1 || level_index > model.levels()) throw InputError("level index out of range");
  if (x.size() != model.input_dim()) throw InputShapeError("query dimension does not match the model");
  return composed_mean_prefix(model.layers(), x, static_cast<std::size_t>(level_index));
}

std::vector<LevelPrediction> propagate(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       int up_to_level, std::uint64_t rng_seed, int samples,
                                       PropagationTrace* trace) {
  if (!model.trained()) throw StateError("model is not trained");
  if (x.size() != model.input_dim()) throw InputShapeError("query dimension does not match the model");
  if (up_to_level < 1 || up_to_level > model.levels()) throw InputError("level index out of range");
  if (samples <= 0) samples = model.propagation_samples();

  std::vector<LevelPrediction> out;
  out.reserve(static_cast<std::size_t>(up_to_level));
  if (trace) {
    trace->means.clear();
    trace->variances.clear();
  }

  const auto [m1, v1] = model.layer(1).predict_point(x);
  out.push_back({m1, std::sqrt(v1)});
  if (trace) {
    trace->means.push_back(Eigen::VectorXd::Constant(1, m1));
    trace->variances.push_back(Eigen::VectorXd::Constant(1, v1));
  }
  if (up_to_level == 1) return out;

  // Draws for level t come from their own substream, so every prefix of the
  // recursion is reproduced exactly whatever the requested depth.
  auto draw = [&](int level_index, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
    Engine rng(derive_seed(rng_seed, static_cast<std::uint64_t>(level_index)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd f(samples);
    for (int s = 0; s < samples; ++s) f[s] = mean[s] + std::sqrt(var[s]) * normal(rng);
    return f;
  };

  const Eigen::Index d = x.size();
  Eigen::VectorXd f = draw(1, Eigen::VectorXd::Constant(samples, m1), Eigen::VectorXd::Constant(samples, v1));
  Eigen::VectorXd aug(d + 1);
  aug.head(d) = x;
  Eigen::VectorXd means(samples), vars(samples);
  for (int t = 2; t <= up_to_level; ++t) {
    const TrainedGP& layer = model.layer(t);
    for (int s = 0; s < samples; ++s) {
      aug[d] = f[s];
      auto [m, v] = layer.predict_point(aug);
      means[s] = m;
      vars[s] = v;
    }
    const double mu = means.mean();
    const double var = vars.mean() + (means.array() - mu).square().mean();
    out.push_back({mu, std::sqrt(std::max(var, 0.0))});
    if (trace) {
      trace->means.push_back(means);
      trace->variances.push_back(vars);
    }
    if (t < up_to_level) f = draw(t, means, vars);
  }
  return out;
}

LevelPrediction predict_level(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const FidelityLevel& level, std::uint64_t rng_seed, int samples) {
  return propagate(model, x, level.index, rng_seed, samples).back();
}

std::vector<LevelPrediction> predict_all_levels(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                                std::uint64_t rng_seed, int samples) {
  if (!model.trained()) throw StateError("model is not trained");
  return propagate(model, x, model.levels(), rng_seed, samples);
}

// Checkpoint format: one JSON document holding the ladder and, per layer, the
// kernel and the (augmented) training set. Factorizations are recomputed on load.

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_checkpoint(const MFDeepGP& model, const std::filesystem::path& path) {
  if (!model.trained()) throw StateError("cannot checkpoint an untrained model");
  nlohmann::json doc;
  doc["format"] = "mfdgp-checkpoint";
  doc["version"] = 1;
  doc["ladder"] = model.ladder().nominals();
  doc["propagation_samples"] = model.propagation_samples();
  doc["layers"] = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    const auto& k = layer.kernel();
    const auto& data = layer.dataset();
    nlohmann::json coupling = nullptr;
    if (k.coupling)
      coupling = {{"linear_variance", k.coupling->linear_variance},
                  {"lengthscales", std::vector<double>(k.coupling->lengthscales.data(),
                                                       k.coupling->lengthscales.data() + k.coupling->lengthscales.size())}};
    doc["layers"].push_back({
        {"coupling", coupling},
        {"kernel", to_string(k.kind)},
        {"lengthscales", std::vector<double>(k.lengthscales.data(), k.lengthscales.data() + k.lengthscales.size())},
        {"signal_variance", k.signal_variance},
        {"noise_variance", data.noise_variance},
        {"inputs", matrix_to_json(data.inputs)},
        {"targets", std::vector<double>(data.targets.data(), data.targets.data() + data.targets.size())},
    });
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << doc.dump(2) << '\n';
}

MFDeepGP read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (doc.at("format") != "mfdgp-checkpoint") throw Error("not a model checkpoint: " + path.string());
    FidelityLadder ladder(doc.at("ladder").get<std::vector<double>>());
    std::vector<TrainedGP> layers;
    for (const auto& jl : doc.at("layers")) {
      KernelSpec kernel{kernel_kind_from_string(jl.at("kernel").get<std::string>()), vector_from_json(jl.at("lengthscales")),
                        jl.at("signal_variance").get<double>(), std::nullopt};
      if (const auto& jc = jl.at("coupling"); !jc.is_null())
        kernel.coupling = LinearCoupling{jc.at("linear_variance").get<double>(), vector_from_json(jc.at("lengthscales"))};
      GPDataset data;
      const auto& rows = jl.at("inputs");
      data.inputs.resize(static_cast<Eigen::Index>(rows.size()), kernel.lengthscales.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto row = rows[i].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != data.inputs.cols())
          throw InputShapeError("checkpoint row width mismatch");
        for (std::size_t j = 0; j < row.size(); ++j)
          data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
      }
      data.targets = vector_from_json(jl.at("targets"));
      data.noise_variance = jl.at("noise_variance").get<double>();
      layers.emplace_back(std::move(data), std::move(kernel));
    }
    return MFDeepGP(std::move(layers), std::move(ladder), doc.at("propagation_samples").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace mfdgp
