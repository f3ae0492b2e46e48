#include "mfdgp/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include <gsl/gsl_qrng.h>

#include "mfdgp/error.hpp"
#include "mfdgp/minimize.hpp"
#include "mfdgp/rng.hpp"

namespace mfdgp {

std::string to_string(Phase phase) { return phase == Phase::InitialDesign ? "initial-design" : "bo-loop"; }

Phase phase_from_string(const std::string& name) {
  if (name == "initial-design") return Phase::InitialDesign;
  if (name == "bo-loop") return Phase::BoLoop;
  throw InputError("unknown campaign phase '" + name + "'");
}

bool EvaluationRecord::operator==(const EvaluationRecord& other) const {
  return x.size() == other.x.size() && x == other.x && level == other.level && y == other.y && cost == other.cost &&
         iteration == other.iteration && phase == other.phase;
}

int CampaignState::loop_iterations() const {
  return static_cast<int>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.phase == Phase::BoLoop; }));
}

namespace {

std::string describe_point(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ']';
  return os.str();
}

void track_incumbent(CampaignState& state, std::size_t index) {
  const auto& r = state.records[index];
  if (r.level.index != state.levels) return;
  if (!state.incumbent || r.y > state.records[*state.incumbent].y) state.incumbent = index;
}

DesignSpace unit_space(Eigen::Index d) { return DesignSpace(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)); }

}  // namespace

Eigen::MatrixXd latin_hypercube(int n, Eigen::Index dim, std::uint64_t rng_seed) {
  if (n < 1) throw InputError("latin_hypercube: n must be >= 1");
  Engine rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd points(n, dim);
  std::vector<int> strata(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < dim; ++j) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < n; ++i) points(i, j) = (strata[static_cast<std::size_t>(i)] + unit(rng)) / n;
  }
  return points;
}

void rebuild_ledger(CampaignState& state) {
  const auto t_count = static_cast<std::size_t>(state.levels);
  std::vector<double> initial_sum(t_count, 0.0);
  std::vector<int> initial_count(t_count, 0);
  state.budget_spent = 0.0;
  state.incumbent.reset();

  for (std::size_t i = 0; i < state.records.size(); ++i) {
    const auto& r = state.records[i];
    if (r.level.index < 1 || r.level.index > state.levels) throw InputError("record level outside the ladder");
    if (r.phase == Phase::InitialDesign) {
      initial_sum[static_cast<std::size_t>(r.level.index - 1)] += r.cost;
      ++initial_count[static_cast<std::size_t>(r.level.index - 1)];
    }
  }
  state.cost_model.tau.assign(t_count, 0.0);
  state.cost_model.counts = initial_count;
  for (std::size_t t = 0; t < t_count; ++t)
    if (initial_count[t] > 0) state.cost_model.tau[t] = initial_sum[t] / initial_count[t];

  for (std::size_t i = 0; i < state.records.size(); ++i) {
    const auto& r = state.records[i];
    state.budget_spent += r.cost;
    if (r.phase == Phase::BoLoop) state.cost_model = update_costs(std::move(state.cost_model), r.level, r.cost);
    track_incumbent(state, i);
  }
}

CampaignState initial_design(const MultiFidelityObjective& objective, const DesignSpace& space, int n,
                             std::uint64_t rng_seed, const RecordObserver& observer) {
  if (n < 1) throw InputError("initial design needs n >= 1");
  const FidelityLadder& ladder = objective.ladder();
  if (ladder.size() < 2) throw InputError("initial design needs at least two fidelity levels");
  if (space.dim() != objective.dimension()) throw InputShapeError("design space dimension does not match the objective");

  CampaignState state;
  state.levels = ladder.size();
  state.rng_seed = rng_seed;
  for (int t = 1; t <= ladder.size(); ++t) {
    const FidelityLevel level = ladder.level(t);
    const Eigen::MatrixXd unit = latin_hypercube(n, space.dim(), derive_seed(rng_seed, "design", static_cast<std::uint64_t>(t)));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x = space.from_unit(unit.row(i).transpose());
      Evaluation e;
      try {
        e = objective.evaluate(x, level);
        if (!std::isfinite(e.value) || !(e.cost > 0.0)) throw Error("objective returned invalid value or cost");
      } catch (const std::exception& ex) {
        throw CampaignInitError("initial design evaluation failed at x = " + describe_point(x) + ", level " +
                                std::to_string(t) + ": " + ex.what());
      }
      state.records.push_back({std::move(x), level, e.value, e.cost, 0, Phase::InitialDesign});
      if (observer) observer(state.records.back());
    }
  }
  rebuild_ledger(state);
  return state;
}

Eigen::VectorXd maximize_acquisition(const std::function<double(const Eigen::VectorXd&)>& acq, Eigen::Index dim,
                                     const UCBConfig& config, std::uint64_t rng_seed) {
  if (config.pool_size < 1 || config.restarts < 1) throw InputError("acquisition needs pool_size and restarts >= 1");
  if (dim < 1 || dim > 40) throw InputError("acquisition supports 1 to 40 dimensions");

  // Sobol points with a seeded random shift modulo 1 (Cranley-Patterson scrambling).
  std::unique_ptr<gsl_qrng, decltype(&gsl_qrng_free)> qrng(gsl_qrng_alloc(gsl_qrng_sobol, static_cast<unsigned>(dim)),
                                                          &gsl_qrng_free);
  Engine rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd shift(dim);
  for (Eigen::Index j = 0; j < dim; ++j) shift[j] = unit(rng);

  std::vector<Eigen::VectorXd> pool;
  std::vector<double> values;
  pool.reserve(static_cast<std::size_t>(config.pool_size));
  std::vector<double> buffer(static_cast<std::size_t>(dim));
  for (int i = 0; i < config.pool_size; ++i) {
    gsl_qrng_get(qrng.get(), buffer.data());
    Eigen::VectorXd u(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double v = buffer[static_cast<std::size_t>(j)] + shift[j];
      u[j] = v >= 1.0 ? v - 1.0 : v;
    }
    values.push_back(acq(u));
    pool.push_back(std::move(u));
  }

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  Eigen::VectorXd best = pool[order.front()];
  double best_value = values[order.front()];
  const double spacing = 1.0 / std::ceil(std::pow(static_cast<double>(config.pool_size), 1.0 / static_cast<double>(dim)));
  const std::size_t refine = std::min<std::size_t>(static_cast<std::size_t>(config.restarts), order.size());
  for (std::size_t k = 0; k < refine; ++k) {
    MinimizeResult res = pattern_search_max(acq, pool[order[k]], spacing, 1e-6);
    if (res.value > best_value) {
      best_value = res.value;
      best = res.x;
    }
  }
  return best;
}

Eigen::VectorXd solve_ucb(const MFDeepGP& model, const DesignSpace& space, const UCBConfig& config,
                          std::uint64_t rng_seed, int samples) {
  if (!model.trained()) throw StateError("solve_ucb needs a trained model");
  if (!(config.beta >= 0.0)) throw InputError("beta must be non-negative");
  if (space.dim() != model.input_dim()) throw InputShapeError("design space does not match the model dimension");
  const FidelityLevel top = model.ladder().highest();
  const double root_beta = std::sqrt(config.beta);
  // rng_seed doubles as the common-random-number seed of every candidate.
  auto acq = [&](const Eigen::VectorXd& u) {
    const LevelPrediction p = predict_level(model, space.from_unit(u), top, rng_seed, samples);
    return p.mu + root_beta * p.sigma;
  };
  const Eigen::VectorXd u = maximize_acquisition(acq, space.dim(), config, derive_seed(rng_seed, "pool"));
  return space.from_unit(u);
}

int choose_fidelity(const std::vector<double>& sigma, const std::vector<double>& tau, double beta) {
  if (sigma.empty() || sigma.size() != tau.size()) throw InputShapeError("sigma and tau must have one entry per level");
  if (!(beta >= 0.0)) throw InputError("beta must be non-negative");
  for (double t : tau)
    if (!(t > 0.0)) throw InputError("tau must be positive");
  const int top = static_cast<int>(sigma.size());
  // sqrt(beta) scales every score equally; it only matters when it is zero.
  if (beta == 0.0) return top;
  const double tau_max = *std::max_element(tau.begin(), tau.end());
  int chosen = top;
  double best = -std::numeric_limits<double>::infinity();
  for (int t = 1; t <= top; ++t) {
    const double gamma = tau_max / tau[static_cast<std::size_t>(t - 1)];
    const double score = gamma * sigma[static_cast<std::size_t>(t - 1)];
    if (score >= best) {
      best = score;
      chosen = t;
    }
  }
  return chosen;
}

FidelityLevel select_fidelity(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x_star,
                              const CostModel& cost, const UCBConfig& config, std::uint64_t rng_seed, int samples) {
  const auto preds = predict_all_levels(model, x_star, rng_seed, samples);
  std::vector<double> sigma;
  sigma.reserve(preds.size());
  for (const auto& p : preds) sigma.push_back(p.sigma);
  return model.ladder().level(choose_fidelity(sigma, cost.tau, config.beta));
}

CostModel update_costs(CostModel cost, const FidelityLevel& level, double observed_cost) {
  if (!(observed_cost > 0.0) || !std::isfinite(observed_cost)) throw InputError("observed cost must be positive");
  if (level.index < 1 || level.index > static_cast<int>(cost.tau.size())) throw InputError("level outside cost model");
  const auto t = static_cast<std::size_t>(level.index - 1);
  ++cost.counts[t];
  cost.tau[t] += (observed_cost - cost.tau[t]) / cost.counts[t];
  return cost;
}

MultiFidelityDataset campaign_dataset(const CampaignState& state, const DesignSpace& space, double noise_variance) {
  MultiFidelityDataset data;
  data.levels.resize(static_cast<std::size_t>(state.levels));
  std::vector<std::vector<const EvaluationRecord*>> by_level(static_cast<std::size_t>(state.levels));
  for (const auto& r : state.records) by_level[static_cast<std::size_t>(r.level.index - 1)].push_back(&r);
  for (std::size_t t = 0; t < by_level.size(); ++t) {
    auto& level = data.levels[t];
    const auto n = static_cast<Eigen::Index>(by_level[t].size());
    level.inputs.resize(n, space.dim());
    level.targets.resize(n);
    level.noise_variance = noise_variance;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto* r = by_level[t][static_cast<std::size_t>(i)];
      level.inputs.row(i) = space.to_unit(r->x).transpose();
      level.targets[i] = r->y;
    }
  }
  return data;
}

MFDeepGP train_campaign_model(const CampaignState& state, const DesignSpace& space, const FidelityLadder& ladder,
                              const CampaignOptions& options, int iteration) {
  DeepGPConfig config{options.kernel, options.fit_restarts,
                      derive_seed(state.rng_seed, "model", static_cast<std::uint64_t>(iteration)),
                      options.propagation_samples, options.linear_coupling,
                      options.min_signal_ratio};
  return train(campaign_dataset(state, space, options.noise_variance), ladder, config);
}

void continue_campaign(const MultiFidelityObjective& objective, const DesignSpace& space,
                       const CampaignOptions& options, CampaignState& state, const RecordObserver& observer) {
  const FidelityLadder& ladder = objective.ladder();
  if (state.levels != ladder.size()) throw StateError("campaign state does not match the objective's ladder");
  const DesignSpace unit = unit_space(space.dim());

  while (state.budget_spent < state.budget_total) {
    const int k = state.loop_iterations() + 1;
    const auto seed = state.rng_seed;
    const MFDeepGP model = train_campaign_model(state, space, ladder, options, k);
    const Eigen::VectorXd u = solve_ucb(model, unit, options.ucb, derive_seed(seed, "acquisition", static_cast<std::uint64_t>(k)),
                                        options.propagation_samples);
    const FidelityLevel level = select_fidelity(model, u, state.cost_model, options.ucb,
                                                derive_seed(seed, "propagation", static_cast<std::uint64_t>(k)),
                                                options.report_samples);
    Eigen::VectorXd x = space.from_unit(u);
    Evaluation e;
    try {
      e = objective.evaluate(x, level);
      if (!std::isfinite(e.value) || !(e.cost > 0.0)) throw Error("objective returned invalid value or cost");
    } catch (const std::exception& ex) {
      state.error = "evaluation failed at x = " + describe_point(x) + ", level " + std::to_string(level.index) + ": " +
                    ex.what();
      return;
    }
    state.records.push_back({std::move(x), level, e.value, e.cost, k, Phase::BoLoop});
    state.budget_spent += e.cost;
    state.cost_model = update_costs(std::move(state.cost_model), level, e.cost);
    track_incumbent(state, state.records.size() - 1);
    if (observer) observer(state.records.back());
  }
}

CampaignState run(const MultiFidelityObjective& objective, const DesignSpace& space, const CampaignOptions& options,
                  const RecordObserver& observer) {
  if (!(options.budget_total > 0.0)) throw InputError("budget_total must be positive");
  CampaignState state = initial_design(objective, space, options.n_initial, options.seed, observer);
  state.budget_total = options.budget_total;
  if (state.budget_spent >= state.budget_total) return state;
  continue_campaign(objective, space, options, state, observer);
  return state;
}

Recommendation recommend(const CampaignState& state, const MFDeepGP& model, const DesignSpace& space,
                         const UCBConfig& config, std::uint64_t rng_seed) {
  const EvaluationRecord* best = state.incumbent_record();
  if (!best) throw StateError("no highest-fidelity record to recommend");
  UCBConfig exploit = config;
  exploit.beta = 0.0;
  const Eigen::VectorXd u = solve_ucb(model, unit_space(space.dim()), exploit, rng_seed);
  return {*best, space.from_unit(u)};
}

}  // namespace mfdgp
