#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mfdgp/deep_gp.hpp"
#include "mfdgp/objective.hpp"

namespace mfdgp {

/// Running mean evaluation cost per fidelity (tau) and evaluation counts.
struct CostModel {
  std::vector<double> tau;
  std::vector<int> counts;

  friend bool operator==(const CostModel&, const CostModel&) = default;
};

/// The whole configuration surface of the acquisition. Fidelity selection
/// adds nothing to it: its weights derive from recorded costs.
struct UCBConfig {
  double beta = 2.0;
  int restarts = 8;
  int pool_size = 512;
};

enum class Phase { InitialDesign, BoLoop };

std::string to_string(Phase phase);
Phase phase_from_string(const std::string& name);

struct EvaluationRecord {
  Eigen::VectorXd x;
  FidelityLevel level;
  double y = 0.0;
  double cost = 0.0;
  int iteration = 0;  // 0 during the initial design, then 1, 2, ... per loop pass
  Phase phase = Phase::InitialDesign;

  bool operator==(const EvaluationRecord& other) const;
};

struct CampaignState {
  std::vector<EvaluationRecord> records;
  CostModel cost_model;
  double budget_total = 0.0;
  double budget_spent = 0.0;
  std::uint64_t rng_seed = 0;
  std::optional<std::size_t> incumbent;  // index into records
  std::optional<std::string> error;      // set when an evaluation failed mid-loop
  int levels = 0;

  const EvaluationRecord* incumbent_record() const { return incumbent ? &records[*incumbent] : nullptr; }
  int loop_iterations() const;
};

struct CampaignOptions {
  int n_initial = 1;
  UCBConfig ucb;
  double budget_total = 0.0;
  std::uint64_t seed = 0;
  KernelKind kernel = KernelKind::SquaredExponential;
  int fit_restarts = 3;
  bool linear_coupling = true;
  double min_signal_ratio = 1e-2;
  double noise_variance = 1e-8;
  int propagation_samples = 100;  // acquisition solves
  int report_samples = 2000;      // fidelity selection and reporting
};

using RecordObserver = std::function<void(const EvaluationRecord&)>;

/// n Latin-hypercube points per design dimension in [0,1]^d.
Eigen::MatrixXd latin_hypercube(int n, Eigen::Index dim, std::uint64_t rng_seed);

CampaignState initial_design(const MultiFidelityObjective& objective, const DesignSpace& space, int n,
                             std::uint64_t rng_seed, const RecordObserver& observer = {});

/// Maximizes acq over [0,1]^d: scrambled Sobol pool, then compass search from the best `restarts` points.
Eigen::VectorXd maximize_acquisition(const std::function<double(const Eigen::VectorXd&)>& acq, Eigen::Index dim,
                                     const UCBConfig& config, std::uint64_t rng_seed);

/// argmax_x mu_T(x) + sqrt(beta) sigma_T(x) over the space. Every candidate is
/// scored with predict_level(model, x, T, rng_seed, samples) (common random numbers).
Eigen::VectorXd solve_ucb(const MFDeepGP& model, const DesignSpace& space, const UCBConfig& config,
                          std::uint64_t rng_seed, int samples = 0);

/// argmax_t gamma_t sqrt(beta) sigma_t with gamma_t = max(tau) / tau_t, ties to the highest level.
int choose_fidelity(const std::vector<double>& sigma, const std::vector<double>& tau, double beta);

FidelityLevel select_fidelity(const MFDeepGP& model, const Eigen::Ref<const Eigen::VectorXd>& x_star,
                              const CostModel& cost, const UCBConfig& config, std::uint64_t rng_seed,
                              int samples = 0);

CostModel update_costs(CostModel cost, const FidelityLevel& level, double observed_cost);

/// Training set of every level with design points mapped into [0,1]^d.
MultiFidelityDataset campaign_dataset(const CampaignState& state, const DesignSpace& space, double noise_variance);

MFDeepGP train_campaign_model(const CampaignState& state, const DesignSpace& space, const FidelityLadder& ladder,
                              const CampaignOptions& options, int iteration);

/// Runs the loop on an existing state until budget_spent >= budget_total.
void continue_campaign(const MultiFidelityObjective& objective, const DesignSpace& space,
                       const CampaignOptions& options, CampaignState& state, const RecordObserver& observer = {});

CampaignState run(const MultiFidelityObjective& objective, const DesignSpace& space, const CampaignOptions& options,
                  const RecordObserver& observer = {});

struct Recommendation {
  EvaluationRecord observed_best;
  Eigen::VectorXd model_best;
};

/// Best observed highest-level record and the maximizer of the highest-level
/// posterior mean (solve_ucb with beta = 0).
Recommendation recommend(const CampaignState& state, const MFDeepGP& model, const DesignSpace& space,
                         const UCBConfig& config, std::uint64_t rng_seed);

/// Rebuilds cost model, spent budget and incumbent from the record list,
/// replaying the same arithmetic as the live loop.
void rebuild_ledger(CampaignState& state);

}  // namespace mfdgp
