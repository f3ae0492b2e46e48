#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfdgp/campaign.hpp"
#include "mfdgp/objective.hpp"

namespace mfdgp {

struct CampaignConfig {
  // [campaign]
  std::string objective = "forrester5";
  int n_initial = 1;
  double beta = 2.0;
  double budget = 60.0;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  // [space]; empty means the objective's default box
  std::vector<double> lower;
  std::vector<double> upper;
  // [fidelity]; empty nominals means the five-level ladder
  std::vector<double> nominals;
  std::vector<double> base_costs;
  // [acquisition]
  int restarts = 8;
  int pool_size = 512;
  // [model]
  KernelKind kernel = KernelKind::SquaredExponential;
  double noise_variance = 1e-8;
  int fit_restarts = 3;
  bool linear_coupling = true;
  double min_signal_ratio = 1e-2;
  int propagation_samples = 100;
  int report_samples = 2000;

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

/// Parses sectioned key/value text. Unknown sections or keys, malformed values
/// and failed validation throw ConfigError.
CampaignConfig parse_config(std::istream& in);
CampaignConfig load_config(const std::filesystem::path& path);

/// Commented template whose values are the built-in defaults.
void write_config_template(std::ostream& out, const CampaignConfig& config = {});

/// Throws ConfigError when the configuration cannot drive a campaign.
void validate_config(const CampaignConfig& config);

nlohmann::json config_to_json(const CampaignConfig& config);
CampaignConfig config_from_json(const nlohmann::json& j);

FidelityLadder config_ladder(const CampaignConfig& config);
std::unique_ptr<MultiFidelityObjective> config_objective(const CampaignConfig& config);
DesignSpace config_space(const CampaignConfig& config, const MultiFidelityObjective& objective);
CampaignOptions config_options(const CampaignConfig& config);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace mfdgp
