#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfdgp/campaign.hpp"
#include "mfdgp/config.hpp"

namespace mfdgp {

/// Line-delimited JSON log. Line 1 is a header holding the configuration; then
/// one "record" line per evaluation, interleaved with "resume", "error" and
/// "summary" lines.
class ResultsLogWriter {
 public:
  /// Truncates the file when append is false.
  ResultsLogWriter(const std::filesystem::path& path, bool append);

  void header(const CampaignConfig& config);
  void record(const EvaluationRecord& record);
  void resume(double extra_budget);
  void error(const std::string& message);
  void summary(const nlohmann::json& summary);

 private:
  void write(const nlohmann::json& line);
  std::ofstream out_;
  std::filesystem::path path_;
};

nlohmann::json record_to_json(const EvaluationRecord& record);

struct ReplayedLog {
  CampaignConfig config;
  CampaignState state;  // ledger rebuilt from the records
  std::vector<double> extra_budgets;
  std::optional<std::string> last_error;  // set when the last run stopped on an objective failure
  std::optional<nlohmann::json> last_summary;
};

/// Throws CorruptLogError naming the first bad line, including a final line
/// without its newline.
ReplayedLog read_results_log(const std::filesystem::path& path);

/// incumbent, model_best, budget figures and per-level counts. The timestamp is
/// the only field that differs between identical runs.
nlohmann::json campaign_summary(const CampaignState& state, const CampaignConfig& config,
                                const MultiFidelityObjective& objective, const DesignSpace& space);

}  // namespace mfdgp
