#include "mfdgp/results_log.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "mfdgp/error.hpp"
#include "mfdgp/rng.hpp"

namespace mfdgp {

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EvaluationRecord record_from_json(const nlohmann::json& j, const FidelityLadder& ladder, Eigen::Index dim) {
  const auto x = j.at("x").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(x.size()) != dim) throw Error("x has the wrong dimension");
  const int level = j.at("level").get<int>();
  if (level < 1 || level > ladder.size()) throw Error("level outside the ladder");
  if (j.at("nominal").get<double>() != ladder.level(level).nominal) throw Error("nominal does not match the ladder");
  EvaluationRecord r;
  r.x = Eigen::Map<const Eigen::VectorXd>(x.data(), dim);
  r.level = ladder.level(level);
  r.y = j.at("y").get<double>();
  r.cost = j.at("cost").get<double>();
  r.iteration = j.at("iteration").get<int>();
  r.phase = phase_from_string(j.at("phase").get<std::string>());
  if (!(r.cost > 0.0)) throw Error("cost must be positive");
  return r;
}

}  // namespace

ResultsLogWriter::ResultsLogWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc), path_(path) {
  if (!out_) throw ConfigError("cannot write results log " + path.string());
}

void ResultsLogWriter::write(const nlohmann::json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw Error("write to " + path_.string() + " failed");
}

void ResultsLogWriter::header(const CampaignConfig& config) {
  write({{"type", "header"}, {"format", "mfdgp-results"}, {"config", config_to_json(config)}});
}

void ResultsLogWriter::record(const EvaluationRecord& record) { write(record_to_json(record)); }

void ResultsLogWriter::resume(double extra_budget) { write({{"type", "resume"}, {"extra_budget", extra_budget}}); }

void ResultsLogWriter::error(const std::string& message) { write({{"type", "error"}, {"message", message}}); }

void ResultsLogWriter::summary(const nlohmann::json& summary) {
  nlohmann::json line = summary;
  line["type"] = "summary";
  write(line);
}

nlohmann::json record_to_json(const EvaluationRecord& r) {
  return {{"type", "record"},       {"iteration", r.iteration}, {"phase", to_string(r.phase)},
          {"level", r.level.index}, {"nominal", r.level.nominal}, {"x", to_vector(r.x)},
          {"y", r.y},               {"cost", r.cost}};
}

ReplayedLog read_results_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptLogError("cannot read results log " + path.string(), 0);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (text.empty()) throw CorruptLogError("results log is empty", 1);

  ReplayedLog log;
  std::optional<FidelityLadder> ladder;
  Eigen::Index dim = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) throw CorruptLogError("line " + std::to_string(line_no) + " is truncated", line_no);
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (line_no == 1) {
        if (type != "header" || j.at("format") != "mfdgp-results") throw Error("first line must be the log header");
        log.config = config_from_json(j.at("config"));
        validate_config(log.config);
        const auto objective = config_objective(log.config);
        ladder = objective->ladder();
        dim = objective->dimension();
        log.state.levels = ladder->size();
        log.state.rng_seed = log.config.seed;
        continue;
      }
      if (type == "record") {
        log.state.records.push_back(record_from_json(j, *ladder, dim));
        log.last_error.reset();
      } else if (type == "resume") {
        const double extra = j.at("extra_budget").get<double>();
        if (!(extra >= 0.0)) throw Error("extra budget must be non-negative");
        log.extra_budgets.push_back(extra);
        log.last_error.reset();
      } else if (type == "error") {
        log.last_error = j.at("message").get<std::string>();
      } else if (type == "summary") {
        log.last_summary = j;
      } else {
        throw Error("unknown line type '" + type + "'");
      }
    } catch (const std::exception& e) {
      throw CorruptLogError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }

  log.state.budget_total = log.config.budget;
  for (double extra : log.extra_budgets) log.state.budget_total += extra;
  try {
    rebuild_ledger(log.state);
  } catch (const std::exception& e) {
    throw CorruptLogError(std::string("records are inconsistent: ") + e.what(), line_no);
  }
  return log;
}

nlohmann::json campaign_summary(const CampaignState& state, const CampaignConfig& config,
                                const MultiFidelityObjective& objective, const DesignSpace& space) {
  nlohmann::json s;
  s["timestamp"] = utc_timestamp();
  s["objective"] = config.objective;
  s["seed"] = config.seed;
  s["budget_total"] = state.budget_total;
  s["budget_spent"] = state.budget_spent;
  s["records"] = state.records.size();
  std::vector<int> counts(static_cast<std::size_t>(state.levels), 0);
  for (const auto& r : state.records) ++counts[static_cast<std::size_t>(r.level.index - 1)];
  s["per_level_counts"] = counts;
  s["error"] = state.error ? nlohmann::json(*state.error) : nlohmann::json(nullptr);

  if (const auto* best = state.incumbent_record()) {
    s["incumbent"] = {{"x", to_vector(best->x)}, {"y", best->y}, {"level", best->level.index}};
  } else {
    s["incumbent"] = nullptr;
  }

  s["model_best"] = nullptr;
  const bool every_level_observed = std::all_of(counts.begin(), counts.end(), [](int c) { return c > 0; });
  if (every_level_observed) {
    const CampaignOptions options = config_options(config);
    const int k = state.loop_iterations() + 1;
    const MFDeepGP model = train_campaign_model(state, space, objective.ladder(), options, k);
    UCBConfig exploit = options.ucb;
    exploit.beta = 0.0;
    const std::uint64_t seed = derive_seed(state.rng_seed, "report", static_cast<std::uint64_t>(k));
    const Eigen::VectorXd u = solve_ucb(model, DesignSpace(Eigen::VectorXd::Zero(space.dim()), Eigen::VectorXd::Ones(space.dim())),
                                        exploit, seed, options.propagation_samples);
    const LevelPrediction p = predict_level(model, u, model.ladder().highest(), seed, options.report_samples);
    s["model_best"] = {{"x", to_vector(space.from_unit(u))}, {"mu", p.mu}, {"sigma", p.sigma}};
  }
  return s;
}

}  // namespace mfdgp
