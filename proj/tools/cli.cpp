#include "cli.hpp"

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mfdgp/config.hpp"
#include "mfdgp/error.hpp"
#include "mfdgp/reactor.hpp"
#include "mfdgp/results_log.hpp"
#include "mfdgp/rng.hpp"

namespace fs = std::filesystem;

namespace mfdgp::cli {

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool force = false;
};

struct ExitWith {
  int code;
  std::string message;
};

CampaignConfig resolve_config(const Globals& g) {
  CampaignConfig config = g.config_path.empty() ? CampaignConfig{} : load_config(g.config_path);
  if (g.seed) config.seed = *g.seed;
  if (!g.out_dir.empty()) config.output_dir = g.out_dir;
  validate_config(config);
  return config;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ExitWith{kConfigError, "cannot create output directory " + dir.string() + ": " + ec.message()};
}

void write_summary_file(const fs::path& path, const nlohmann::json& summary) {
  std::ofstream out(path);
  out << summary.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

std::string csv_value(double v) { return format_double(v); }

int finish_campaign(const CampaignState& state, const CampaignConfig& config, const MultiFidelityObjective& objective,
                    const DesignSpace& space, ResultsLogWriter& writer, const fs::path& summary_path, std::ostream& out,
                    std::ostream& err) {
  if (state.error) writer.error(*state.error);
  const nlohmann::json summary = campaign_summary(state, config, objective, space);
  writer.summary(summary);
  write_summary_file(summary_path, summary);
  if (state.error) {
    err << "objective failure: " << *state.error << "\n";
    return kObjectiveFailure;
  }
  out << "records: " << state.records.size() << ", budget spent " << format_double(state.budget_spent) << " of "
      << format_double(state.budget_total) << "\n";
  if (const auto* best = state.incumbent_record()) out << "incumbent y = " << format_double(best->y) << "\n";
  return kOk;
}

int cmd_init(const Globals& g, const std::string& positional, std::ostream& out) {
  const fs::path path = !positional.empty() ? fs::path(positional) : !g.config_path.empty() ? fs::path(g.config_path)
                                                                                            : fs::path("campaign.ini");
  if (fs::exists(path) && !g.force) throw ExitWith{kConfigError, path.string() + " exists; pass --force to overwrite"};
  std::ofstream file(path);
  if (!file) throw ExitWith{kConfigError, "cannot write " + path.string()};
  write_config_template(file);
  file.close();
  if (!file) throw ExitWith{kConfigError, "cannot write " + path.string()};
  out << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_run(const Globals& g, std::ostream& out, std::ostream& err) {
  const CampaignConfig config = resolve_config(g);
  const auto objective = config_objective(config);
  const DesignSpace space = config_space(config, *objective);
  const fs::path dir = config.output_dir;
  ensure_dir(dir);
  const fs::path log_path = dir / "results.jsonl";
  if (fs::exists(log_path) && !g.force)
    throw ExitWith{kConfigError, log_path.string() + " exists; pass --force to overwrite"};

  ResultsLogWriter writer(log_path, false);
  writer.header(config);
  CampaignState state;
  try {
    state = run(*objective, space, config_options(config), [&](const EvaluationRecord& r) { writer.record(r); });
  } catch (const CampaignInitError& e) {
    state = read_results_log(log_path).state;
    state.error = e.what();
  }
  return finish_campaign(state, config, *objective, space, writer, dir / "summary.json", out, err);
}

fs::path default_log(const Globals& g, const std::string& positional) {
  if (!positional.empty()) return positional;
  return fs::path(g.out_dir.empty() ? CampaignConfig{}.output_dir : g.out_dir) / "results.jsonl";
}

int cmd_resume(const Globals& g, const std::string& positional, double extra_budget, std::ostream& out,
               std::ostream& err) {
  if (!(extra_budget >= 0.0)) throw ExitWith{kConfigError, "--extra-budget must be non-negative"};
  const fs::path log_path = default_log(g, positional);
  ReplayedLog log = read_results_log(log_path);
  if (g.seed && *g.seed != log.config.seed)
    throw ExitWith{kConfigError, "the log was written with seed " + std::to_string(log.config.seed)};
  const auto objective = config_objective(log.config);
  const DesignSpace space = config_space(log.config, *objective);
  const int expected_initial = log.config.n_initial * objective->ladder().size();
  const auto initial = std::count_if(log.state.records.begin(), log.state.records.end(),
                                     [](const auto& r) { return r.phase == Phase::InitialDesign; });
  if (initial != expected_initial)
    throw ExitWith{kObjectiveFailure, "the initial design in " + log_path.string() + " is incomplete; rerun the campaign"};

  ResultsLogWriter writer(log_path, true);
  writer.resume(extra_budget);
  CampaignState state = std::move(log.state);
  state.budget_total += extra_budget;
  state.error.reset();
  continue_campaign(*objective, space, config_options(log.config), state,
                    [&](const EvaluationRecord& r) { writer.record(r); });
  const fs::path summary_dir = g.out_dir.empty() ? log_path.parent_path() : fs::path(g.out_dir);
  if (!summary_dir.empty()) ensure_dir(summary_dir);
  return finish_campaign(state, log.config, *objective, space, writer, summary_dir / "summary.json", out, err);
}

int cmd_validate_fidelity(const Globals& g, const std::vector<double>& geometry_values, std::ostream& out) {
  const CampaignConfig config = resolve_config(g);
  if (config.objective != "reactor-proxy")
    throw ExitWith{kConfigError, "validate-fidelity needs objective = reactor-proxy"};
  ReactorGeometry geom;
  if (!geometry_values.empty()) {
    geom.coil_radius = geometry_values.at(0);
    geom.tube_radius = geometry_values.at(1);
    geom.pitch = geometry_values.at(2);
    geom.inversion_fraction = geometry_values.at(3);
  }
  try {
    geom.validate();
  } catch (const Error& e) {
    throw ExitWith{kConfigError, std::string("invalid geometry: ") + e.what()};
  }
  const FidelityLadder ladder = config_ladder(config);
  const fs::path dir = config.output_dir;
  ensure_dir(dir);

  std::ostringstream table;
  table << "level,nominal,cells,peclet,n_tanks,cost\n";
  for (int t = 1; t <= ladder.size(); ++t) {
    const FidelityLevel level = ladder.level(t);
    ProxySimulation sim;
    PlugFlowMetric metric;
    try {
      sim = reactor_proxy_simulate(geom, level, derive_seed(config.seed, "cost"), config.base_costs);
      metric = fit_tanks_in_series(sim.curve);
    } catch (const InputError& e) {
      throw ExitWith{kConfigError, e.what()};
    } catch (const Error& e) {
      throw ExitWith{kObjectiveFailure, "level " + std::to_string(level.index) + ": " + e.what()};
    }
    write_rtd_csv(sim.curve, dir / ("rtd_level" + std::to_string(level.index) + ".csv"));
    table << level.index << ',' << csv_value(level.nominal) << ',' << sim.cells << ',' << csv_value(sim.peclet) << ','
          << csv_value(metric.n_tanks) << ',' << csv_value(sim.cost) << '\n';
  }
  std::ofstream file(dir / "fidelity_table.csv");
  file << table.str();
  if (!file) throw Error("cannot write fidelity table");
  out << table.str();
  return kOk;
}

int cmd_report(const Globals& g, const std::string& positional, std::ostream& out) {
  const fs::path log_path = default_log(g, positional);
  const ReplayedLog log = read_results_log(log_path);
  const fs::path dir = g.out_dir.empty() ? log_path.parent_path() : fs::path(g.out_dir);
  if (!dir.empty()) ensure_dir(dir);
  const CampaignState& state = log.state;
  const int top = state.levels;

  std::ofstream conv(dir / "convergence.csv");
  std::ofstream timeline(dir / "fidelity_timeline.csv");
  conv << "evaluation,iteration,phase,level,cumulative_cost,incumbent\n";
  timeline << "evaluation,iteration,phase,level,nominal,cost\n";
  double cumulative = 0.0;
  std::optional<double> incumbent;
  std::vector<int> counts(static_cast<std::size_t>(top), 0);
  for (std::size_t i = 0; i < state.records.size(); ++i) {
    const auto& r = state.records[i];
    cumulative += r.cost;
    if (r.level.index == top && (!incumbent || r.y > *incumbent)) incumbent = r.y;
    ++counts[static_cast<std::size_t>(r.level.index - 1)];
    conv << i + 1 << ',' << r.iteration << ',' << to_string(r.phase) << ',' << r.level.index << ','
         << csv_value(cumulative) << ',' << (incumbent ? csv_value(*incumbent) : std::string()) << '\n';
    timeline << i + 1 << ',' << r.iteration << ',' << to_string(r.phase) << ',' << r.level.index << ','
             << csv_value(r.level.nominal) << ',' << csv_value(r.cost) << '\n';
  }
  if (!conv || !timeline) throw Error("cannot write report CSVs");

  std::ostringstream summary;
  summary << "objective: " << log.config.objective << "\n";
  summary << "seed: " << log.config.seed << "\n";
  summary << "records: " << state.records.size() << "\n";
  summary << "budget: " << format_double(state.budget_spent) << " spent of " << format_double(state.budget_total) << "\n";
  summary << "evaluations per level:\n";
  for (int t = 1; t <= top; ++t) summary << "  level " << t << ": " << counts[static_cast<std::size_t>(t - 1)] << "\n";
  if (const auto* best = state.incumbent_record())
    summary << "incumbent: y = " << format_double(best->y) << " (evaluation "
            << (*state.incumbent + 1) << ")\n";
  else
    summary << "incumbent: none\n";
  if (log.last_error) summary << "last run stopped on: " << *log.last_error << "\n";
  std::ofstream text(dir / "summary.txt");
  text << summary.str();
  if (!text) throw Error("cannot write summary.txt");
  out << summary.str();
  return kOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-fidelity deep GP Bayesian optimization", "mfdgp"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Campaign configuration file");
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_flag("--force", g.force, "Overwrite existing files");

  std::string init_path;
  auto* init = app.add_subcommand("init", "Write a commented configuration template");
  init->add_option("path", init_path, "Destination (default: --config or campaign.ini)");

  app.add_subcommand("run", "Run a campaign and stream records to <out>/results.jsonl");

  std::string resume_log;
  double extra_budget = 0.0;
  auto* resume = app.add_subcommand("resume", "Continue a logged campaign with extra budget");
  resume->add_option("log", resume_log, "Results log (default: <out>/results.jsonl)");
  resume->add_option("--extra-budget", extra_budget, "Budget added to the logged total")->required();

  std::vector<double> geometry;
  auto* validate = app.add_subcommand("validate-fidelity", "Simulate every fidelity level at one reactor geometry");
  validate->add_option("--geometry", geometry, "coil_radius,tube_radius,pitch,inversion_fraction")
      ->expected(4)
      ->delimiter(',');

  std::string report_log;
  auto* report = app.add_subcommand("report", "Write convergence and fidelity-timeline CSVs from a results log");
  report->add_option("log", report_log, "Results log (default: <out>/results.jsonl)");

  std::vector<const char*> argv{"mfdgp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (init->parsed()) return cmd_init(g, init_path, out);
    if (resume->parsed()) return cmd_resume(g, resume_log, extra_budget, out, err);
    if (validate->parsed()) return cmd_validate_fidelity(g, geometry, out);
    if (report->parsed()) return cmd_report(g, report_log, out);
    return cmd_run(g, out, err);
  } catch (const ExitWith& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const CorruptLogError& e) {
    err << "corrupt log: " << e.what() << "\n";
    return kCorruptLog;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const SimulationDivergedError& e) {
    err << "simulation failure: " << e.what() << "\n";
    return kObjectiveFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kObjectiveFailure;
  }
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable table;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw std::runtime_error(path.string() + " has no header");
  table.header = split(line);
  while (std::getline(in, line)) {
    auto cells = split(line);
    if (cells.size() != table.header.size())
      throw std::runtime_error(path.string() + ": row " + std::to_string(table.rows.size() + 1) + " has " +
                               std::to_string(cells.size()) + " columns");
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace mfdgp::cli
