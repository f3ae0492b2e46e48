#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mfdgp/config.hpp"
#include "mfdgp/error.hpp"
#include "mfdgp/reactor.hpp"
#include "mfdgp/results_log.hpp"

using namespace mfdgp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mfdgp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> lines;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

/// Header and record lines only; summary lines carry a timestamp.
std::vector<std::string> record_lines(const fs::path& log) {
  std::vector<std::string> kept;
  for (const auto& line : lines_of(log))
    if (line.find("\"type\":\"record\"") != std::string::npos) kept.push_back(line);
  return kept;
}

fs::path write_config(const fs::path& dir, const std::string& extra_campaign, const std::string& tail = "") {
  const fs::path path = dir / "campaign.ini";
  std::ofstream out(path);
  out << "[campaign]\n" << extra_campaign << "output_dir = " << (dir / "out").string() << "\n" << tail;
  return path;
}

void check_replayed_ledger(const CampaignState& s) {
  double sum = 0.0;
  for (const auto& r : s.records) sum += r.cost;
  CHECK(std::abs(s.budget_spent - sum) <= 1e-9);
  const EvaluationRecord* best = nullptr;
  for (const auto& r : s.records)
    if (r.level.index == s.levels && (!best || r.y > best->y)) best = &r;
  if (best) {
    REQUIRE(s.incumbent_record() != nullptr);
    CHECK(s.incumbent_record()->y == best->y);
  }
  if (!s.records.empty() && s.records.back().phase == Phase::BoLoop && s.budget_spent >= s.budget_total)
    CHECK(s.budget_spent - s.budget_total < s.records.back().cost);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config template parses back to the built-in defaults") {
  std::stringstream text;
  write_config_template(text);
  CHECK(text.str().find("; ") != std::string::npos);
  CHECK(parse_config(text) == CampaignConfig{});
}

TEST_CASE("config parser is fail-closed") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_config(in);
  };
  CHECK(parse("[campaign]\nbudget = 12.5\nseed = 9\n").budget == 12.5);
  CHECK(parse("[model]\nkernel = matern-5/2\n").kernel == KernelKind::Matern52);
  CHECK(parse("[space]\nlower = 0.1\nupper = 0.9\n").upper == std::vector<double>{0.9});
  CHECK_THROWS_AS(parse("[campaign]\nbudgett = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[extras]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("budget = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[campaign]\nbudget = lots\n"), ConfigError);
  CHECK_THROWS_AS(parse("[campaign]\nn_initial = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[campaign]\nobjective = branin\n"), ConfigError);
  CHECK_THROWS_AS(parse("[space]\nlower = 0, 0\nupper = 1, 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[campaign]\nbeta = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nkernel = rbf\n"), ConfigError);
  CHECK_THROWS_AS(parse("[fidelity]\nnominals = 0, 0.5, 0.4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[campaign]\nbudget = 1\nbudget = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[fidelity]\nbase_costs = 1, 2\n"), ConfigError);
}

TEST_CASE("config JSON round trip") {
  CampaignConfig c;
  c.objective = "reactor-proxy";
  c.base_costs = {1.5, 3, 6, 12, 24};
  c.lower = {6, 1.5, 4, 0};
  c.upper = {19, 3.5, 14, 1};
  c.beta = 0.3;
  c.seed = 18446744073709551615ULL;
  CHECK(config_from_json(config_to_json(c)) == c);
}

TEST_CASE("init writes a template and refuses to clobber") {
  const fs::path dir = scratch("init");
  const std::string path = (dir / "c.ini").string();
  CHECK(invoke({"init", path}).code == 0);
  CHECK(load_config(path) == CampaignConfig{});
  CHECK(invoke({"init", path}).code == 2);
  CHECK(invoke({"--force", "init", path}).code == 0);
  CHECK(invoke({"init", (dir / "missing" / "c.ini").string()}).code == 2);

  std::string text = slurp(path);
  text.replace(text.find("budget = 60"), 11, "budget = 35");
  std::ofstream(path) << text;
  const Outcome run = invoke({"--config", path, "--out", (dir / "out").string(), "run"});
  CHECK(run.code == 0);
  CHECK(fs::exists(dir / "out" / "results.jsonl"));
  CHECK(fs::exists(dir / "out" / "summary.json"));
}

TEST_CASE("run rejects an invalid config before evaluating anything") {
  const fs::path dir = scratch("badconfig");
  const fs::path cfg = write_config(dir, "n_initial = 0\n");
  const Outcome o = invoke({"--config", cfg.string(), "run"});
  CHECK(o.code == 2);
  CHECK_FALSE(fs::exists(dir / "out" / "results.jsonl"));
  CHECK(invoke({"--config", (dir / "nope.ini").string(), "run"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("run: n = 3, budget 40 stops after the 15-record initial design") {
  const fs::path dir = scratch("n3");
  const fs::path cfg = write_config(dir, "n_initial = 3\nbudget = 40\nseed = 7\n");
  CHECK(invoke({"--config", cfg.string(), "run"}).code == 0);
  const ReplayedLog log = read_results_log(dir / "out" / "results.jsonl");
  REQUIRE(log.state.records.size() == 15);
  for (const auto& r : log.state.records) CHECK(r.phase == Phase::InitialDesign);
  check_replayed_ledger(log.state);
}

TEST_CASE("run: n = 1, budget 40 streams the initial design then loop records") {
  const fs::path dir = scratch("n1");
  const fs::path cfg = write_config(dir, "budget = 40\nseed = 7\n");
  CHECK(invoke({"--config", cfg.string(), "run"}).code == 0);
  const ReplayedLog log = read_results_log(dir / "out" / "results.jsonl");
  REQUIRE(log.state.records.size() > 5);
  for (std::size_t i = 0; i < log.state.records.size(); ++i)
    CHECK(log.state.records[i].phase == (i < 5 ? Phase::InitialDesign : Phase::BoLoop));
  check_replayed_ledger(log.state);
  REQUIRE(log.last_summary.has_value());
  CHECK((*log.last_summary)["budget_spent"].get<double>() == log.state.budget_spent);
}

TEST_CASE("run: budget equal to the initial design cost") {
  const fs::path dir = scratch("boundary");
  const fs::path cfg = write_config(dir, "budget = 31\n");
  CHECK(invoke({"--config", cfg.string(), "run"}).code == 0);
  const ReplayedLog log = read_results_log(dir / "out" / "results.jsonl");
  CHECK(log.state.records.size() == 5);
  CHECK(log.state.loop_iterations() == 0);
  CHECK(invoke({"--config", cfg.string(), "run"}).code == 2);
  CHECK(invoke({"--config", cfg.string(), "--force", "run"}).code == 0);
}

TEST_CASE("run is deterministic and the seed flag overrides the config") {
  const fs::path dir = scratch("determinism");
  const fs::path cfg = write_config(dir, "budget = 50\nseed = 3\n");
  const std::string a = (dir / "a").string(), b = (dir / "b").string(), c = (dir / "c").string();
  CHECK(invoke({"--config", cfg.string(), "--out", a, "run"}).code == 0);
  CHECK(invoke({"--config", cfg.string(), "--out", b, "run"}).code == 0);
  CHECK(invoke({"--config", cfg.string(), "--out", c, "--seed", "4", "run"}).code == 0);
  CHECK(record_lines(fs::path(a) / "results.jsonl") == record_lines(fs::path(b) / "results.jsonl"));
  auto a_config = read_results_log(fs::path(a) / "results.jsonl").config;
  a_config.output_dir = b;
  CHECK(a_config == read_results_log(fs::path(b) / "results.jsonl").config);
  CHECK(record_lines(fs::path(a) / "results.jsonl") != record_lines(fs::path(c) / "results.jsonl"));
  CHECK(read_results_log(fs::path(c) / "results.jsonl").config.seed == 4);
}

TEST_CASE("resume after run(40) equals run(60) record for record") {
  const fs::path dir = scratch("splice");
  const fs::path cfg40 = write_config(dir, "budget = 40\nseed = 11\n");
  const std::string split = (dir / "split").string(), whole = (dir / "whole").string();
  REQUIRE(invoke({"--config", cfg40.string(), "--out", split, "run"}).code == 0);
  REQUIRE(invoke({"resume", split + "/results.jsonl", "--extra-budget", "20"}).code == 0);

  const fs::path cfg60 = dir / "c60.ini";
  std::ofstream(cfg60) << "[campaign]\nbudget = 60\nseed = 11\n";
  REQUIRE(invoke({"--config", cfg60.string(), "--out", whole, "run"}).code == 0);

  const ReplayedLog a = read_results_log(fs::path(split) / "results.jsonl");
  const ReplayedLog b = read_results_log(fs::path(whole) / "results.jsonl");
  CHECK(a.state.budget_total == 60.0);
  CHECK(a.state.records == b.state.records);
  CHECK(a.state.cost_model == b.state.cost_model);
  CHECK(record_lines(fs::path(split) / "results.jsonl") == record_lines(fs::path(whole) / "results.jsonl"));
  check_replayed_ledger(a.state);
}

TEST_CASE("resume with zero extra budget adds nothing") {
  const fs::path dir = scratch("noop");
  const fs::path cfg = write_config(dir, "budget = 35\n");
  REQUIRE(invoke({"--config", cfg.string(), "run"}).code == 0);
  const fs::path log = dir / "out" / "results.jsonl";
  const auto before = record_lines(log);
  CHECK(invoke({"resume", log.string(), "--extra-budget", "0"}).code == 0);
  CHECK(record_lines(log) == before);
  CHECK(invoke({"resume", log.string(), "--extra-budget", "-1"}).code == 2);
  CHECK(invoke({"--seed", "999", "resume", log.string(), "--extra-budget", "1"}).code == 2);
}

TEST_CASE("corrupt or truncated logs exit 4 naming the line") {
  const fs::path dir = scratch("corrupt");
  const fs::path cfg = write_config(dir, "budget = 35\n");
  REQUIRE(invoke({"--config", cfg.string(), "run"}).code == 0);
  const fs::path log = dir / "out" / "results.jsonl";
  const std::string text = slurp(log);

  const fs::path truncated = dir / "truncated.jsonl";
  std::ofstream(truncated, std::ios::binary) << text.substr(0, text.size() - 7);
  const auto n_lines = static_cast<int>(lines_of(log).size());
  const Outcome t = invoke({"resume", truncated.string(), "--extra-budget", "5"});
  CHECK(t.code == 4);
  CHECK(t.err.find("line " + std::to_string(n_lines)) != std::string::npos);
  CHECK(invoke({"report", truncated.string()}).code == 4);

  auto lines = lines_of(log);
  lines[2] = "{\"type\":\"record\",\"x\":[0.5";
  const fs::path garbled = dir / "garbled.jsonl";
  {
    std::ofstream out(garbled, std::ios::binary);
    for (const auto& l : lines) out << l << '\n';
  }
  const Outcome g = invoke({"report", garbled.string()});
  CHECK(g.code == 4);
  CHECK(g.err.find("line 3") != std::string::npos);

  const fs::path empty = dir / "empty.jsonl";
  std::ofstream(empty).close();
  CHECK(invoke({"report", empty.string()}).code == 4);
  CHECK_THROWS_AS(read_results_log(garbled), CorruptLogError);
}

TEST_CASE("objective failure exits 3 and keeps the partial results") {
  const fs::path dir = scratch("failure");
  // Coil radii below most tube radii make most geometries invalid.
  const fs::path cfg = write_config(dir, "objective = reactor-proxy\nbudget = 100\nn_initial = 2\n",
                                    "[space]\nlower = 1, 1.5, 4, 0\nupper = 2, 4, 15, 1\n");
  const Outcome o = invoke({"--config", cfg.string(), "run"});
  CHECK(o.code == 3);
  const fs::path log = dir / "out" / "results.jsonl";
  REQUIRE(fs::exists(log));
  const ReplayedLog replay = read_results_log(log);
  CHECK(replay.last_error.has_value());
  check_replayed_ledger(replay.state);
  CHECK(fs::exists(dir / "out" / "summary.json"));
}

TEST_CASE("validate-fidelity writes RTD curves and a converging table") {
  const fs::path dir = scratch("validate");
  const fs::path cfg = write_config(dir, "objective = reactor-proxy\n");
  const Outcome o = invoke({"--config", cfg.string(), "validate-fidelity", "--geometry", "15,2,6,0.3"});
  REQUIRE(o.code == 0);
  const cli::CsvTable table = cli::read_csv(dir / "out" / "fidelity_table.csv");
  CHECK(table.header == std::vector<std::string>{"level", "nominal", "cells", "peclet", "n_tanks", "cost"});
  REQUIRE(table.rows.size() == 5);
  std::vector<double> n;
  for (std::size_t i = 0; i < 5; ++i) {
    if (i > 0) CHECK(std::stoi(table.rows[i][2]) > std::stoi(table.rows[i - 1][2]));
    n.push_back(std::stod(table.rows[i][4]));
    const RTDCurve c = read_rtd_csv(dir / "out" / ("rtd_level" + std::to_string(i + 1) + ".csv"));
    CHECK(std::abs(c.integral() - 1.0) <= 1e-3);
    cli::read_csv(dir / "out" / ("rtd_level" + std::to_string(i + 1) + ".csv"));
  }
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(n[i] - n[4]) <= 1.05 * std::abs(n[i - 1] - n[4]));

  CHECK(invoke({"--config", cfg.string(), "validate-fidelity", "--geometry", "2,3,6,0.3"}).code == 2);
  const fs::path forrester_cfg = write_config(scratch("validate_forrester"), "");
  CHECK(invoke({"--config", forrester_cfg.string(), "validate-fidelity"}).code == 2);
}

TEST_CASE("report writes well-formed convergence and timeline data") {
  const fs::path dir = scratch("report");
  const fs::path cfg = write_config(dir, "budget = 50\nseed = 5\n");
  REQUIRE(invoke({"--config", cfg.string(), "run"}).code == 0);
  const fs::path log = dir / "out" / "results.jsonl";
  const Outcome o = invoke({"report", log.string()});
  REQUIRE(o.code == 0);
  const ReplayedLog replay = read_results_log(log);
  const auto& records = replay.state.records;

  const cli::CsvTable conv = cli::read_csv(dir / "out" / "convergence.csv");
  CHECK(conv.header ==
        std::vector<std::string>{"evaluation", "iteration", "phase", "level", "cumulative_cost", "incumbent"});
  REQUIRE(conv.rows.size() == records.size());
  double last = -INFINITY;
  for (const auto& row : conv.rows) {
    if (row[5].empty()) continue;
    const double v = std::stod(row[5]);
    CHECK(v >= last);
    last = v;
  }
  CHECK(std::stod(conv.rows.back()[4]) == doctest::Approx(replay.state.budget_spent));
  CHECK(last == replay.state.incumbent_record()->y);

  const cli::CsvTable timeline = cli::read_csv(dir / "out" / "fidelity_timeline.csv");
  REQUIRE(timeline.rows.size() == records.size());
  for (const auto& row : timeline.rows) {
    const int level = std::stoi(row[3]);
    CHECK(level >= 1);
    CHECK(level <= 5);
  }

  const std::string summary = slurp(dir / "out" / "summary.txt");
  int total = 0;
  for (int t = 1; t <= 5; ++t) {
    const std::string key = "level " + std::to_string(t) + ": ";
    const auto pos = summary.find(key);
    REQUIRE(pos != std::string::npos);
    total += std::stoi(summary.substr(pos + key.size()));
  }
  CHECK(total == static_cast<int>(records.size()));
}

TEST_CASE("read_csv rejects ragged rows") {
  const fs::path dir = scratch("csv");
  std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3\n";
  CHECK_THROWS(cli::read_csv(dir / "bad.csv"));
  std::ofstream(dir / "ok.csv") << "a,b\n1,\n";
  CHECK(cli::read_csv(dir / "ok.csv").rows.front() == std::vector<std::string>{"1", ""});
}

}  // TEST_SUITE
