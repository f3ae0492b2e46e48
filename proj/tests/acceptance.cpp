// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cli.hpp"
#include "mfdgp/campaign.hpp"
#include "mfdgp/config.hpp"
#include "mfdgp/forrester.hpp"
#include "mfdgp/reactor.hpp"
#include "mfdgp/results_log.hpp"
#include "mfdgp/rng.hpp"
#include "oracle.hpp"

using namespace mfdgp;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Eigen::VectorXd at(double x) { return Eigen::VectorXd::Constant(1, x); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mfdgp_acceptance_" + name);
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

std::vector<std::string> record_lines(const fs::path& log) {
  std::vector<std::string> kept;
  std::istringstream in(slurp(log));
  for (std::string line; std::getline(in, line);)
    if (line.find("\"type\":\"record\"") != std::string::npos) kept.push_back(line);
  return kept;
}

int invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::cli_main(args, out, err);
}

fs::path write_config(const fs::path& path, const std::string& body) {
  std::ofstream(path) << body;
  return path;
}

Verdict gp_oracle() {
  Verdict v;
  const auto start = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> n_dist(1, 20), d_dist(1, 3);
  std::uniform_real_distribution<double> ls_dist(0.2, 1.0), s_dist(0.5, 3.0), noise_log(-4.0, -2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = n_dist(rng), d = d_dist(rng);
    const double noise = std::pow(10.0, noise_log(rng));
    const GPDataset data = oracle::random_dataset(rng, n, d, noise);
    Eigen::VectorXd ls(d);
    for (auto& l : ls) l = ls_dist(rng);
    const double s2 = s_dist(rng);
    const TrainedGP gp(data, KernelSpec{KernelKind::SquaredExponential, ls, s2, std::nullopt});
    const oracle::DenseGP ref(data.inputs, data.targets, ls, s2, noise);
    worst = std::max(worst, std::abs(log_marginal_likelihood(gp) - ref.lml()));
    const GPDataset queries = oracle::random_dataset(rng, 5, d, 0.0);
    const Prediction p = predict(gp, queries.inputs);
    for (Eigen::Index i = 0; i < queries.size(); ++i) {
      const Eigen::VectorXd q = queries.inputs.row(i).transpose();
      worst = std::max(worst, std::abs(p.mean[i] - ref.mean(q)));
      worst = std::max(worst, std::abs(p.variance[i] - std::max(0.0, ref.variance(q))));
    }
  }
  const double elapsed = seconds_since(start);
  v.require(worst <= 1e-8, "max deviation " + fmt(worst));
  v.require(elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
  if (v.pass) v.detail = "max deviation " + fmt(worst) + ", " + fmt(elapsed) + " s";
  return v;
}

Verdict interpolation() {
  Verdict v;
  std::mt19937_64 rng(5);
  double worst_residual = 0.0, worst_variance = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 3;
    const GPDataset data = oracle::random_dataset(rng, 6 + trial, d, 1e-10);
    const TrainedGP gp = fit(data, default_kernel_init(data), 3, derive_seed(5, "fit", trial));
    const Prediction p = predict(gp, data.inputs);
    worst_residual = std::max(worst_residual, (p.mean - data.targets).cwiseAbs().maxCoeff());
    worst_variance = std::max(worst_variance, p.variance.maxCoeff());
  }
  v.require(worst_residual <= 1e-6, "max residual " + fmt(worst_residual));
  v.require(worst_variance <= 1e-8, "max variance " + fmt(worst_variance));
  if (v.pass) v.detail = "max residual " + fmt(worst_residual) + ", max variance " + fmt(worst_variance);
  return v;
}

GPDataset sampled(const std::vector<double>& xs, const std::function<double(double)>& f, double noise) {
  GPDataset d;
  d.inputs.resize(static_cast<Eigen::Index>(xs.size()), 1);
  d.targets.resize(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.inputs(static_cast<Eigen::Index>(i), 0) = xs[i];
    d.targets[static_cast<Eigen::Index>(i)] = f(xs[i]);
  }
  d.noise_variance = noise;
  return d;
}

MultiFidelityDataset forrester_levels() {
  const FidelityLadder ladder = FidelityLadder::default_five();
  MultiFidelityDataset data;
  for (int t = 1; t <= 5; ++t) {
    std::vector<double> xs;
    const int n = 8 - t;
    for (int i = 0; i < n; ++i) xs.push_back((i + 0.15 * t) / n);
    data.levels.push_back(sampled(xs, [&](double x) { return forrester_family(x, ladder.level(t)).value; }, 1e-8));
  }
  return data;
}

Verdict degeneracy() {
  Verdict v;
  const MFDeepGP model = train(forrester_levels(), FidelityLadder::default_five(), {});
  for (double x : {0.0, 0.21, 0.5, 0.83, 1.0}) {
    const auto [m, var] = model.layer(1).predict_point(at(x));
    const LevelPrediction lp = predict_level(model, at(x), model.ladder().level(1), 9);
    v.require(lp.mu == m && lp.sigma == std::sqrt(var), "level-1 mismatch at x = " + fmt(x));
  }

  const auto wave = [](double x) { return std::sin(6.0 * x) + 0.5 * x; };
  const std::vector<double> xs{0.0, 0.2, 0.45, 0.6, 0.8, 1.0};
  const MultiFidelityDataset pair{{sampled(xs, wave, 1e-10), sampled(xs, wave, 1e-10)}};
  const MFDeepGP toy = train(pair, FidelityLadder({0.0, 1.0}), DeepGPConfig{KernelKind::SquaredExponential, 3, 17});
  double worst = 0.0;
  for (double x : xs)
    worst = std::max(worst, std::abs(predict_level(toy, at(x), toy.ladder().highest(), 5, 2000).mu - wave(x)));
  v.require(worst <= 1e-3, "correlated toy max error " + fmt(worst));
  if (v.pass) v.detail = "level 1 bit-identical, correlated toy max error " + fmt(worst);
  return v;
}

Verdict monte_carlo() {
  Verdict v;
  const MFDeepGP model = train(forrester_levels(), FidelityLadder::default_five(), {});
  double worst = 0.0;
  for (double x : {0.12, 0.62, 0.9}) {
    PropagationTrace trace;
    const auto preds = propagate(model, at(x), 5, 7, 1000, &trace);
    for (std::size_t t = 0; t < 5; ++t) {
      const Eigen::VectorXd& m = trace.means[t];
      const double mu = m.mean();
      const double var = trace.variances[t].mean() + (m.array() - mu).square().mean();
      worst = std::max({worst, std::abs(preds[t].mu - mu), std::abs(preds[t].sigma * preds[t].sigma - var)});
    }
  }
  v.require(worst <= 1e-12, "decomposition deviation " + fmt(worst));

  double worst_z = 0.0;
  for (double x : {0.2, 0.55, 0.85}) {
    PropagationTrace ta, tb;
    const auto a = propagate(model, at(x), 5, 101, 5000, &ta);
    const auto b = propagate(model, at(x), 5, 202, 5000, &tb);
    const auto se = [](const Eigen::VectorXd& m) {
      return std::sqrt((m.array() - m.mean()).square().mean() / static_cast<double>(m.size()));
    };
    const double se_ab = std::hypot(se(ta.means[4]), se(tb.means[4]));
    worst_z = std::max(worst_z, se_ab > 0.0 ? std::abs(a[4].mu - b[4].mu) / se_ab : 0.0);
  }
  v.require(worst_z <= 3.0, "seed disagreement " + fmt(worst_z) + " standard errors");
  if (v.pass) v.detail = "decomposition deviation " + fmt(worst) + ", max seed gap " + fmt(worst_z) + " SE";
  return v;
}

Verdict fidelity_selection() {
  Verdict v;
  const std::vector<double> tau{1, 2, 4, 8, 16};
  v.require(choose_fidelity({0.2, 0.2, 0.2, 0.2, 0.2}, tau, 2.0) == 1, "equal sigma example");
  v.require(choose_fidelity({0.1, 0.1, 0.1, 0.1, 0.4}, tau, 2.0) == 1, "sigma 0.4 at level 5 example");
  v.require(choose_fidelity({0, 0, 0, 0, 0.3}, {3, 3, 3, 3, 3}, 2.0) == 5, "equal tau example");

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> sigma_dist(0.0, 1.0), tau_log(-1.0, 2.0), scale_log(-3.0, 3.0), beta_dist(0.1, 5.0);
  int violations = 0;
  for (int draw = 0; draw < 100; ++draw) {
    std::vector<double> sigma(5), t(5);
    for (int i = 0; i < 5; ++i) {
      sigma[i] = sigma_dist(rng);
      t[i] = std::pow(10.0, tau_log(rng));
    }
    const double beta = beta_dist(rng);
    const int base = choose_fidelity(sigma, t, beta);
    const double c = std::pow(10.0, scale_log(rng));
    std::vector<double> scaled = t;
    for (auto& s : scaled) s *= c;
    if (choose_fidelity(sigma, scaled, beta) != base) ++violations;
    if (choose_fidelity(sigma, t, beta * std::pow(10.0, scale_log(rng))) != base) ++violations;
  }
  v.require(violations == 0, std::to_string(violations) + " invariance violations");
  if (v.pass) v.detail = "3 examples exact, 100 draws invariant";
  return v;
}

struct CampaignOutcome {
  double dx = 0.0;
  double regret = 0.0;
  int loop = 0;
  int below_top = 0;
};

CampaignOutcome multi_fidelity(const ForresterObjective& objective, std::uint64_t seed, double budget) {
  CampaignConfig config;
  config.seed = seed;
  config.budget = budget;
  const CampaignState state = run(objective, objective.default_space(), config_options(config));
  const KnownOptimum opt = *objective.known_optimum();
  CampaignOutcome out;
  if (const EvaluationRecord* best = state.incumbent_record()) {
    out.dx = std::abs(best->x[0] - opt.x[0]);
    out.regret = opt.value - best->y;
  } else {
    out.dx = out.regret = std::numeric_limits<double>::infinity();
  }
  for (const auto& r : state.records) {
    if (r.phase != Phase::BoLoop) continue;
    ++out.loop;
    if (r.level.index < state.levels) ++out.below_top;
  }
  return out;
}

// Plain GP-UCB on the top level only, with the same beta, budget and acquisition optimizer.
double single_fidelity_regret(const ForresterObjective& objective, std::uint64_t seed, double budget) {
  const FidelityLevel top = objective.ladder().highest();
  const CampaignOptions options = config_options(CampaignConfig{});
  std::vector<double> xs, ys;
  double spent = 0.0;
  const Eigen::MatrixXd design = latin_hypercube(1, 1, derive_seed(seed, "design", 5));
  auto evaluate = [&](double x) {
    const Evaluation e = objective.evaluate(at(x), top);
    xs.push_back(x);
    ys.push_back(e.value);
    spent += e.cost;
  };
  evaluate(design(0, 0));
  for (int k = 1; spent < budget; ++k) {
    GPDataset data;
    data.inputs = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    data.targets = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    data.noise_variance = options.noise_variance;
    const TrainedGP gp = fit(data, default_kernel_init(data), options.fit_restarts, derive_seed(seed, "model", k));
    const double root_beta = std::sqrt(options.ucb.beta);
    const Eigen::VectorXd u = maximize_acquisition(
        [&](const Eigen::VectorXd& x) {
          const auto [m, var] = gp.predict_point(x);
          return m + root_beta * std::sqrt(std::max(var, 0.0));
        },
        1, options.ucb, derive_seed(seed, "acquisition", k));
    evaluate(u[0]);
  }
  return objective.known_optimum()->value - *std::max_element(ys.begin(), ys.end());
}

Verdict desk_scale() {
  Verdict v;
  const auto start = Clock::now();
  const ForresterObjective objective;
  std::vector<double> dx, regret, baseline;
  int loop = 0, below_top = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const CampaignOutcome o = multi_fidelity(objective, seed, 60.0);
    dx.push_back(o.dx);
    regret.push_back(o.regret);
    loop += o.loop;
    below_top += o.below_top;
    baseline.push_back(single_fidelity_regret(objective, seed, 60.0));
  }
  const double share = loop > 0 ? static_cast<double>(below_top) / loop : 0.0;
  const double elapsed = seconds_since(start);
  v.require(median(dx) <= 0.05, "median |x - x*| " + fmt(median(dx)));
  v.require(share >= 0.3, "lower-level share " + fmt(share));
  v.require(median(regret) <= median(baseline),
            "median regret " + fmt(median(regret)) + " vs single-fidelity " + fmt(median(baseline)));
  v.require(elapsed < 300.0, "runtime " + fmt(elapsed) + " s");
  const std::string summary = "median |x - x*| " + fmt(median(dx)) + ", lower-level share " + fmt(share) +
                              " (" + std::to_string(below_top) + "/" + std::to_string(loop) + "), median regret " +
                              fmt(median(regret)) + " vs single-fidelity " + fmt(median(baseline)) + ", " +
                              fmt(elapsed) + " s";
  v.detail = summary;
  return v;
}

Verdict tanks_round_trip() {
  Verdict v;
  double worst_fit = 0.0, worst_moment = 0.0;
  for (double n : {1.0, 2.0, 5.0, 10.0, 20.0}) {
    RTDCurve c;
    const double theta_max = n <= 2.0 ? 15.0 : 4.0;
    for (int i = 0; i < 500; ++i) {
      const double th = theta_max * i / 499.0;
      c.theta.push_back(th);
      c.e_theta.push_back(tanks_in_series_pdf(n, th));
    }
    worst_fit = std::max(worst_fit, std::abs(fit_tanks_in_series(c).n_tanks - n));
    worst_moment = std::max(worst_moment, std::abs(tanks_in_series_moments(c) - n));
  }
  v.require(worst_fit <= 1e-3, "fit error " + fmt(worst_fit));
  v.require(worst_moment <= 2e-2, "moment error " + fmt(worst_moment));
  if (v.pass) v.detail = "fit error " + fmt(worst_fit) + ", moment error " + fmt(worst_moment);
  return v;
}

Verdict proxy_convergence() {
  Verdict v;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coil(5.0, 20.0), tube(1.5, 4.0), pitch(4.0, 15.0), inv(0.0, 1.0);
  const FidelityLadder ladder = FidelityLadder::default_five();
  double worst_mass = 0.0;
  for (int g = 0; g < 5; ++g) {
    ReactorGeometry geom;
    geom.coil_radius = coil(rng);
    geom.tube_radius = tube(rng);
    geom.pitch = pitch(rng);
    geom.inversion_fraction = inv(rng);
    std::vector<double> n;
    for (int t = 1; t <= 5; ++t) {
      const ProxySimulation sim = reactor_proxy_simulate(geom, ladder.level(t), 0);
      worst_mass = std::max(worst_mass, std::abs(sim.curve.integral() - 1.0));
      n.push_back(fit_tanks_in_series(sim.curve).n_tanks);
    }
    for (std::size_t t = 1; t < 4; ++t)
      v.require(std::abs(n[t] - n[4]) <= 1.05 * std::abs(n[t - 1] - n[4]),
                "geometry " + std::to_string(g) + " level " + std::to_string(t + 1) + " moves away from level 5");
  }
  v.require(worst_mass <= 1e-3, "RTD mass error " + fmt(worst_mass));
  if (v.pass) v.detail = "5 geometries monotone, max RTD mass error " + fmt(worst_mass);
  return v;
}

Verdict ledger_and_replay() {
  Verdict v;
  const fs::path dir = scratch("ledger");
  for (const auto& [seed, budget, n] : std::vector<std::tuple<int, int, int>>{{2, 45, 1}, {9, 60, 1}, {4, 40, 3}}) {
    const std::string tag = "seed " + std::to_string(seed) + " budget " + std::to_string(budget);
    const fs::path out = dir / ("run" + std::to_string(seed));
    const fs::path cfg = write_config(dir / ("c" + std::to_string(seed) + ".ini"),
                                      "[campaign]\nseed = " + std::to_string(seed) + "\nbudget = " +
                                          std::to_string(budget) + "\nn_initial = " + std::to_string(n) + "\n");
    v.require(invoke({"--config", cfg.string(), "--out", out.string(), "run"}) == 0, tag + ": run failed");
    const ReplayedLog log = read_results_log(out / "results.jsonl");
    const CampaignState& s = log.state;
    double sum = 0.0;
    for (const auto& r : s.records) sum += r.cost;
    v.require(std::abs(s.budget_spent - sum) <= 1e-9, tag + ": spent differs from summed costs");
    int overshooting = 0;
    double running = 0.0;
    for (const auto& r : s.records) {
      if (r.phase == Phase::BoLoop && running + r.cost > s.budget_total) ++overshooting;
      running += r.cost;
    }
    v.require(overshooting <= 1, tag + ": more than one overshooting evaluation");

    CampaignConfig config = load_config(cfg);
    const auto objective = config_objective(config);
    const CampaignState live = run(*objective, config_space(config, *objective), config_options(config));
    v.require(live.records == s.records && live.cost_model == s.cost_model && live.budget_spent == s.budget_spent &&
                  live.incumbent == s.incumbent && live.budget_total == s.budget_total,
              tag + ": reloaded state differs from the live campaign");
  }

  const fs::path split = dir / "split", whole = dir / "whole";
  const fs::path c40 = write_config(dir / "c40.ini", "[campaign]\nseed = 11\nbudget = 40\n");
  const fs::path c60 = write_config(dir / "c60.ini", "[campaign]\nseed = 11\nbudget = 60\n");
  v.require(invoke({"--config", c40.string(), "--out", split.string(), "run"}) == 0, "run(40) failed");
  v.require(invoke({"resume", (split / "results.jsonl").string(), "--extra-budget", "20"}) == 0, "resume(20) failed");
  v.require(invoke({"--config", c60.string(), "--out", whole.string(), "run"}) == 0, "run(60) failed");
  v.require(record_lines(split / "results.jsonl") == record_lines(whole / "results.jsonl"),
            "run(40) + resume(20) differs from run(60)");
  if (v.pass) v.detail = "3 runs reconciled and replayed, run(40) + resume(20) == run(60)";
  return v;
}

Verdict determinism() {
  Verdict v;
  const fs::path dir = scratch("determinism");
  const fs::path cfg = write_config(dir / "c.ini", "[campaign]\nseed = 21\nbudget = 45\n");
  const fs::path reactor = write_config(dir / "r.ini", "[campaign]\nobjective = reactor-proxy\nseed = 21\n");
  for (const char* side : {"a", "b"}) {
    const fs::path out = dir / side;
    v.require(invoke({"--config", (out.string() + ".ini"), "init"}) == 0, "init failed");
    v.require(invoke({"--config", cfg.string(), "--out", out.string(), "run"}) == 0, "run failed");
    v.require(invoke({"resume", (out / "results.jsonl").string(), "--extra-budget", "10"}) == 0, "resume failed");
    v.require(invoke({"--out", (out / "report").string(), "report", (out / "results.jsonl").string()}) == 0,
              "report failed");
    v.require(invoke({"--config", reactor.string(), "--out", (out / "fidelity").string(), "validate-fidelity",
                      "--geometry", "12,2.5,9,0.3"}) == 0,
              "validate-fidelity failed");
  }
  const fs::path a = dir / "a", b = dir / "b";
  v.require(slurp(dir / "a.ini") == slurp(dir / "b.ini"), "init templates differ");
  v.require(record_lines(a / "results.jsonl") == record_lines(b / "results.jsonl"), "run/resume records differ");
  for (const char* file : {"convergence.csv", "fidelity_timeline.csv"})
    v.require(slurp(a / "report" / file) == slurp(b / "report" / file), std::string("report ") + file + " differs");
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a / "fidelity")) {
    ++compared;
    v.require(slurp(entry.path()) == slurp(b / "fidelity" / entry.path().filename()),
              "validate-fidelity " + entry.path().filename().string() + " differs");
  }
  v.require(compared > 0, "validate-fidelity wrote nothing");
  if (v.pass) v.detail = "init, run, resume, report and validate-fidelity byte-identical";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"GP oracle equivalence", gp_oracle},
      {"noise-free interpolation", interpolation},
      {"DGP degeneracy", degeneracy},
      {"Monte-Carlo consistency", monte_carlo},
      {"fidelity-selection analytics", fidelity_selection},
      {"optimization at desk scale", desk_scale},
      {"tanks-in-series round trip", tanks_round_trip},
      {"proxy fidelity convergence", proxy_convergence},
      {"ledger and replay", ledger_and_replay},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }

  // Larger budgets are where the multi-fidelity loop gets room to climb the ladder.
  const ForresterObjective objective;
  std::vector<double> dx;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) dx.push_back(multi_fidelity(objective, seed, 200.0).dx);
  std::printf("INFO budget 200 on the same 5 seeds: median |x - x*| %s\n", fmt(median(dx)).c_str());
  return failures == 0 ? 0 : 1;
}
