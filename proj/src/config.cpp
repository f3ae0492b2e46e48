#include "mfdgp/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mfdgp/error.hpp"
#include "mfdgp/rng.hpp"

namespace mfdgp {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

template <class Int>
Int parse_integer(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  Int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, key));
  return out;
}

std::string format_list(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += format_double(values[i]);
  }
  return s;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

struct Field {
  std::string section;
  std::string key;
  std::string comment;
  std::function<std::string(const CampaignConfig&)> get;
  std::function<void(CampaignConfig&, const std::string&)> set;
};

template <class T>
Field int_field(std::string section, std::string key, std::string comment, T CampaignConfig::*member) {
  const std::string name = section + "." + key;
  return {std::move(section), std::move(key), std::move(comment),
          [member](const CampaignConfig& c) { return std::to_string(c.*member); },
          [member, name](CampaignConfig& c, const std::string& v) { c.*member = parse_integer<T>(v, name); }};
}

Field double_field(std::string section, std::string key, std::string comment, double CampaignConfig::*member) {
  const std::string name = section + "." + key;
  return {std::move(section), std::move(key), std::move(comment),
          [member](const CampaignConfig& c) { return format_double(c.*member); },
          [member, name](CampaignConfig& c, const std::string& v) { c.*member = parse_double(v, name); }};
}

Field list_field(std::string section, std::string key, std::string comment,
                 std::vector<double> CampaignConfig::*member) {
  const std::string name = section + "." + key;
  return {std::move(section), std::move(key), std::move(comment),
          [member](const CampaignConfig& c) { return format_list(c.*member); },
          [member, name](CampaignConfig& c, const std::string& v) { c.*member = parse_list(v, name); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"campaign", "objective", "Objective name: forrester5 or reactor-proxy.",
                 [](const CampaignConfig& c) { return c.objective; },
                 [](CampaignConfig& c, const std::string& v) { c.objective = trim(v); }});
    f.push_back(int_field("campaign", "n_initial", "Latin-hypercube samples per fidelity level before the loop.",
                          &CampaignConfig::n_initial));
    f.push_back(double_field("campaign", "beta", "UCB exploration weight (>= 0).", &CampaignConfig::beta));
    f.push_back(double_field("campaign", "budget", "Total evaluation cost allowed, initial design included.",
                             &CampaignConfig::budget));
    f.push_back(int_field("campaign", "seed", "Root seed of every random stream.", &CampaignConfig::seed));
    f.push_back({"campaign", "output_dir", "Directory for results.jsonl and summary.json.",
                 [](const CampaignConfig& c) { return c.output_dir; },
                 [](CampaignConfig& c, const std::string& v) { c.output_dir = trim(v); }});
    f.push_back(list_field("space", "lower", "Comma-separated lower bounds; empty uses the objective's box.",
                           &CampaignConfig::lower));
    f.push_back(list_field("space", "upper", "Comma-separated upper bounds; empty uses the objective's box.",
                           &CampaignConfig::upper));
    f.push_back(list_field("fidelity", "nominals",
                           "Increasing nominal fidelities in [0, 1]; empty means 0, 0.25, 0.5, 0.75, 1.",
                           &CampaignConfig::nominals));
    f.push_back(list_field("fidelity", "base_costs",
                           "reactor-proxy only: declared cost per level; empty means 1, 2, 4, ...",
                           &CampaignConfig::base_costs));
    f.push_back(int_field("acquisition", "restarts", "Local refinements started from the best pool points.",
                          &CampaignConfig::restarts));
    f.push_back(int_field("acquisition", "pool_size", "Quasi-random candidates scored before refinement.",
                          &CampaignConfig::pool_size));
    f.push_back({"model", "kernel", "Covariance: squared-exponential or matern-5/2.",
                 [](const CampaignConfig& c) { return to_string(c.kernel); },
                 [](CampaignConfig& c, const std::string& v) {
                   try {
                     c.kernel = kernel_kind_from_string(trim(v));
                   } catch (const Error& e) {
                     throw ConfigError(std::string("model.kernel: ") + e.what());
                   }
                 }});
    f.push_back(double_field("model", "noise_variance", "Observation noise added to every layer's diagonal.",
                             &CampaignConfig::noise_variance));
    f.push_back(int_field("model", "fit_restarts", "Hyperparameter optimizer starts per layer.",
                          &CampaignConfig::fit_restarts));
    f.push_back({"model", "linear_coupling",
                 "true adds a term linear in the previous level's output to layers above the first.",
                 [](const CampaignConfig& c) { return std::string(c.linear_coupling ? "true" : "false"); },
                 [](CampaignConfig& c, const std::string& v) { c.linear_coupling = parse_bool(v, "model.linear_coupling"); }});
    f.push_back(double_field("model", "min_signal_ratio",
                             "Lower bound of each layer's signal variance, relative to the target variance.",
                             &CampaignConfig::min_signal_ratio));
    f.push_back(int_field("model", "propagation_samples", "Monte-Carlo samples per prediction inside the acquisition.",
                          &CampaignConfig::propagation_samples));
    f.push_back(int_field("model", "report_samples", "Monte-Carlo samples for fidelity selection and reports.",
                          &CampaignConfig::report_samples));
    return f;
  }();
  return table;
}

const std::map<std::string, std::string>& section_comments() {
  static const std::map<std::string, std::string> m{
      {"campaign", "Campaign setup."},
      {"space", "Design-space bounds, one entry per input dimension."},
      {"fidelity", "Fidelity ladder."},
      {"acquisition", "Acquisition optimizer."},
      {"model", "Deep GP surrogate."},
  };
  return m;
}

}  // namespace

CampaignConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  CampaignConfig config;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    if (!section_comments().count(section)) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : keys) {
      const Field* match = nullptr;
      for (const auto& f : fields())
        if (f.section == section && f.key == key) match = &f;
      if (!match) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
      match->set(config, value.data());
    }
  }
  validate_config(config);
  return config;
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  return parse_config(in);
}

void write_config_template(std::ostream& out, const CampaignConfig& config) {
  out << "; Multi-fidelity deep GP Bayesian optimization campaign.\n";
  out << "; Lines starting with ';' are comments. Unknown keys are rejected.\n";
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      current = f.section;
      out << "\n; " << section_comments().at(current) << "\n[" << current << "]\n";
    }
    out << "; " << f.comment << "\n" << f.key << " = " << f.get(config) << "\n";
  }
}

FidelityLadder config_ladder(const CampaignConfig& config) {
  return config.nominals.empty() ? FidelityLadder::default_five() : FidelityLadder(config.nominals);
}

std::unique_ptr<MultiFidelityObjective> config_objective(const CampaignConfig& config) {
  ObjectiveOptions options;
  options.ladder = config_ladder(config);
  options.base_costs = config.base_costs;
  options.seed = derive_seed(config.seed, "cost");
  return make_objective(config.objective, options);
}

DesignSpace config_space(const CampaignConfig& config, const MultiFidelityObjective& objective) {
  if (config.lower.empty() && config.upper.empty()) return objective.default_space();
  DesignSpace def = objective.default_space();
  Eigen::VectorXd lo = config.lower.empty()
                           ? def.lower
                           : Eigen::Map<const Eigen::VectorXd>(config.lower.data(), static_cast<Eigen::Index>(config.lower.size())).eval();
  Eigen::VectorXd hi = config.upper.empty()
                           ? def.upper
                           : Eigen::Map<const Eigen::VectorXd>(config.upper.data(), static_cast<Eigen::Index>(config.upper.size())).eval();
  if (lo.size() != objective.dimension() || hi.size() != objective.dimension())
    throw ConfigError("space bounds need " + std::to_string(objective.dimension()) + " entries for " +
                      objective.name());
  return DesignSpace(lo, hi);
}

void validate_config(const CampaignConfig& c) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  require(c.n_initial >= 1, "campaign.n_initial must be at least 1");
  require(c.beta >= 0.0 && std::isfinite(c.beta), "campaign.beta must be a non-negative number");
  require(c.budget > 0.0 && std::isfinite(c.budget), "campaign.budget must be positive");
  require(!c.output_dir.empty(), "campaign.output_dir must not be empty");
  require(c.restarts >= 1, "acquisition.restarts must be at least 1");
  require(c.pool_size >= 1, "acquisition.pool_size must be at least 1");
  require(c.noise_variance >= 0.0 && std::isfinite(c.noise_variance), "model.noise_variance must be non-negative");
  require(c.fit_restarts >= 1, "model.fit_restarts must be at least 1");
  require(c.min_signal_ratio > 0.0 && c.min_signal_ratio < 1.0, "model.min_signal_ratio must lie in (0, 1)");
  require(c.propagation_samples >= 1, "model.propagation_samples must be at least 1");
  require(c.report_samples >= 1, "model.report_samples must be at least 1");
  try {
    const auto objective = config_objective(c);
    const DesignSpace space = config_space(c, *objective);
    (void)space;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

CampaignOptions config_options(const CampaignConfig& c) {
  CampaignOptions o;
  o.n_initial = c.n_initial;
  o.ucb = UCBConfig{c.beta, c.restarts, c.pool_size};
  o.budget_total = c.budget;
  o.seed = c.seed;
  o.kernel = c.kernel;
  o.fit_restarts = c.fit_restarts;
  o.linear_coupling = c.linear_coupling;
  o.min_signal_ratio = c.min_signal_ratio;
  o.noise_variance = c.noise_variance;
  o.propagation_samples = c.propagation_samples;
  o.report_samples = c.report_samples;
  return o;
}

nlohmann::json config_to_json(const CampaignConfig& c) {
  return {
      {"objective", c.objective},
      {"n_initial", c.n_initial},
      {"beta", c.beta},
      {"budget", c.budget},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"lower", c.lower},
      {"upper", c.upper},
      {"nominals", c.nominals},
      {"base_costs", c.base_costs},
      {"restarts", c.restarts},
      {"pool_size", c.pool_size},
      {"kernel", to_string(c.kernel)},
      {"noise_variance", c.noise_variance},
      {"fit_restarts", c.fit_restarts},
      {"linear_coupling", c.linear_coupling},
      {"min_signal_ratio", c.min_signal_ratio},
      {"propagation_samples", c.propagation_samples},
      {"report_samples", c.report_samples},
  };
}

CampaignConfig config_from_json(const nlohmann::json& j) {
  try {
    CampaignConfig c;
    c.objective = j.at("objective").get<std::string>();
    c.n_initial = j.at("n_initial").get<int>();
    c.beta = j.at("beta").get<double>();
    c.budget = j.at("budget").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.lower = j.at("lower").get<std::vector<double>>();
    c.upper = j.at("upper").get<std::vector<double>>();
    c.nominals = j.at("nominals").get<std::vector<double>>();
    c.base_costs = j.at("base_costs").get<std::vector<double>>();
    c.restarts = j.at("restarts").get<int>();
    c.pool_size = j.at("pool_size").get<int>();
    c.kernel = kernel_kind_from_string(j.at("kernel").get<std::string>());
    c.noise_variance = j.at("noise_variance").get<double>();
    c.fit_restarts = j.at("fit_restarts").get<int>();
    c.linear_coupling = j.at("linear_coupling").get<bool>();
    c.min_signal_ratio = j.at("min_signal_ratio").get<double>();
    c.propagation_samples = j.at("propagation_samples").get<int>();
    c.report_samples = j.at("report_samples").get<int>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration record: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("bad configuration record: ") + e.what());
  }
}

}  // namespace mfdgp
