#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mfdgp/deep_gp.hpp"

namespace mfdgp {

/// Axis-aligned box of candidate designs.
struct DesignSpace {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  DesignSpace() = default;
  DesignSpace(Eigen::VectorXd lo, Eigen::VectorXd hi);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd to_unit(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Maps [0,1]^d back into the box; the result is clamped inside the bounds.
  Eigen::VectorXd from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const;
};

struct Evaluation {
  double value = 0.0;
  double cost = 0.0;
};

struct KnownOptimum {
  Eigen::VectorXd x;
  double value;
};

/// f(x, level) -> (value, cost). Evaluations are deterministic in (x, level, seed).
class MultiFidelityObjective {
 public:
  virtual ~MultiFidelityObjective() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual const FidelityLadder& ladder() const = 0;
  virtual DesignSpace default_space() const = 0;
  virtual Evaluation evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, const FidelityLevel& level) const = 0;
  virtual std::optional<KnownOptimum> known_optimum() const { return std::nullopt; }
};

struct ObjectiveOptions {
  std::optional<FidelityLadder> ladder;
  std::vector<double> base_costs;  // reactor-proxy only
  std::uint64_t seed = 0;
};

std::vector<std::string> objective_names();

/// Registry lookup: "forrester5" or "reactor-proxy". Unknown names throw InputError.
std::unique_ptr<MultiFidelityObjective> make_objective(const std::string& name, const ObjectiveOptions& options = {});

}  // namespace mfdgp
