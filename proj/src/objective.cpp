#include "mfdgp/objective.hpp"

#include <cmath>

#include "mfdgp/error.hpp"
#include "mfdgp/forrester.hpp"
#include "mfdgp/reactor.hpp"

namespace mfdgp {

DesignSpace::DesignSpace(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() < 1) throw InputError("design space needs at least one dimension");
  if (lower.size() != upper.size()) throw InputShapeError("design space bounds differ in dimension");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw InputError("design space requires finite lower < upper in every dimension");
}

bool DesignSpace::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) return false;
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Eigen::VectorXd DesignSpace::to_unit(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw InputShapeError("point dimension does not match design space");
  return ((x - lower).array() / (upper - lower).array()).matrix();
}

Eigen::VectorXd DesignSpace::from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (u.size() != dim()) throw InputShapeError("point dimension does not match design space");
  Eigen::VectorXd x = lower + ((upper - lower).array() * u.array()).matrix();
  return x.cwiseMax(lower).cwiseMin(upper);
}

std::vector<std::string> objective_names() { return {"forrester5", "reactor-proxy"}; }

std::unique_ptr<MultiFidelityObjective> make_objective(const std::string& name, const ObjectiveOptions& options) {
  FidelityLadder ladder = options.ladder.value_or(FidelityLadder::default_five());
  if (name == "forrester5") {
    if (!options.base_costs.empty())
      throw InputError("forrester5 has fixed costs 2^(level-1); base_costs must be empty");
    return std::make_unique<ForresterObjective>(std::move(ladder));
  }
  if (name == "reactor-proxy") return std::make_unique<ReactorObjective>(std::move(ladder), options.base_costs, options.seed);
  throw InputError("unknown objective '" + name + "'");
}

}  // namespace mfdgp
