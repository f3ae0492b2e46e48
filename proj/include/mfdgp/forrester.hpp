#pragma once

#include <Eigen/Core>

#include "mfdgp/objective.hpp"

namespace mfdgp {

/// Negated Forrester function, so that the campaign maximizes.
double forrester_high(double x);
/// Negated low-fidelity Forrester companion: 0.5*f_hi(x) - 10(x - 0.5) + 5.
double forrester_low(double x);

/// Value s*f_hi + (1-s)*f_lo at the level's nominal s, cost 2^(index-1).
Evaluation forrester_family(double x, const FidelityLevel& level);

class ForresterObjective final : public MultiFidelityObjective {
 public:
  explicit ForresterObjective(FidelityLadder ladder = FidelityLadder::default_five());

  std::string name() const override { return "forrester5"; }
  Eigen::Index dimension() const override { return 1; }
  const FidelityLadder& ladder() const override { return ladder_; }
  DesignSpace default_space() const override;
  Evaluation evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, const FidelityLevel& level) const override;
  std::optional<KnownOptimum> known_optimum() const override;

 private:
  FidelityLadder ladder_;
};

}  // namespace mfdgp
