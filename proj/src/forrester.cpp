#include "mfdgp/forrester.hpp"

#include <cmath>
#include <limits>

#include "mfdgp/error.hpp"

namespace mfdgp {

double forrester_high(double x) {
  const double a = 6.0 * x - 2.0;
  return -(a * a) * std::sin(12.0 * x - 4.0);
}

double forrester_low(double x) { return 0.5 * forrester_high(x) - 10.0 * (x - 0.5) + 5.0; }

Evaluation forrester_family(double x, const FidelityLevel& level) {
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("forrester: x = " + std::to_string(x) + " outside [0, 1]");
  const double s = level.nominal;
  const double value = s == 1.0 ? forrester_high(x) : s * forrester_high(x) + (1.0 - s) * forrester_low(x);
  return {value, std::ldexp(1.0, level.index - 1)};
}

ForresterObjective::ForresterObjective(FidelityLadder ladder) : ladder_(std::move(ladder)) {}

DesignSpace ForresterObjective::default_space() const {
  return DesignSpace(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
}

Evaluation ForresterObjective::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, const FidelityLevel& level) const {
  if (x.size() != 1) throw InputShapeError("forrester5 is one-dimensional");
  return forrester_family(x[0], ladder_.level(level.index));
}

std::optional<KnownOptimum> ForresterObjective::known_optimum() const {
  // Dense grid over the highest level.
  const FidelityLevel top = ladder_.highest();
  constexpr int kGrid = 10000;
  double best_x = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double x = static_cast<double>(i) / (kGrid - 1);
    const double v = forrester_family(x, top).value;
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return KnownOptimum{Eigen::VectorXd::Constant(1, best_x), best};
}

}  // namespace mfdgp
