#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "mfdgp/objective.hpp"

namespace mfdgp {

/// Coiled-tube reactor parameters. Lengths in mm, volume in mL.
struct ReactorGeometry {
  double coil_radius = 12.5;
  double tube_radius = 2.5;
  double pitch = 10.0;
  double inversion_fraction = 0.0;
  double total_volume = 20.0;

  void validate() const;
};

/// Dimensionless residence time distribution E(theta).
struct RTDCurve {
  std::vector<double> theta;
  std::vector<double> e_theta;

  double integral() const;
  /// theta strictly increasing from 0, E >= 0, unit trapezoid integral within 1e-3.
  void validate() const;
};

struct PlugFlowMetric {
  double n_tanks = 0.0;
  double fit_residual = 0.0;
};

/// Surrogate geometry -> Peclet map:
/// kappa * (coil/tube)^a * (tube/pitch)^b * (1 + c * inv * (1 - inv)).
struct PecletMap {
  double kappa = 40.0;
  double a = 0.8;
  double b = 0.4;
  double c = 1.0;
};

double geometry_to_peclet(const ReactorGeometry& geom, const PecletMap& map = {});

struct TracerSettings {
  double pulse_center = 0.05;   // inlet pulse centre, subtracted from the outlet clock
  double pulse_width = 0.01;    // standard deviation of the Gaussian inlet pulse
  double output_step = 0.005;   // spacing of the recorded theta grid
  double min_theta = 3.0;
  double max_theta = 20.0;
  double cfl_safety = 0.9;
  double residual_mass = 1e-7;  // stop once this fraction of tracer is left inside
};

/// Axial dispersion model dc/dtheta = (1/Pe) c_zz - c_z on [0,1] with closed
/// (Danckwerts) boundaries, upwind advection and central dispersion on `cells`
/// finite volumes, explicit stepping. Returns the normalized outlet response.
RTDCurve simulate_tracer(double peclet, int cells, const TracerSettings& settings = {});

/// 20 * 2^(index-1) cells.
int cells_for_level(int level_index);

struct ProxySimulation {
  RTDCurve curve;
  double cost = 0.0;
  int cells = 0;
  double peclet = 0.0;
};

/// Simulates the proxy at a fidelity level. Cost is base_costs[level] times a
/// log-normal(0, 0.2) multiplier seeded by (geometry, level, seed).
/// Empty base_costs means 2^(index-1).
ProxySimulation reactor_proxy_simulate(const ReactorGeometry& geom, const FidelityLevel& level, std::uint64_t seed,
                                       const std::vector<double>& base_costs = {});

/// N (N theta)^(N-1) exp(-N theta) / Gamma(N)
double tanks_in_series_pdf(double n_tanks, double theta);

/// Method-of-moments estimate N0 = mean^2 / variance of the curve.
double tanks_in_series_moments(const RTDCurve& curve);

PlugFlowMetric fit_tanks_in_series(const RTDCurve& curve);

void write_rtd_csv(const RTDCurve& curve, const std::filesystem::path& path);
RTDCurve read_rtd_csv(const std::filesystem::path& path);

/// Optimizes (coil_radius, tube_radius, pitch, inversion_fraction) with the
/// total volume held fixed. Value is the fitted N of the simulated RTD.
class ReactorObjective final : public MultiFidelityObjective {
 public:
  ReactorObjective(FidelityLadder ladder = FidelityLadder::default_five(), std::vector<double> base_costs = {},
                   std::uint64_t seed = 0, double total_volume = 20.0);

  std::string name() const override { return "reactor-proxy"; }
  Eigen::Index dimension() const override { return 4; }
  const FidelityLadder& ladder() const override { return ladder_; }
  /// coil [5, 20] mm, tube [1.5, 4] mm, pitch [4, 15] mm, inversion [0, 1].
  DesignSpace default_space() const override;
  Evaluation evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, const FidelityLevel& level) const override;

  ReactorGeometry geometry(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  const std::vector<double>& base_costs() const { return base_costs_; }

 private:
  FidelityLadder ladder_;
  std::vector<double> base_costs_;
  std::uint64_t seed_;
  double total_volume_;
};

}  // namespace mfdgp
