#include "mfdgp/reactor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "mfdgp/error.hpp"
#include "mfdgp/rng.hpp"

namespace mfdgp {

void ReactorGeometry::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(coil_radius) || !positive(tube_radius) || !positive(pitch))
    throw InputError("reactor geometry lengths must be positive");
  if (!(tube_radius < coil_radius)) throw InputError("tube radius must be smaller than coil radius");
  if (!(inversion_fraction >= 0.0 && inversion_fraction <= 1.0))
    throw InputError("inversion fraction must lie in [0, 1]");
  if (!positive(total_volume)) throw InputError("total volume must be positive");
}

double RTDCurve::integral() const {
  double sum = 0.0;
  for (std::size_t i = 1; i < theta.size(); ++i)
    sum += 0.5 * (theta[i] - theta[i - 1]) * (e_theta[i] + e_theta[i - 1]);
  return sum;
}

void RTDCurve::validate() const {
  if (theta.size() < 3 || theta.size() != e_theta.size()) throw InputError("RTD curve needs matching theta/E columns");
  if (theta.front() != 0.0) throw InputError("RTD theta grid must start at 0");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i]) || !std::isfinite(e_theta[i])) throw InputError("RTD curve has non-finite values");
    if (e_theta[i] < 0.0) throw InputError("RTD curve has negative E(theta)");
    if (i > 0 && !(theta[i] > theta[i - 1])) throw InputError("RTD theta grid must be strictly increasing");
  }
  if (std::abs(integral() - 1.0) > 1e-3) throw InputError("RTD curve does not integrate to 1");
}

double geometry_to_peclet(const ReactorGeometry& geom, const PecletMap& map) {
  geom.validate();
  const double inv = geom.inversion_fraction;
  return map.kappa * std::pow(geom.coil_radius / geom.tube_radius, map.a) * std::pow(geom.tube_radius / geom.pitch, map.b) *
         (1.0 + map.c * inv * (1.0 - inv));
}

RTDCurve simulate_tracer(double peclet, int cells, const TracerSettings& settings) {
  if (!(peclet > 0.0) || !std::isfinite(peclet)) throw InputError("Peclet number must be positive");
  if (cells < 2) throw InputError("tracer simulation needs at least two cells");

  const double dz = 1.0 / cells;
  const double disp = 1.0 / peclet;
  // Explicit upwind + central dispersion stays positive for dt <= 1 / (1/dz + 2D/dz^2).
  const double dt_max = settings.cfl_safety / (1.0 / dz + 2.0 * disp / (dz * dz));
  const double h = settings.output_step;
  const int substeps = static_cast<int>(std::ceil(h / dt_max));
  const double dt = h / substeps;
  const long start_index = std::lround(settings.pulse_center / h);
  const double pulse_end = settings.pulse_center + 8.0 * settings.pulse_width;

  auto inlet = [&](double t) {
    const double u = (t - settings.pulse_center) / settings.pulse_width;
    return std::exp(-0.5 * u * u);
  };

  std::vector<double> c(static_cast<std::size_t>(cells), 0.0);
  std::vector<double> flux(static_cast<std::size_t>(cells) + 1, 0.0);
  double injected = 0.0;
  RTDCurve curve;

  for (long k = 0;; ++k) {
    const double t = k * h;
    if (k >= start_index) {
      const double theta = (k - start_index) * h;
      const double out = c.back();
      if (!std::isfinite(out)) throw SimulationDivergedError("tracer simulation produced non-finite values");
      curve.theta.push_back(theta);
      curve.e_theta.push_back(out);

      double held = 0.0;
      for (double ci : c) held += ci * dz;
      const bool drained = t > pulse_end && held <= settings.residual_mass * injected;
      if ((theta >= settings.min_theta && drained) || theta >= settings.max_theta) break;
    }
    for (int s = 0; s < substeps; ++s) {
      const double ts = t + s * dt;
      flux[0] = inlet(ts);
      injected += flux[0] * dt;
      for (int i = 1; i < cells; ++i)
        flux[static_cast<std::size_t>(i)] =
            c[static_cast<std::size_t>(i - 1)] - disp * (c[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(i - 1)]) / dz;
      flux[static_cast<std::size_t>(cells)] = c.back();
      for (int i = 0; i < cells; ++i)
        c[static_cast<std::size_t>(i)] += dt / dz * (flux[static_cast<std::size_t>(i)] - flux[static_cast<std::size_t>(i) + 1]);
    }
  }

  const double area = curve.integral();
  if (!(area > 0.0) || !std::isfinite(area)) throw SimulationDivergedError("outlet response carries no tracer");
  for (double& e : curve.e_theta) e /= area;
  return curve;
}

int cells_for_level(int level_index) {
  if (level_index < 1) throw InputError("fidelity level index must be >= 1");
  return 20 << (level_index - 1);
}

ProxySimulation reactor_proxy_simulate(const ReactorGeometry& geom, const FidelityLevel& level, std::uint64_t seed,
                                       const std::vector<double>& base_costs) {
  geom.validate();
  const double pe = geometry_to_peclet(geom);
  const int cells = cells_for_level(level.index);
  RTDCurve curve = simulate_tracer(pe, cells);

  double base = std::ldexp(1.0, level.index - 1);
  if (!base_costs.empty()) {
    if (level.index > static_cast<int>(base_costs.size())) throw InputError("no base cost declared for this level");
    base = base_costs[static_cast<std::size_t>(level.index - 1)];
  }
  std::uint64_t h = derive_seed(seed, "cost", static_cast<std::uint64_t>(level.index));
  for (double v : {geom.coil_radius, geom.tube_radius, geom.pitch, geom.inversion_fraction, geom.total_volume})
    h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  Engine rng(h);
  std::lognormal_distribution<double> multiplier(0.0, 0.2);
  const double cost = base * multiplier(rng);
  return {std::move(curve), cost, cells, pe};
}

double tanks_in_series_pdf(double n_tanks, double theta) {
  constexpr double kCap = 1e100;
  if (theta <= 0.0) {
    if (n_tanks > 1.0) return 0.0;
    if (n_tanks == 1.0) return 1.0;
    return kCap;
  }
  const double log_e = std::log(n_tanks) + (n_tanks - 1.0) * std::log(n_tanks * theta) - n_tanks * theta - std::lgamma(n_tanks);
  return std::min(std::exp(log_e), kCap);
}

namespace {

struct Moments {
  double mean;
  double variance;
};

Moments curve_moments(const RTDCurve& curve) {
  const auto& t = curve.theta;
  const auto& e = curve.e_theta;
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double w = 0.5 * (t[i] - t[i - 1]);
    m0 += w * (e[i] + e[i - 1]);
    m1 += w * (t[i] * e[i] + t[i - 1] * e[i - 1]);
  }
  const double mean = m1 / m0;
  double m2 = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double w = 0.5 * (t[i] - t[i - 1]);
    const double a = t[i] - mean, b = t[i - 1] - mean;
    m2 += w * (a * a * e[i] + b * b * e[i - 1]);
  }
  return {mean, m2 / m0};
}

}  // namespace

double tanks_in_series_moments(const RTDCurve& curve) {
  curve.validate();
  const Moments m = curve_moments(curve);
  if (!(m.variance > 1e-12 * m.mean * m.mean))
    throw FitError("RTD curve has zero variance; this is the plug-flow limit N -> infinity");
  return m.mean * m.mean / m.variance;
}

PlugFlowMetric fit_tanks_in_series(const RTDCurve& curve) {
  const double n0 = tanks_in_series_moments(curve);
  auto sse = [&](double log_n) {
    const double n = std::exp(log_n);
    double s = 0.0;
    for (std::size_t i = 0; i < curve.theta.size(); ++i) {
      const double r = tanks_in_series_pdf(n, curve.theta[i]) - curve.e_theta[i];
      s += r * r;
    }
    return s;
  };
  const double lo = std::log(std::max(0.5, n0 / 10.0));
  const double hi = std::log(10.0 * n0);
  const auto [log_n, residual] =
      boost::math::tools::brent_find_minima(sse, lo, hi, std::numeric_limits<double>::digits / 2);
  return {std::exp(log_n), residual};
}

void write_rtd_csv(const RTDCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "theta,e_theta\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.theta.size(); ++i) out << curve.theta[i] << ',' << curve.e_theta[i] << '\n';
}

RTDCurve read_rtd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "theta,e_theta") throw InputError("RTD CSV header must be 'theta,e_theta'");
  RTDCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw InputError("RTD CSV rows need exactly two columns");
    curve.theta.push_back(std::stod(line.substr(0, comma)));
    curve.e_theta.push_back(std::stod(line.substr(comma + 1)));
  }
  return curve;
}

ReactorObjective::ReactorObjective(FidelityLadder ladder, std::vector<double> base_costs, std::uint64_t seed,
                                   double total_volume)
    : ladder_(std::move(ladder)), base_costs_(std::move(base_costs)), seed_(seed), total_volume_(total_volume) {
  if (base_costs_.empty())
    for (int i = 0; i < ladder_.size(); ++i) base_costs_.push_back(std::ldexp(1.0, i));
  if (static_cast<int>(base_costs_.size()) != ladder_.size())
    throw InputError("reactor-proxy needs one base cost per fidelity level");
  for (double c : base_costs_)
    if (!(c > 0.0)) throw InputError("base costs must be positive");
}

DesignSpace ReactorObjective::default_space() const {
  Eigen::VectorXd lo(4), hi(4);
  lo << 5.0, 1.5, 4.0, 0.0;
  hi << 20.0, 4.0, 15.0, 1.0;
  return DesignSpace(lo, hi);
}

ReactorGeometry ReactorObjective::geometry(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != 4) throw InputShapeError("reactor-proxy expects (coil_radius, tube_radius, pitch, inversion)");
  ReactorGeometry g{x[0], x[1], x[2], x[3], total_volume_};
  g.validate();
  return g;
}

Evaluation ReactorObjective::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, const FidelityLevel& level) const {
  const ReactorGeometry geom = geometry(x);
  const FidelityLevel checked = ladder_.level(level.index);
  ProxySimulation sim = reactor_proxy_simulate(geom, checked, seed_, base_costs_);
  return {fit_tanks_in_series(sim.curve).n_tanks, sim.cost};
}

}  // namespace mfdgp
