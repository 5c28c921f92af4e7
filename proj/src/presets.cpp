#include "relaxctrl/presets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relaxctrl {

namespace {

double param_or(const std::map<std::string, double>& overrides,
                const std::map<std::string, PresetParam>& spec,
                const std::string& key) {
  auto it = overrides.find(key);
  if (it == overrides.end()) return spec.at(key).value;
  return it->second;
}

Eigen::VectorXd sine_initial(const Grid& grid) {
  return sample_initial_state(grid, 1, [&](std::span<const double> x,
                                           std::span<double> y) {
    double v = std::sin(std::numbers::pi * x[0] / grid.extent(0));
    if (grid.dim() == 2) v *= std::sin(std::numbers::pi * x[1] / grid.extent(1));
    y[0] = v;
  });
}

Preset make_lq() {
  Preset p;
  p.name = "lq";
  p.description = "Linear reaction f = z, quadratic state cost with linear "
                  "control penalty weight; damped sine initial state.";
  p.params = {
      {"gamma", {1.0, 0.0, 10.0, "control penalty weight on z^2"}},
      {"state_weight", {1.0, 0.0, 100.0, "weight on |y|^2"}},
      {"beta", {0.1, 0.0, 10.0, "terminal |y|^2 weight"}},
      {"diffusion", {1.0, 1e-3, 100.0, "isotropic diffusion coefficient"}},
  };
  p.default_grid = {1, {16}, {1.0}, 20, 1.0};
  p.default_dictionary_count = 3;
  p.flags.autonomous = true;
  p.flags.cost_quadratic = true;
  p.flags.orientor_convex = true;
  p.flags.semi_monotonicity_a1 = 0.0;
  p.flags.differentiable = true;
  p.build = [params = p.params, flags = p.flags](
                const Grid& grid, const std::map<std::string, double>& ov) {
    const double gamma = param_or(ov, params, "gamma");
    const double q = param_or(ov, params, "state_weight");
    const double beta = param_or(ov, params, "beta");
    const double a = param_or(ov, params, "diffusion");
    return ParabolicProblem(
        "lq", grid, 1, DiffusionTensor::isotropic(1, a),
        fields::scalar_affine(0.0, 1.0, 0.0),
        costs::quadratic_tracking(1, q, gamma, nullptr),
        costs::terminal_quadratic(1, beta, nullptr), sine_initial(grid),
        ControlSet::box({-1.0}, {1.0}), flags);
  };
  return p;
}

Preset make_chatter() {
  Preset p;
  p.name = "chatter";
  p.description = "Nonconvex double-well control cost with state damping: "
                  "f = z, phi = q*y^2 + (z^2-1)^2; minimizers oscillate.";
  p.params = {
      {"state_weight", {1.0, 0.0, 100.0, "weight q on y^2"}},
      {"diffusion", {1.0, 1e-3, 100.0, "isotropic diffusion coefficient"}},
  };
  p.default_grid = {1, {16}, {1.0}, 40, 1.0};
  p.default_dictionary_count = 3;
  p.flags.autonomous = true;
  p.flags.cost_quadratic = true;
  p.flags.orientor_convex = false;
  p.flags.semi_monotonicity_a1 = 0.0;
  p.flags.differentiable = true;
  p.build = [params = p.params, flags = p.flags](
                const Grid& grid, const std::map<std::string, double>& ov) {
    const double q = param_or(ov, params, "state_weight");
    const double a = param_or(ov, params, "diffusion");
    return ParabolicProblem(
        "chatter", grid, 1, DiffusionTensor::isotropic(1, a),
        fields::scalar_affine(0.0, 1.0, 0.0), costs::double_well(q),
        std::nullopt,
        Eigen::VectorXd::Zero(grid.interior_nodes()),
        ControlSet::box({-1.0}, {1.0}), flags);
  };
  return p;
}

Preset make_composite() {
  Preset p;
  p.name = "composite";
  p.description = "Nonlocal product cost: square of the state mean plus a "
                  "control penalty, each an integral over the domain.";
  p.params = {
      {"target_mean", {0.1, -10.0, 10.0, "shift subtracted from the state mean"}},
      {"control_weight", {0.05, 0.0, 10.0, "weight on the z^2 integral"}},
      {"diffusion", {1.0, 1e-3, 100.0, "isotropic diffusion coefficient"}},
  };
  p.default_grid = {1, {16}, {1.0}, 20, 1.0};
  p.default_dictionary_count = 3;
  p.flags.autonomous = true;
  p.flags.cost_quadratic = true;
  p.flags.orientor_convex = true;
  p.flags.semi_monotonicity_a1 = 0.0;
  p.flags.differentiable = true;
  p.build = [params = p.params, flags = p.flags](
                const Grid& grid, const std::map<std::string, double>& ov) {
    const double target = param_or(ov, params, "target_mean");
    const double cw = param_or(ov, params, "control_weight");
    const double a = param_or(ov, params, "diffusion");
    CompositeCost cost;
    cost.mode = CompositeRelaxation::AveragedInner;
    CompositeCostTerm mean_term;
    mean_term.factors.push_back(
        {ScalarFn::square(), costs::integrand_state_shift(target)});
    CompositeCostTerm control_term;
    control_term.factors.push_back(
        {ScalarFn::affine(cw, 0.0), costs::integrand_control_square()});
    cost.terms = {std::move(mean_term), std::move(control_term)};
    return ParabolicProblem(
        "composite", grid, 1, DiffusionTensor::isotropic(1, a),
        fields::scalar_affine(0.0, 1.0, 0.0), std::move(cost), std::nullopt,
        sine_initial(grid), ControlSet::box({-1.0}, {1.0}), flags);
  };
  return p;
}

Preset make_filippov() {
  Preset p;
  p.name = "filippov";
  p.description = "Convex benchmark for single-valued extraction: f = z with "
                  "phi = y^2 + r*z^2.";
  p.params = {
      {"control_weight", {0.25, 0.0, 10.0, "weight r on z^2"}},
      {"diffusion", {1.0, 1e-3, 100.0, "isotropic diffusion coefficient"}},
  };
  p.default_grid = {1, {16}, {1.0}, 20, 1.0};
  p.default_dictionary_count = 3;
  p.flags.autonomous = true;
  p.flags.cost_quadratic = true;
  p.flags.orientor_convex = true;
  p.flags.semi_monotonicity_a1 = 0.0;
  p.flags.differentiable = true;
  p.build = [params = p.params, flags = p.flags](
                const Grid& grid, const std::map<std::string, double>& ov) {
    const double r = param_or(ov, params, "control_weight");
    const double a = param_or(ov, params, "diffusion");
    return ParabolicProblem(
        "filippov", grid, 1, DiffusionTensor::isotropic(1, a),
        fields::scalar_affine(0.0, 1.0, 0.0),
        costs::quadratic_tracking(1, 1.0, r, nullptr), std::nullopt,
        Eigen::VectorXd::Zero(grid.interior_nodes()),
        ControlSet::box({-1.0}, {1.0}), flags);
  };
  return p;
}

Preset make_broken_gradient() {
  Preset p;
  p.name = "broken-gradient";
  p.description = "Negative-control fixture: the chatter problem with a "
                  "deliberately inconsistent dphi/dy evaluator.";
  p.params = {
      {"skew", {1.05, 0.5, 2.0, "factor applied to the reported dphi/dy"}},
  };
  p.default_grid = {1, {16}, {1.0}, 20, 1.0};
  p.default_dictionary_count = 3;
  p.flags.autonomous = true;
  p.flags.cost_quadratic = true;
  p.flags.orientor_convex = false;
  p.flags.semi_monotonicity_a1 = 0.0;
  p.flags.differentiable = true;
  p.build = [params = p.params, flags = p.flags](
                const Grid& grid, const std::map<std::string, double>& ov) {
    const double skew = param_or(ov, params, "skew");
    CostDensity phi = costs::double_well(1.0);
    phi.dy = [skew](double, std::span<const double>, std::span<const double> y,
                    std::span<const double>, std::span<double> out) {
      out[0] = skew * 2.0 * y[0];
    };
    phi.name = "double_well_skewed";
    return ParabolicProblem(
        "broken-gradient", grid, 1, DiffusionTensor::isotropic(1, 1.0),
        fields::scalar_affine(0.0, 1.0, 0.0), std::move(phi), std::nullopt,
        sine_initial(grid), ControlSet::box({-1.0}, {1.0}), flags);
  };
  return p;
}

}  // namespace

const std::map<std::string, Preset>& preset_registry() {
  static const std::map<std::string, Preset> registry = [] {
    std::map<std::string, Preset> r;
    for (auto&& p : {make_lq(), make_chatter(), make_composite(),
                     make_filippov(), make_broken_gradient()}) {
      r.emplace(p.name, p);
    }
    return r;
  }();
  return registry;
}

ParabolicProblem build_preset(const std::string& name, const Grid& grid,
                              const std::map<std::string, double>& overrides) {
  const auto& reg = preset_registry();
  auto it = reg.find(name);
  if (it == reg.end()) {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  const Preset& preset = it->second;
  for (const auto& [key, value] : overrides) {
    auto pit = preset.params.find(key);
    if (pit == preset.params.end()) {
      throw std::invalid_argument("preset '" + name +
                                  "' has no parameter '" + key + "'");
    }
    if (value < pit->second.lo || value > pit->second.hi) {
      throw std::invalid_argument(
          "preset '" + name + "' parameter '" + key + "' out of range [" +
          std::to_string(pit->second.lo) + ", " + std::to_string(pit->second.hi) +
          "]");
    }
  }
  return preset.build(grid, overrides);
}

}  // namespace relaxctrl
