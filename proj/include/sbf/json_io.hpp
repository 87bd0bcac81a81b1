#pragma once

// Needs nlohmann/json (vendor/json.hpp).
#include <json.hpp>

#include <string>
#include <vector>

#include "sbf/backfit.hpp"
#include "sbf/forecast.hpp"
#include "sbf/simulation.hpp"

namespace sbf {

inline nlohmann::json fit_to_json(const MultiplicativeFit& fit, const std::vector<std::string>& axis_names = {"reversed_time", "underwriting"}) {
    nlohmann::json j;
    j["alpha_star"] = fit.alpha_star;
    j["residual"] = fit.residual;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["frozen_cells"] = fit.frozen_cells;
    nlohmann::json axes = nlohmann::json::array();
    for (std::size_t k = 0; k < fit.rank(); ++k) {
        const auto& ax = fit.shape.axis(k);
        std::vector<double> centres(ax.n);
        std::vector<bool> active(ax.n);
        for (std::size_t i = 0; i < ax.n; ++i) {
            centres[i] = ax.center(i);
            active[i] = fit.active[k][i];
        }
        axes.push_back({{"name", k < axis_names.size() ? axis_names[k] : "axis" + std::to_string(k)},
                        {"coordinates", centres},
                        {"values", fit.components[k]},
                        {"weights", fit.norm_weights[k]},
                        {"active", active}});
    }
    j["components"] = axes;
    return j;
}

inline PiecewiseLinear table_from_json(const nlohmann::json& j) {
    PiecewiseLinear t;
    if (j.is_number()) return PiecewiseLinear::constant(j.get<double>());
    t.x = j.at("x").get<std::vector<double>>();
    t.y = j.at("y").get<std::vector<double>>();
    return t;
}

inline nlohmann::json table_to_json(const PiecewiseLinear& t) { return {{"x", t.x}, {"y", t.y}}; }

inline SimScenario scenario_from_json(const nlohmann::json& j) {
    SimScenario s;
    if (j.contains("alpha0")) s.alpha0 = table_from_json(j["alpha0"]);
    if (j.contains("alpha1")) s.alpha1 = table_from_json(j["alpha1"]);
    if (j.contains("underwriting_density")) s.underwriting_density = table_from_json(j["underwriting_density"]);
    s.alpha_star = j.value("alpha_star", s.alpha_star);
    s.horizon = j.value("horizon", s.horizon);
    s.n_target = j.value("n_target", s.n_target);
    s.n_retained = j.value("n_retained", s.n_retained);
    s.underwriting_lattice = j.value("underwriting_lattice", s.underwriting_lattice);
    s.seed = j.value("seed", s.seed);
    return s;
}

inline nlohmann::json forecast_to_json(const ReserveForecast& f) {
    return {{"method", f.method}, {"total", f.total}, {"period_length", f.period_length}, {"cash_flow", f.cash_flow}};
}

}  // namespace sbf
