#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shipems/csv.hpp"

namespace shipems {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BatteryParams {
    double charge_power_limit_kw = 900.0;
    double discharge_power_limit_kw = 1500.0;
    double charge_efficiency = 0.95;
    double discharge_efficiency = 0.95;
};

// Fuel-cell degradation surrogate. Coefficients are per kW of cluster rated
// power so a cost is invariant under regrouping the same installed power
// into a different cluster count.
struct FcDegradationParams {
    double start_cost_per_kw = 0.04;          // charged when a cluster leaves x = 0
    double transient_cost_per_kw = 0.05;      // per unit of |delta x|
    double low_power_cost_per_kw_h = 0.06;    // dwell in (0, low_power_threshold)
    double high_power_cost_per_kw_h = 0.03;   // dwell above high_power_threshold
    double low_power_threshold = 0.12;
    double high_power_threshold = 0.92;
};

struct Prices {
    double h2_per_kg = 5.5;
    double elec_per_kwh = 0.12;
    FcDegradationParams fc_degradation;
    double batt_cost_per_kwh_throughput = 0.08;
};

struct GwpFactors {
    double kg_co2e_per_kg_h2 = 1.0;
    double kg_co2e_per_kwh_elec = 0.2244;
};

// Piecewise-linear system efficiency over per-unit power, clamped at the ends.
struct FcEfficiencyCurve {
    std::vector<std::pair<double, double>> points = {
        {0.0, 0.35}, {0.2, 0.52}, {0.5, 0.55}, {1.0, 0.47}};

    double at(double x) const {
        if (points.empty()) throw ConfigError("fc efficiency curve is empty");
        if (x <= points.front().first) return points.front().second;
        if (x >= points.back().first) return points.back().second;
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (x <= points[i].first) {
                const auto& [x0, y0] = points[i - 1];
                const auto& [x1, y1] = points[i];
                const double w = (x - x0) / (x1 - x0);
                return y0 + w * (y1 - y0);
            }
        }
        return points.back().second;
    }

    void validate() const {
        if (points.empty()) throw ConfigError("fc efficiency curve is empty");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].second <= 0.0 || points[i].second > 1.0)
                throw ConfigError("fc efficiency values must be in (0, 1]");
            if (i > 0 && points[i].first <= points[i - 1].first)
                throw ConfigError("fc efficiency curve abscissae must increase");
        }
    }
};

struct ShipConfig {
    double rated_fc_power_kw = 2940.0;
    int n_clusters = 4;
    double battery_capacity_kwh = 581.0;
    double soc_min = 0.3;
    double soc_max = 0.95;
    double soc_terminate_floor = 0.2;
    std::vector<double> converter_efficiencies = {0.98, 0.98, 0.98, 0.98};
    double action_limit = 0.04;
    double step_seconds = 60.0;
    double initial_cluster_power = 0.25;
    BatteryParams battery;
    Prices prices;
    GwpFactors gwp;
    FcEfficiencyCurve fc_efficiency;
    double lhv_h2_kwh_per_kg = 33.3;
    // Terminal accounting shared by the optimal-control oracle and episode
    // cost reports: $ per unit SOC short of soc_min at voyage end, and a flat
    // $ charge for voyages aborted before reaching port.
    double soc_shortfall_penalty_per_unit = 2000.0;
    double early_termination_penalty = 5000.0;

    double cluster_rated_kw() const {
        return rated_fc_power_kw / static_cast<double>(n_clusters);
    }

    double step_hours() const { return step_seconds / 3600.0; }

    void validate() const {
        if (rated_fc_power_kw <= 0.0) throw ConfigError("rated_fc_power_kw must be > 0");
        if (n_clusters < 1) throw ConfigError("n_clusters must be >= 1");
        if (battery_capacity_kwh <= 0.0) throw ConfigError("battery_capacity_kwh must be > 0");
        if (!(0.0 <= soc_terminate_floor && soc_terminate_floor <= soc_min &&
              soc_min < soc_max && soc_max <= 1.0))
            throw ConfigError("soc bounds must satisfy 0 <= floor <= soc_min < soc_max <= 1");
        if (action_limit <= 0.0) throw ConfigError("action_limit must be > 0");
        if (step_seconds <= 0.0) throw ConfigError("step_seconds must be > 0");
        if (converter_efficiencies.size() != static_cast<std::size_t>(n_clusters))
            throw ConfigError("converter_efficiencies must have one entry per cluster");
        for (double eta : converter_efficiencies)
            if (!(eta > 0.0 && eta <= 1.0))
                throw ConfigError("converter efficiencies must be in (0, 1]");
        if (initial_cluster_power < 0.0 || initial_cluster_power > 1.0)
            throw ConfigError("initial_cluster_power must be in [0, 1]");
        if (battery.charge_efficiency <= 0.0 || battery.charge_efficiency > 1.0 ||
            battery.discharge_efficiency <= 0.0 || battery.discharge_efficiency > 1.0)
            throw ConfigError("battery efficiencies must be in (0, 1]");
        if (battery.charge_power_limit_kw < 0.0 || battery.discharge_power_limit_kw < 0.0)
            throw ConfigError("battery power limits must be >= 0");
        if (lhv_h2_kwh_per_kg <= 0.0) throw ConfigError("lhv_h2_kwh_per_kg must be > 0");
        fc_efficiency.validate();
    }

    // Equivalent single-cluster plant: same installed power, converter
    // efficiency averaged over the equally sized clusters.
    ShipConfig uniform() const {
        ShipConfig c = *this;
        double eta = 0.0;
        for (double e : converter_efficiencies) eta += e;
        eta /= static_cast<double>(converter_efficiencies.size());
        c.n_clusters = 1;
        c.converter_efficiencies = {eta};
        return c;
    }

    ShipConfig with_clusters(int m) const {
        ShipConfig c = *this;
        double eta = 0.0;
        for (double e : converter_efficiencies) eta += e;
        eta /= static_cast<double>(converter_efficiencies.size());
        c.n_clusters = m;
        c.converter_efficiencies.assign(static_cast<std::size_t>(m), eta);
        return c;
    }
};

struct ProfileGenConfig {
    double plant_ceiling_kw = 4370.0;
    int sailing_steps = 60;
    int port_steps = 30;
    double port_demand_kw = 0.0;
    double step_seconds = 60.0;
    std::array<double, 3> class_mix = {1.0, 1.0, 1.0};  // low, moderate, high
    double validation_fraction = 0.2;
    double low_plateau_lo = 0.32, low_plateau_hi = 0.42;
    double moderate_plateau_lo = 0.50, moderate_plateau_hi = 0.64;
    double high_plateau_lo = 0.78, high_plateau_hi = 0.82;
    double manoeuvre_lo = 0.10, manoeuvre_hi = 0.16;
    double fluctuation_amplitude = 0.05;
    // heavy-running voyages fluctuate less in relative terms; also keeps the
    // high-class plateau within battery reach
    double high_fluctuation_scale = 0.5;
    double noise_sigma = 0.015;

    void validate() const {
        if (plant_ceiling_kw <= 0.0) throw ConfigError("plant_ceiling_kw must be > 0");
        if (sailing_steps < 2) throw ConfigError("sailing_steps must be >= 2");
        if (port_steps < 1) throw ConfigError("port_steps must be >= 1");
        if (step_seconds <= 0.0) throw ConfigError("profile step_seconds must be > 0");
        double mix = 0.0;
        for (double w : class_mix) {
            if (w < 0.0) throw ConfigError("class_mix weights must be >= 0");
            mix += w;
        }
        if (mix <= 0.0) throw ConfigError("class_mix must have positive total weight");
        if (validation_fraction < 0.0 || validation_fraction >= 1.0)
            throw ConfigError("validation_fraction must be in [0, 1)");
        if (fluctuation_amplitude < 0.0 || fluctuation_amplitude > 0.10)
            throw ConfigError("fluctuation_amplitude must be in [0, 0.10]");
    }
};

struct Td3Config {
    double gamma = 0.99;
    double tau = 0.005;
    double exploration_sigma = 0.004;  // 0.1 * a_M at the default action limit
    double smoothing_sigma = 0.008;    // 0.2 * a_M
    double noise_clip = 0.02;          // 0.5 * a_M
    int policy_delay = 2;
    int batch_size = 128;
    int update_interval = 1;
    int warmup_steps = 1000;
    std::size_t replay_capacity = 1000000;
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::vector<int> hidden_units = {256, 256};

    void validate() const {
        if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0, 1]");
        if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must be in (0, 1]");
        if (noise_clip <= 0.0) throw ConfigError("noise_clip must be > 0");
        if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (update_interval < 1) throw ConfigError("update_interval must be >= 1");
        if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
        if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
        if (hidden_units.empty()) throw ConfigError("hidden_units must not be empty");
        for (int h : hidden_units)
            if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
    }
};

struct DpGridConfig {
    int soc_levels = 201;
    int action_levels = 9;  // odd, symmetric around zero
    int x_levels = 0;       // 0 = derive from the action grid spacing
    int m_effective = 1;

    void validate() const {
        if (soc_levels < 2) throw ConfigError("soc_levels must be >= 2");
        if (action_levels < 3 || action_levels % 2 == 0)
            throw ConfigError("action_levels must be odd and >= 3");
        if (m_effective != 1)
            throw ConfigError("the oracle supports uniform control only (m_effective = 1)");
    }
};

struct RunConfig {
    int n_seeds = 5;
    int max_episodes = 1500;
    int eval_every_episodes = 50;
    int eval_voyages = 10;
    int n_clusters = 1;  // applied to the ship config for the run
    int n_profiles = 40;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = hardware concurrency
    std::string out_dir = "runs/out";

    void validate() const {
        if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
        if (max_episodes < 1) throw ConfigError("max_episodes must be >= 1");
        if (eval_every_episodes < 1) throw ConfigError("eval_every_episodes must be >= 1");
        if (eval_voyages < 1) throw ConfigError("eval_voyages must be >= 1");
        if (n_clusters < 1) throw ConfigError("n_clusters must be >= 1");
        if (n_profiles < 2) throw ConfigError("n_profiles must be >= 2");
    }
};

struct AppConfig {
    ShipConfig ship;
    ProfileGenConfig profiles;
    Td3Config td3;
    DpGridConfig dp;
    RunConfig run;

    void validate() const {
        ship.validate();
        profiles.validate();
        td3.validate();
        dp.validate();
        run.validate();
    }

    // Ship config with the run-level cluster count applied.
    ShipConfig run_ship() const { return ship.with_clusters(run.n_clusters); }

    // Small configuration for runs that finish in minutes on a desktop.
    static AppConfig desk_preset() {
        AppConfig c;
        c.run.n_seeds = 5;
        c.run.max_episodes = 1500;
        c.run.eval_every_episodes = 50;
        c.run.eval_voyages = 10;
        c.run.n_clusters = 1;
        c.run.n_profiles = 40;
        c.profiles.class_mix = {0.0, 1.0, 0.0};
        c.td3.hidden_units = {64, 64};
        c.td3.batch_size = 64;
        c.td3.warmup_steps = 2000;
        c.td3.replay_capacity = 200000;
        c.td3.actor_lr = 3e-4;
        c.td3.critic_lr = 3e-4;
        c.td3.exploration_sigma = 0.008;
        return c;
    }

    // Full experimental protocol (hours of compute).
    static AppConfig paper_preset() {
        AppConfig c;
        c.run.n_seeds = 28;
        c.run.max_episodes = 8000;
        c.run.eval_every_episodes = 100;
        c.run.eval_voyages = 10;
        c.run.n_clusters = 4;
        c.run.n_profiles = 120;
        c.td3.hidden_units = {256, 256};
        return c;
    }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Unknown keys are rejected so typos do not silently
// fall back to defaults.

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* ctx,
                       std::initializer_list<const char*> known) {
    if (!j.is_object()) throw ConfigError(std::string(ctx) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            throw ConfigError(std::string(ctx) + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void get_to(const nlohmann::json& j, const char* key, T& target) {
    if (auto it = j.find(key); it != j.end()) it->get_to(target);
}

}  // namespace detail

inline nlohmann::json to_json(const ShipConfig& c) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [x, e] : c.fc_efficiency.points) curve.push_back({x, e});
    return {
        {"rated_fc_power_kw", c.rated_fc_power_kw},
        {"n_clusters", c.n_clusters},
        {"battery_capacity_kwh", c.battery_capacity_kwh},
        {"soc_min", c.soc_min},
        {"soc_max", c.soc_max},
        {"soc_terminate_floor", c.soc_terminate_floor},
        {"converter_efficiencies", c.converter_efficiencies},
        {"action_limit", c.action_limit},
        {"step_seconds", c.step_seconds},
        {"initial_cluster_power", c.initial_cluster_power},
        {"battery",
         {{"charge_power_limit_kw", c.battery.charge_power_limit_kw},
          {"discharge_power_limit_kw", c.battery.discharge_power_limit_kw},
          {"charge_efficiency", c.battery.charge_efficiency},
          {"discharge_efficiency", c.battery.discharge_efficiency}}},
        {"prices",
         {{"h2_per_kg", c.prices.h2_per_kg},
          {"elec_per_kwh", c.prices.elec_per_kwh},
          {"batt_cost_per_kwh_throughput", c.prices.batt_cost_per_kwh_throughput},
          {"fc_degradation",
           {{"start_cost_per_kw", c.prices.fc_degradation.start_cost_per_kw},
            {"transient_cost_per_kw", c.prices.fc_degradation.transient_cost_per_kw},
            {"low_power_cost_per_kw_h", c.prices.fc_degradation.low_power_cost_per_kw_h},
            {"high_power_cost_per_kw_h", c.prices.fc_degradation.high_power_cost_per_kw_h},
            {"low_power_threshold", c.prices.fc_degradation.low_power_threshold},
            {"high_power_threshold", c.prices.fc_degradation.high_power_threshold}}}}},
        {"gwp",
         {{"kg_co2e_per_kg_h2", c.gwp.kg_co2e_per_kg_h2},
          {"kg_co2e_per_kwh_elec", c.gwp.kg_co2e_per_kwh_elec}}},
        {"fc_efficiency_curve", curve},
        {"lhv_h2_kwh_per_kg", c.lhv_h2_kwh_per_kg},
        {"soc_shortfall_penalty_per_unit", c.soc_shortfall_penalty_per_unit},
        {"early_termination_penalty", c.early_termination_penalty},
    };
}

inline ShipConfig ship_from_json(const nlohmann::json& j, ShipConfig c = {}) {
    detail::check_keys(j, "ship",
                       {"rated_fc_power_kw", "n_clusters", "battery_capacity_kwh",
                        "soc_min", "soc_max", "soc_terminate_floor",
                        "converter_efficiencies", "action_limit", "step_seconds",
                        "initial_cluster_power", "battery", "prices", "gwp",
                        "fc_efficiency_curve", "lhv_h2_kwh_per_kg",
                        "soc_shortfall_penalty_per_unit", "early_termination_penalty"});
    detail::get_to(j, "rated_fc_power_kw", c.rated_fc_power_kw);
    detail::get_to(j, "n_clusters", c.n_clusters);
    detail::get_to(j, "battery_capacity_kwh", c.battery_capacity_kwh);
    detail::get_to(j, "soc_min", c.soc_min);
    detail::get_to(j, "soc_max", c.soc_max);
    detail::get_to(j, "soc_terminate_floor", c.soc_terminate_floor);
    if (auto it = j.find("converter_efficiencies"); it != j.end()) {
        if (it->is_number()) {
            c.converter_efficiencies.assign(static_cast<std::size_t>(c.n_clusters),
                                            it->get<double>());
        } else {
            it->get_to(c.converter_efficiencies);
        }
    } else if (c.converter_efficiencies.size() != static_cast<std::size_t>(c.n_clusters)) {
        const double eta =
            c.converter_efficiencies.empty() ? 0.98 : c.converter_efficiencies.front();
        c.converter_efficiencies.assign(static_cast<std::size_t>(c.n_clusters), eta);
    }
    detail::get_to(j, "action_limit", c.action_limit);
    detail::get_to(j, "step_seconds", c.step_seconds);
    detail::get_to(j, "initial_cluster_power", c.initial_cluster_power);
    if (auto it = j.find("battery"); it != j.end()) {
        detail::check_keys(*it, "ship.battery",
                           {"charge_power_limit_kw", "discharge_power_limit_kw",
                            "charge_efficiency", "discharge_efficiency"});
        detail::get_to(*it, "charge_power_limit_kw", c.battery.charge_power_limit_kw);
        detail::get_to(*it, "discharge_power_limit_kw", c.battery.discharge_power_limit_kw);
        detail::get_to(*it, "charge_efficiency", c.battery.charge_efficiency);
        detail::get_to(*it, "discharge_efficiency", c.battery.discharge_efficiency);
    }
    if (auto it = j.find("prices"); it != j.end()) {
        detail::check_keys(*it, "ship.prices",
                           {"h2_per_kg", "elec_per_kwh", "batt_cost_per_kwh_throughput",
                            "fc_degradation"});
        detail::get_to(*it, "h2_per_kg", c.prices.h2_per_kg);
        detail::get_to(*it, "elec_per_kwh", c.prices.elec_per_kwh);
        detail::get_to(*it, "batt_cost_per_kwh_throughput",
                       c.prices.batt_cost_per_kwh_throughput);
        if (auto fd = it->find("fc_degradation"); fd != it->end()) {
            detail::check_keys(*fd, "ship.prices.fc_degradation",
                               {"start_cost_per_kw", "transient_cost_per_kw",
                                "low_power_cost_per_kw_h", "high_power_cost_per_kw_h",
                                "low_power_threshold", "high_power_threshold"});
            auto& d = c.prices.fc_degradation;
            detail::get_to(*fd, "start_cost_per_kw", d.start_cost_per_kw);
            detail::get_to(*fd, "transient_cost_per_kw", d.transient_cost_per_kw);
            detail::get_to(*fd, "low_power_cost_per_kw_h", d.low_power_cost_per_kw_h);
            detail::get_to(*fd, "high_power_cost_per_kw_h", d.high_power_cost_per_kw_h);
            detail::get_to(*fd, "low_power_threshold", d.low_power_threshold);
            detail::get_to(*fd, "high_power_threshold", d.high_power_threshold);
        }
    }
    if (auto it = j.find("gwp"); it != j.end()) {
        detail::check_keys(*it, "ship.gwp", {"kg_co2e_per_kg_h2", "kg_co2e_per_kwh_elec"});
        detail::get_to(*it, "kg_co2e_per_kg_h2", c.gwp.kg_co2e_per_kg_h2);
        detail::get_to(*it, "kg_co2e_per_kwh_elec", c.gwp.kg_co2e_per_kwh_elec);
    }
    if (auto it = j.find("fc_efficiency_curve"); it != j.end()) {
        c.fc_efficiency.points.clear();
        for (const auto& p : *it) {
            if (!p.is_array() || p.size() != 2)
                throw ConfigError("fc_efficiency_curve entries must be [x, efficiency]");
            c.fc_efficiency.points.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
    }
    detail::get_to(j, "lhv_h2_kwh_per_kg", c.lhv_h2_kwh_per_kg);
    detail::get_to(j, "soc_shortfall_penalty_per_unit", c.soc_shortfall_penalty_per_unit);
    detail::get_to(j, "early_termination_penalty", c.early_termination_penalty);
    return c;
}

inline nlohmann::json to_json(const ProfileGenConfig& c) {
    return {
        {"plant_ceiling_kw", c.plant_ceiling_kw},
        {"sailing_steps", c.sailing_steps},
        {"port_steps", c.port_steps},
        {"port_demand_kw", c.port_demand_kw},
        {"step_seconds", c.step_seconds},
        {"class_mix", c.class_mix},
        {"validation_fraction", c.validation_fraction},
        {"low_plateau", {c.low_plateau_lo, c.low_plateau_hi}},
        {"moderate_plateau", {c.moderate_plateau_lo, c.moderate_plateau_hi}},
        {"high_plateau", {c.high_plateau_lo, c.high_plateau_hi}},
        {"manoeuvre", {c.manoeuvre_lo, c.manoeuvre_hi}},
        {"fluctuation_amplitude", c.fluctuation_amplitude},
        {"high_fluctuation_scale", c.high_fluctuation_scale},
        {"noise_sigma", c.noise_sigma},
    };
}

inline ProfileGenConfig profiles_from_json(const nlohmann::json& j, ProfileGenConfig c = {}) {
    detail::check_keys(j, "profiles",
                       {"plant_ceiling_kw", "sailing_steps", "port_steps",
                        "port_demand_kw", "step_seconds", "class_mix",
                        "validation_fraction", "low_plateau", "moderate_plateau",
                        "high_plateau", "manoeuvre", "fluctuation_amplitude",
                        "high_fluctuation_scale", "noise_sigma"});
    detail::get_to(j, "plant_ceiling_kw", c.plant_ceiling_kw);
    detail::get_to(j, "sailing_steps", c.sailing_steps);
    detail::get_to(j, "port_steps", c.port_steps);
    detail::get_to(j, "port_demand_kw", c.port_demand_kw);
    detail::get_to(j, "step_seconds", c.step_seconds);
    detail::get_to(j, "class_mix", c.class_mix);
    detail::get_to(j, "validation_fraction", c.validation_fraction);
    auto pair = [&](const char* key, double& lo, double& hi) {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_array() || it->size() != 2)
                throw ConfigError(std::string("profiles.") + key + " must be [lo, hi]");
            lo = (*it)[0].get<double>();
            hi = (*it)[1].get<double>();
        }
    };
    pair("low_plateau", c.low_plateau_lo, c.low_plateau_hi);
    pair("moderate_plateau", c.moderate_plateau_lo, c.moderate_plateau_hi);
    pair("high_plateau", c.high_plateau_lo, c.high_plateau_hi);
    pair("manoeuvre", c.manoeuvre_lo, c.manoeuvre_hi);
    detail::get_to(j, "fluctuation_amplitude", c.fluctuation_amplitude);
    detail::get_to(j, "high_fluctuation_scale", c.high_fluctuation_scale);
    detail::get_to(j, "noise_sigma", c.noise_sigma);
    return c;
}

inline nlohmann::json to_json(const Td3Config& c) {
    return {
        {"gamma", c.gamma},
        {"tau", c.tau},
        {"exploration_sigma", c.exploration_sigma},
        {"smoothing_sigma", c.smoothing_sigma},
        {"noise_clip", c.noise_clip},
        {"policy_delay", c.policy_delay},
        {"batch_size", c.batch_size},
        {"update_interval", c.update_interval},
        {"warmup_steps", c.warmup_steps},
        {"replay_capacity", c.replay_capacity},
        {"actor_lr", c.actor_lr},
        {"critic_lr", c.critic_lr},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_epsilon", c.adam_epsilon},
        {"hidden_units", c.hidden_units},
    };
}

inline Td3Config td3_from_json(const nlohmann::json& j, Td3Config c = {}) {
    detail::check_keys(j, "td3",
                       {"gamma", "tau", "exploration_sigma", "smoothing_sigma",
                        "noise_clip", "policy_delay", "batch_size", "update_interval",
                        "warmup_steps", "replay_capacity", "actor_lr", "critic_lr",
                        "adam_beta1", "adam_beta2", "adam_epsilon", "hidden_units"});
    detail::get_to(j, "gamma", c.gamma);
    detail::get_to(j, "tau", c.tau);
    detail::get_to(j, "exploration_sigma", c.exploration_sigma);
    detail::get_to(j, "smoothing_sigma", c.smoothing_sigma);
    detail::get_to(j, "noise_clip", c.noise_clip);
    detail::get_to(j, "policy_delay", c.policy_delay);
    detail::get_to(j, "batch_size", c.batch_size);
    detail::get_to(j, "update_interval", c.update_interval);
    detail::get_to(j, "warmup_steps", c.warmup_steps);
    detail::get_to(j, "replay_capacity", c.replay_capacity);
    detail::get_to(j, "actor_lr", c.actor_lr);
    detail::get_to(j, "critic_lr", c.critic_lr);
    detail::get_to(j, "adam_beta1", c.adam_beta1);
    detail::get_to(j, "adam_beta2", c.adam_beta2);
    detail::get_to(j, "adam_epsilon", c.adam_epsilon);
    detail::get_to(j, "hidden_units", c.hidden_units);
    return c;
}

inline nlohmann::json to_json(const DpGridConfig& c) {
    return {{"soc_levels", c.soc_levels},
            {"action_levels", c.action_levels},
            {"x_levels", c.x_levels},
            {"m_effective", c.m_effective}};
}

inline DpGridConfig dp_from_json(const nlohmann::json& j, DpGridConfig c = {}) {
    detail::check_keys(j, "dp", {"soc_levels", "action_levels", "x_levels", "m_effective"});
    detail::get_to(j, "soc_levels", c.soc_levels);
    detail::get_to(j, "action_levels", c.action_levels);
    detail::get_to(j, "x_levels", c.x_levels);
    detail::get_to(j, "m_effective", c.m_effective);
    return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
    return {{"n_seeds", c.n_seeds},
            {"max_episodes", c.max_episodes},
            {"eval_every_episodes", c.eval_every_episodes},
            {"eval_voyages", c.eval_voyages},
            {"n_clusters", c.n_clusters},
            {"n_profiles", c.n_profiles},
            {"seed", c.seed},
            {"threads", c.threads},
            {"out_dir", c.out_dir}};
}

inline RunConfig run_from_json(const nlohmann::json& j, RunConfig c = {}) {
    detail::check_keys(j, "run",
                       {"n_seeds", "max_episodes", "eval_every_episodes", "eval_voyages",
                        "n_clusters", "n_profiles", "seed", "threads", "out_dir"});
    detail::get_to(j, "n_seeds", c.n_seeds);
    detail::get_to(j, "max_episodes", c.max_episodes);
    detail::get_to(j, "eval_every_episodes", c.eval_every_episodes);
    detail::get_to(j, "eval_voyages", c.eval_voyages);
    detail::get_to(j, "n_clusters", c.n_clusters);
    detail::get_to(j, "n_profiles", c.n_profiles);
    detail::get_to(j, "seed", c.seed);
    detail::get_to(j, "threads", c.threads);
    detail::get_to(j, "out_dir", c.out_dir);
    return c;
}

inline nlohmann::json to_json(const AppConfig& c) {
    return {{"ship", to_json(c.ship)},
            {"profiles", to_json(c.profiles)},
            {"td3", to_json(c.td3)},
            {"dp", to_json(c.dp)},
            {"run", to_json(c.run)}};
}

inline AppConfig app_from_json(const nlohmann::json& j) {
    detail::check_keys(j, "config", {"preset", "ship", "profiles", "td3", "dp", "run"});
    AppConfig c;
    if (auto it = j.find("preset"); it != j.end()) {
        const std::string name = it->get<std::string>();
        if (name == "desk") c = AppConfig::desk_preset();
        else if (name == "paper") c = AppConfig::paper_preset();
        else if (name != "default")
            throw ConfigError("unknown preset '" + name + "' (expected desk, paper or default)");
    }
    // Fields not present in the file keep their preset/default values.
    if (auto it = j.find("ship"); it != j.end()) c.ship = ship_from_json(*it, c.ship);
    if (auto it = j.find("profiles"); it != j.end()) c.profiles = profiles_from_json(*it, c.profiles);
    if (auto it = j.find("td3"); it != j.end()) c.td3 = td3_from_json(*it, c.td3);
    if (auto it = j.find("dp"); it != j.end()) c.dp = dp_from_json(*it, c.dp);
    if (auto it = j.find("run"); it != j.end()) c.run = run_from_json(*it, c.run);
    c.validate();
    return c;
}

inline AppConfig load_app_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return app_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void save_app_config(const AppConfig& c, const std::string& path) {
    write_text_file(path, to_json(c).dump(2) + "\n");
}

// FNV-1a over the canonical JSON rendering; identifies configs in checkpoints.
// The output directory and worker count do not change the experiment, so they
// are excluded.
inline std::uint64_t config_hash(const AppConfig& c) {
    AppConfig canon = c;
    canon.run.out_dir.clear();
    canon.run.threads = 0;
    const std::string s = to_json(canon).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace shipems
