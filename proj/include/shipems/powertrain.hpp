#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shipems/config.hpp"
#include "shipems/profiles.hpp"

namespace shipems {

class EpisodeTerminatedError : public std::logic_error {
public:
    EpisodeTerminatedError()
        : std::logic_error("step() called on a terminated episode; call reset() first") {}
};

struct SystemState {
    std::vector<double> x;   // per-cluster per-unit power, each in [0, 1]
    double soc = 1.0;        // battery state of charge
    bool spa = false;        // shore power available
    double p_dem_kw = 0.0;   // total power demand

    std::size_t dim() const { return x.size() + 3; }

    void flatten(std::span<double> out) const {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k];
        out[x.size()] = soc;
        out[x.size() + 1] = spa ? 1.0 : 0.0;
        out[x.size() + 2] = p_dem_kw;
    }

    std::vector<double> flatten() const {
        std::vector<double> out(dim());
        flatten(std::span<double>(out));
        return out;
    }

    void validate(const ShipConfig& cfg) const {
        if (x.size() != static_cast<std::size_t>(cfg.n_clusters))
            throw std::invalid_argument("state has wrong cluster count");
        for (double v : x)
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument("cluster power outside [0, 1]");
        if (soc < 0.0 || soc > 1.0) throw std::invalid_argument("soc outside [0, 1]");
        if (p_dem_kw < 0.0) throw std::invalid_argument("negative power demand");
    }
};

struct Action {
    std::vector<double> a;  // per-cluster per-unit adjustment in [-a_M, +a_M]

    void validate(const ShipConfig& cfg) const {
        if (a.size() != static_cast<std::size_t>(cfg.n_clusters))
            throw std::invalid_argument("action has wrong cluster count");
        for (double v : a)
            if (std::abs(v) > cfg.action_limit + 1e-9)
                throw std::invalid_argument("action component outside [-a_M, +a_M]");
    }

    static Action zeros(int m) { return Action{std::vector<double>(static_cast<std::size_t>(m), 0.0)}; }
};

struct CostBreakdown {
    double c_b = 0.0;     // battery degradation [$]
    double c_f = 0.0;     // fuel-cell degradation [$]
    double c_h = 0.0;     // hydrogen [$]
    double c_e = 0.0;     // shore electricity [$]
    double gwp_kg = 0.0;  // CO2-equivalent mass [kg]
    double h2_kg = 0.0;   // hydrogen mass, kept for emission reports
    double shore_kwh = 0.0;

    double total() const { return c_b + c_f + c_h + c_e; }

    CostBreakdown& operator+=(const CostBreakdown& o) {
        c_b += o.c_b;
        c_f += o.c_f;
        c_h += o.c_h;
        c_e += o.c_e;
        gwp_kg += o.gwp_kg;
        h2_kg += o.h2_kg;
        shore_kwh += o.shore_kwh;
        return *this;
    }
};

enum class TerminationReason { none, soc_floor, infeasible, end_of_episode };

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::none: return "none";
        case TerminationReason::soc_floor: return "soc_floor";
        case TerminationReason::infeasible: return "infeasible";
        case TerminationReason::end_of_episode: return "end_of_episode";
    }
    return "?";
}

struct StepOutcome {
    SystemState next_state;
    double reward = 0.0;
    CostBreakdown cost;
    bool terminated = false;
    TerminationReason truncated_reason = TerminationReason::none;
    std::vector<std::uint8_t> overridden;
};

// ---------------------------------------------------------------------------
// Pure per-step physics and cost accounting. These functions are the single
// source of truth: the episodic environment, the optimal-control oracle and
// the brute-force enumerator all run on them.

// Converter-summed fuel-cell output at the given per-unit setpoints.
inline double total_converter_power(std::span<const double> x, const ShipConfig& cfg) {
    const double pc = cfg.cluster_rated_kw();
    double p1 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        p1 += pc * x[k] * cfg.converter_efficiencies[k];
    return p1;
}

inline double total_converter_power(const SystemState& s, const ShipConfig& cfg) {
    return total_converter_power(std::span<const double>(s.x), cfg);
}

// x' = clamp(x + a, 0, 1); clamped components are flagged as overridden.
inline void apply_action(std::span<const double> x, std::span<const double> a,
                         std::span<double> x_out, std::span<std::uint8_t> overridden) {
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double raw = x[k] + a[k];
        const double clamped = std::clamp(raw, 0.0, 1.0);
        x_out[k] = clamped;
        overridden[k] = raw != clamped;
    }
}

inline std::pair<std::vector<double>, std::vector<std::uint8_t>> apply_action(
    const SystemState& s, const Action& act, const ShipConfig& cfg) {
    act.validate(cfg);
    std::vector<double> x(s.x.size());
    std::vector<std::uint8_t> ov(s.x.size());
    apply_action(std::span<const double>(s.x), std::span<const double>(act.a),
                 std::span<double>(x), std::span<std::uint8_t>(ov));
    return {std::move(x), std::move(ov)};
}

struct BatterySplit {
    double batt_kw = 0.0;     // > 0 discharging, < 0 charging
    double soc_next = 0.0;
    double curtail_kw = 0.0;  // surplus the battery could not absorb
    double unmet_kw = 0.0;    // deficit the battery could not supply
};

// Coulomb-counted power balance for one sailing step. The battery covers the
// deficit p_dem - p1 up to its discharge limit (and, with over-discharge
// protection, down to soc_min) or absorbs the surplus up to its charge limit
// and soc_max.
inline BatterySplit battery_balance(double p1_kw, double p_dem_kw, double soc,
                                    bool protection, const ShipConfig& cfg) {
    const double dt_h = cfg.step_hours();
    const double cap = cfg.battery_capacity_kwh;
    BatterySplit r;
    if (p1_kw >= p_dem_kw) {
        const double surplus = p1_kw - p_dem_kw;
        const double room_kw =
            (cfg.soc_max - soc) * cap / (cfg.battery.charge_efficiency * dt_h);
        const double absorb =
            std::max(0.0, std::min({surplus, cfg.battery.charge_power_limit_kw, room_kw}));
        r.batt_kw = -absorb;
        r.curtail_kw = surplus - absorb;
        r.soc_next = soc + absorb * cfg.battery.charge_efficiency * dt_h / cap;
    } else {
        const double deficit = p_dem_kw - p1_kw;
        const double floor = protection ? cfg.soc_min : 0.0;
        const double avail_kw =
            std::max(0.0, soc - floor) * cap * cfg.battery.discharge_efficiency / dt_h;
        const double supply =
            std::max(0.0, std::min({deficit, cfg.battery.discharge_power_limit_kw, avail_kw}));
        r.batt_kw = supply;
        r.unmet_kw = deficit - supply;
        r.soc_next = soc - supply / cfg.battery.discharge_efficiency * dt_h / cap;
    }
    r.soc_next = std::clamp(r.soc_next, 0.0, 1.0);
    return r;
}

inline BatterySplit battery_power(const SystemState& s, double p1_kw,
                                  const ShipConfig& cfg, bool protection = false) {
    return battery_balance(p1_kw, s.p_dem_kw, s.soc, protection, cfg);
}

// Cost of one simulated step. Hydrogen and degradation are accounted per
// cluster and summed; battery cost is throughput-proportional; electricity
// covers all energy drawn from shore.
inline CostBreakdown step_costs(std::span<const double> x_prev,
                                std::span<const double> x_now, double batt_kw,
                                double shore_kw, const ShipConfig& cfg) {
    const double dt_h = cfg.step_hours();
    const double pc = cfg.cluster_rated_kw();
    const auto& deg = cfg.prices.fc_degradation;

    CostBreakdown c;
    double h2_kg = 0.0;
    double c_f = 0.0;
    for (std::size_t k = 0; k < x_now.size(); ++k) {
        const double xk = x_now[k];
        if (xk > 0.0) {
            const double eta = cfg.fc_efficiency.at(xk);
            h2_kg += pc * xk / (eta * cfg.lhv_h2_kwh_per_kg) * dt_h;
        }
        double deg_k = deg.transient_cost_per_kw * std::abs(xk - x_prev[k]);
        if (x_prev[k] == 0.0 && xk > 0.0) deg_k += deg.start_cost_per_kw;
        if (xk > 0.0 && xk < deg.low_power_threshold)
            deg_k += deg.low_power_cost_per_kw_h * dt_h;
        if (xk > deg.high_power_threshold) deg_k += deg.high_power_cost_per_kw_h * dt_h;
        c_f += pc * deg_k;
    }
    const double shore_kwh = shore_kw * dt_h;
    c.h2_kg = h2_kg;
    c.shore_kwh = shore_kwh;
    c.c_h = h2_kg * cfg.prices.h2_per_kg;
    c.c_f = c_f;
    c.c_b = cfg.prices.batt_cost_per_kwh_throughput * std::abs(batt_kw) * dt_h;
    c.c_e = shore_kwh * cfg.prices.elec_per_kwh;
    c.gwp_kg = h2_kg * cfg.gwp.kg_co2e_per_kg_h2 + shore_kwh * cfg.gwp.kg_co2e_per_kwh_elec;
    return c;
}

// tanh(1 / cost) with the cost floored at 1e-9 and the result kept strictly
// below 1 so reward ranges stay half-open.
inline double bounded_tanh_reward(double cost) {
    const double c = std::max(cost, 1e-9);
    return std::min(std::tanh(1.0 / c), 1.0 - 1e-12);
}

// Reward branches. In sailing mode an infeasible next state or any overridden
// cluster action yields -1, otherwise tanh(1/cost). In port mode the summed
// reward over the port-phase step costs is returned.
inline double reward(const SystemState& prev_state, bool outcome_feasible,
                     std::span<const std::uint8_t> overridden, double cost_now,
                     std::span<const double> port_costs) {
    if (prev_state.spa) {
        double sum = 0.0;
        for (double c : port_costs) sum += bounded_tanh_reward(c);
        return sum;
    }
    if (!outcome_feasible) return -1.0;
    for (std::uint8_t o : overridden)
        if (o) return -1.0;
    return bounded_tanh_reward(cost_now);
}

struct StepEffect {
    double p1_kw = 0.0;
    double batt_kw = 0.0;
    double curtail_kw = 0.0;
    double unmet_kw = 0.0;
    double shore_kw = 0.0;
    double soc_next = 0.0;
    CostBreakdown cost;
    bool feasible = true;        // demand fully served
    bool floor_crossed = false;  // soc fell below the termination floor
};

// One sailing step at the post-action setpoints.
inline StepEffect sailing_step_effect(std::span<const double> x_prev,
                                      std::span<const double> x_now, double soc,
                                      double p_dem_kw, bool protection,
                                      const ShipConfig& cfg) {
    StepEffect e;
    e.p1_kw = total_converter_power(x_now, cfg);
    const BatterySplit b = battery_balance(e.p1_kw, p_dem_kw, soc, protection, cfg);
    e.batt_kw = b.batt_kw;
    e.curtail_kw = b.curtail_kw;
    e.unmet_kw = b.unmet_kw;
    e.soc_next = b.soc_next;
    e.feasible = b.unmet_kw <= 1e-9;
    e.floor_crossed = b.soc_next < cfg.soc_terminate_floor;
    e.cost = step_costs(x_prev, x_now, b.batt_kw, 0.0, cfg);
    return e;
}

// One port step: clusters ramp down at the action limit, demand is served by
// the fuel cells first and shore power for the remainder, and the battery is
// charged toward soc_max (fuel-cell surplus first, then shore power).
inline StepEffect port_step_effect(std::span<double> x, double soc, double p_dem_kw,
                                   const ShipConfig& cfg,
                                   std::span<double> x_prev_scratch) {
    const double dt_h = cfg.step_hours();
    const double cap = cfg.battery_capacity_kwh;

    for (std::size_t k = 0; k < x.size(); ++k) {
        x_prev_scratch[k] = x[k];
        x[k] = std::max(0.0, x[k] - cfg.action_limit);
    }

    StepEffect e;
    e.p1_kw = total_converter_power(std::span<const double>(x.data(), x.size()), cfg);
    const double fc_to_dem = std::min(e.p1_kw, p_dem_kw);
    const double fc_surplus = e.p1_kw - fc_to_dem;
    const double shore_to_dem = p_dem_kw - fc_to_dem;

    const double room_kw = (cfg.soc_max - soc) * cap / (cfg.battery.charge_efficiency * dt_h);
    const double want = std::max(0.0, std::min(cfg.battery.charge_power_limit_kw, room_kw));
    const double fc_to_batt = std::min(fc_surplus, want);
    const double shore_to_batt = want - fc_to_batt;
    e.curtail_kw = fc_surplus - fc_to_batt;
    e.batt_kw = -want;
    e.shore_kw = shore_to_dem + shore_to_batt;
    e.soc_next = std::clamp(soc + want * cfg.battery.charge_efficiency * dt_h / cap, 0.0, 1.0);
    e.cost = step_costs(std::span<const double>(x_prev_scratch.data(), x.size()),
                        std::span<const double>(x.data(), x.size()), e.batt_kw,
                        e.shore_kw, cfg);
    return e;
}

struct PortPhaseResult {
    CostBreakdown cost;       // summed over all port steps
    double reward_sum = 0.0;  // sum of per-step tanh terms
    double soc_end = 0.0;
    int steps = 0;
};

// SOC shortfall charge assessed at the end of the sailing phase.
inline double soc_shortfall_cost(double soc_at_voyage_end, const ShipConfig& cfg) {
    return cfg.soc_shortfall_penalty_per_unit * std::max(0.0, cfg.soc_min - soc_at_voyage_end);
}

// ---------------------------------------------------------------------------
// Trajectory logging

struct TrajectoryRow {
    int t = 0;
    double p_dem_kw = 0.0;
    std::vector<double> x;
    double soc = 0.0;
    bool spa = false;
    double batt_kw = 0.0;
    double c_b = 0.0, c_f = 0.0, c_h = 0.0, c_e = 0.0;
    double reward = 0.0;
    std::uint32_t overridden_mask = 0;
};

inline std::string trajectory_header(int m) {
    std::string h = "t,p_dem";
    for (int k = 1; k <= m; ++k) h += ",x_" + std::to_string(k);
    h += ",soc,spa,batt_kw,c_b,c_f,c_h,c_e,reward,overridden_mask";
    return h;
}

inline std::string trajectory_csv(const std::vector<TrajectoryRow>& rows, int m) {
    std::string out = trajectory_header(m) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.t);
        out += ',' + format_double(r.p_dem_kw);
        for (double xk : r.x) out += ',' + format_double(xk);
        out += ',' + format_double(r.soc);
        out += r.spa ? ",1" : ",0";
        out += ',' + format_double(r.batt_kw);
        out += ',' + format_double(r.c_b);
        out += ',' + format_double(r.c_f);
        out += ',' + format_double(r.c_h);
        out += ',' + format_double(r.c_e);
        out += ',' + format_double(r.reward);
        out += ',' + std::to_string(r.overridden_mask);
        out += '\n';
    }
    return out;
}

inline std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw ParseError(path, 0, "empty trajectory file");
    const auto header = split_csv_line(lines[0]);
    if (header.size() < 12 || header[0] != "t" || header.back() != "overridden_mask")
        throw ParseError(path, 1, "unexpected trajectory header");
    const std::size_t m = header.size() - 11;
    std::vector<TrajectoryRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != header.size())
            throw ParseError(path, i + 1, "wrong field count");
        TrajectoryRow r;
        std::size_t c = 0;
        r.t = static_cast<int>(parse_long(f[c++], path, i + 1));
        r.p_dem_kw = parse_double(f[c++], path, i + 1);
        r.x.resize(m);
        for (std::size_t k = 0; k < m; ++k) r.x[k] = parse_double(f[c++], path, i + 1);
        r.soc = parse_double(f[c++], path, i + 1);
        r.spa = parse_long(f[c++], path, i + 1) != 0;
        r.batt_kw = parse_double(f[c++], path, i + 1);
        r.c_b = parse_double(f[c++], path, i + 1);
        r.c_f = parse_double(f[c++], path, i + 1);
        r.c_h = parse_double(f[c++], path, i + 1);
        r.c_e = parse_double(f[c++], path, i + 1);
        r.reward = parse_double(f[c++], path, i + 1);
        r.overridden_mask = static_cast<std::uint32_t>(parse_long(f[c++], path, i + 1));
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Episodic environment

class Environment {
public:
    explicit Environment(ShipConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const ShipConfig& config() const { return cfg_; }

    void set_overdischarge_protection(bool on) { protection_ = on; }
    bool overdischarge_protection() const { return protection_; }

    SystemState reset(const LoadProfile& profile) {
        profile.validate();
        if (profile.samples.front().spa)
            throw std::invalid_argument("profile must start in sailing mode");
        profile_ = profile;
        cursor_ = 0;
        terminated_ = false;
        state_.x.assign(static_cast<std::size_t>(cfg_.n_clusters), cfg_.initial_cluster_power);
        state_.soc = cfg_.soc_max;
        state_.spa = profile_.samples[0].spa;
        state_.p_dem_kw = profile_.samples[0].p_dem_kw;
        log_.clear();
        return state_;
    }

    bool terminated() const { return terminated_; }
    const SystemState& state() const { return state_; }
    std::size_t cursor() const { return cursor_; }
    const std::vector<TrajectoryRow>& trajectory() const { return log_; }

    StepOutcome step(const Action& action) {
        if (profile_.samples.empty())
            throw std::logic_error("step() called before reset()");
        if (terminated_) throw EpisodeTerminatedError();
        return state_.spa ? port_step() : sailing_step(action);
    }

private:
    StepOutcome sailing_step(const Action& action) {
        action.validate(cfg_);
        const std::size_t m = state_.x.size();
        StepOutcome out;
        out.overridden.resize(m);
        std::vector<double> x_now(m);
        apply_action(std::span<const double>(state_.x), std::span<const double>(action.a),
                     std::span<double>(x_now), std::span<std::uint8_t>(out.overridden));

        const StepEffect e = sailing_step_effect(
            std::span<const double>(state_.x), std::span<const double>(x_now), state_.soc,
            state_.p_dem_kw, protection_, cfg_);

        bool any_override = false;
        for (auto o : out.overridden) any_override |= o != 0;
        const bool feasible = e.feasible && !e.floor_crossed;
        out.reward = feasible ? (any_override ? -1.0 : bounded_tanh_reward(e.cost.total()))
                              : -1.0;
        out.cost = e.cost;

        if (!e.feasible) {
            out.truncated_reason = TerminationReason::infeasible;
        } else if (e.floor_crossed) {
            out.truncated_reason = TerminationReason::soc_floor;
        }

        TrajectoryRow row;
        row.t = static_cast<int>(cursor_);
        row.p_dem_kw = state_.p_dem_kw;
        row.x = x_now;
        row.soc = e.soc_next;
        row.spa = false;
        row.batt_kw = e.batt_kw;
        row.c_b = e.cost.c_b;
        row.c_f = e.cost.c_f;
        row.c_h = e.cost.c_h;
        row.c_e = e.cost.c_e;
        row.reward = out.reward;
        for (std::size_t k = 0; k < m; ++k)
            if (out.overridden[k]) row.overridden_mask |= 1u << k;
        log_.push_back(std::move(row));

        ++cursor_;
        state_.x = std::move(x_now);
        state_.soc = e.soc_next;
        state_.spa = profile_.samples[cursor_].spa;
        state_.p_dem_kw = profile_.samples[cursor_].p_dem_kw;
        out.next_state = state_;
        out.terminated = out.truncated_reason != TerminationReason::none;
        terminated_ = out.terminated;
        return out;
    }

    // Port phase: the remaining port steps are simulated mechanically (the
    // action has no effect), their per-step rewards are summed and the
    // episode ends.
    StepOutcome port_step() {
        const std::size_t m = state_.x.size();
        StepOutcome out;
        out.overridden.assign(m, 0);

        std::vector<double> x = state_.x;
        std::vector<double> scratch(m);
        double soc = state_.soc;
        const std::size_t first_port_row = log_.size();
        while (cursor_ < profile_.samples.size()) {
            const auto& sample = profile_.samples[cursor_];
            const StepEffect e =
                port_step_effect(std::span<double>(x), soc, sample.p_dem_kw, cfg_,
                                 std::span<double>(scratch));
            out.cost += e.cost;
            out.reward += bounded_tanh_reward(e.cost.total());

            TrajectoryRow row;
            row.t = static_cast<int>(cursor_);
            row.p_dem_kw = sample.p_dem_kw;
            row.x = x;
            row.soc = e.soc_next;
            row.spa = true;
            row.batt_kw = e.batt_kw;
            row.c_b = e.cost.c_b;
            row.c_f = e.cost.c_f;
            row.c_h = e.cost.c_h;
            row.c_e = e.cost.c_e;
            row.reward = 0.0;
            log_.push_back(std::move(row));

            soc = e.soc_next;
            ++cursor_;
        }
        // the summed reward belongs to the single agent-visible port step
        log_[first_port_row].reward = out.reward;
        out.terminated = true;
        out.truncated_reason = TerminationReason::end_of_episode;
        state_.x = std::move(x);
        state_.soc = soc;
        state_.p_dem_kw = profile_.samples.back().p_dem_kw;
        state_.spa = true;
        out.next_state = state_;
        terminated_ = true;
        return out;
    }

    ShipConfig cfg_;
    LoadProfile profile_;
    std::size_t cursor_ = 0;
    SystemState state_;
    bool terminated_ = false;
    bool protection_ = false;
    std::vector<TrajectoryRow> log_;
};

}  // namespace shipems
