#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "shipems/config.hpp"
#include "shipems/powertrain.hpp"
#include "shipems/profiles.hpp"

namespace shipems {

class NoFeasiblePolicyError : public std::runtime_error {
public:
    explicit NoFeasiblePolicyError(const std::string& profile_id)
        : std::runtime_error("no feasible policy for profile '" + profile_id + "'") {}
};

// Discretisation for the offline-optimal benchmark. The per-unit grid is
// derived from the action grid so that x + a always lands exactly on a grid
// node; only the SOC axis is interpolated.
struct DpGrid {
    std::vector<double> soc_grid;
    std::vector<double> x_grid;
    std::vector<double> action_values;  // symmetric around zero, includes zero
    double soc_lo = 0.0;
    double soc_spacing = 0.0;
    int half = 0;  // (action_levels - 1) / 2; action i shifts the x index by i - half

    int soc_levels() const { return static_cast<int>(soc_grid.size()); }
    int x_levels() const { return static_cast<int>(x_grid.size()); }
    int action_levels() const { return static_cast<int>(action_values.size()); }

    static DpGrid make(const DpGridConfig& gc, const ShipConfig& cfg) {
        gc.validate();
        DpGrid g;
        g.half = (gc.action_levels - 1) / 2;
        const double spacing = cfg.action_limit / static_cast<double>(g.half);
        for (int i = 0; i < gc.action_levels; ++i)
            g.action_values.push_back(static_cast<double>(i - g.half) * spacing);

        const int x_levels = static_cast<int>(std::lround(1.0 / spacing)) + 1;
        if (std::abs((x_levels - 1) * spacing - 1.0) > 1e-9)
            throw ConfigError(
                "action grid spacing must divide the per-unit power range exactly");
        if (gc.x_levels != 0 && gc.x_levels != x_levels)
            throw ConfigError("x_levels must be 0 (derived) or " + std::to_string(x_levels) +
                              " for this action grid");
        for (int i = 0; i < x_levels; ++i)
            g.x_grid.push_back(std::min(static_cast<double>(i) * spacing, 1.0));
        g.x_grid.back() = 1.0;

        g.soc_lo = cfg.soc_terminate_floor;
        g.soc_spacing = (cfg.soc_max - g.soc_lo) / static_cast<double>(gc.soc_levels - 1);
        for (int i = 0; i < gc.soc_levels; ++i)
            g.soc_grid.push_back(g.soc_lo + static_cast<double>(i) * g.soc_spacing);
        g.soc_grid.back() = cfg.soc_max;
        return g;
    }

    int snap_x_index(double x) const {
        const double spacing = x_grid[1] - x_grid[0];
        const int idx = static_cast<int>(std::lround(x / spacing));
        return std::clamp(idx, 0, x_levels() - 1);
    }
};

struct DpSolution {
    double optimal_cost = 0.0;   // V at the start state (predicted)
    double realized_cost = 0.0;  // cost of the extracted trajectory
    std::vector<std::uint8_t> policy;  // [t][soc][x], argmin action index; 255 = infeasible
    int sailing_steps = 0;
    CostBreakdown totals;  // realized breakdown including the port phase
    std::vector<TrajectoryRow> trajectory;
    double runtime_seconds = 0.0;

    std::uint8_t policy_at(int t, int soc_idx, int x_idx, int soc_levels, int x_levels) const {
        return policy[(static_cast<std::size_t>(t) * soc_levels + soc_idx) * x_levels + x_idx];
    }
};

namespace dp_detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dollars from the end of the sailing phase onward: SOC shortfall charge plus
// the mechanically simulated port phase. Shared verbatim between the solver,
// the enumerator and episode cost reports so all of them price the terminal
// state identically.
inline double terminal_dollars(double x_scalar, double soc, const LoadProfile& profile,
                               std::size_t port_start, const ShipConfig& cfg) {
    double total = soc_shortfall_cost(soc, cfg);
    double x[1] = {x_scalar};
    double scratch[1];
    for (std::size_t i = port_start; i < profile.samples.size(); ++i) {
        const StepEffect e =
            port_step_effect(std::span<double>(x, 1), soc, profile.samples[i].p_dem_kw, cfg,
                             std::span<double>(scratch, 1));
        total += e.cost.total();
        soc = e.soc_next;
    }
    return total;
}

inline double interp_soc(const std::vector<double>& plane, const DpGrid& g, int x_idx,
                         double soc) {
    const int X = g.x_levels();
    const int S = g.soc_levels();
    const double pos = (soc - g.soc_lo) / g.soc_spacing;
    int i = static_cast<int>(std::floor(pos));
    i = std::clamp(i, 0, S - 2);
    const double w = pos - static_cast<double>(i);
    const double lo = plane[static_cast<std::size_t>(i) * X + x_idx];
    if (w < 1e-12) return lo;
    const double hi = plane[(static_cast<std::size_t>(i) + 1) * X + x_idx];
    if (w > 1.0 - 1e-12) return hi;
    if (lo == kInf || hi == kInf) return kInf;
    return (1.0 - w) * lo + w * hi;
}

}  // namespace dp_detail

// Backward value iteration over the sailing phase with full profile
// knowledge, followed by a forward pass that re-minimises at the exact
// (non-gridded) SOC. Stage physics and costs are the environment's own step
// functions, so the oracle and the episodic simulator can never disagree on
// what a step costs.
inline DpSolution solve(const LoadProfile& profile, const ShipConfig& cfg, const DpGrid& grid,
                        std::vector<std::vector<double>>* planes_out = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    if (cfg.n_clusters != 1)
        throw std::invalid_argument(
            "the oracle runs uniform control; reduce the config with ShipConfig::uniform()");
    profile.validate();
    cfg.validate();

    const int T = static_cast<int>(profile.port_start());
    const int S = grid.soc_levels();
    const int X = grid.x_levels();
    const int A = grid.action_levels();
    using dp_detail::kInf;

    DpSolution sol;
    sol.sailing_steps = T;
    sol.policy.assign(static_cast<std::size_t>(T) * S * X, 255);

    std::vector<std::vector<double>> planes(static_cast<std::size_t>(T) + 1);
    planes[static_cast<std::size_t>(T)].resize(static_cast<std::size_t>(S) * X);
    for (int si = 0; si < S; ++si)
        for (int xi = 0; xi < X; ++xi)
            planes[static_cast<std::size_t>(T)][static_cast<std::size_t>(si) * X + xi] =
                dp_detail::terminal_dollars(grid.x_grid[static_cast<std::size_t>(xi)],
                                            grid.soc_grid[static_cast<std::size_t>(si)],
                                            profile, static_cast<std::size_t>(T), cfg);

    double x_prev[1], x_now[1];
    for (int t = T - 1; t >= 0; --t) {
        auto& plane = planes[static_cast<std::size_t>(t)];
        const auto& next = planes[static_cast<std::size_t>(t) + 1];
        plane.assign(static_cast<std::size_t>(S) * X, kInf);
        const double p_dem = profile.samples[static_cast<std::size_t>(t)].p_dem_kw;
        for (int si = 0; si < S; ++si) {
            const double soc = grid.soc_grid[static_cast<std::size_t>(si)];
            for (int xi = 0; xi < X; ++xi) {
                x_prev[0] = grid.x_grid[static_cast<std::size_t>(xi)];
                double best = kInf;
                std::uint8_t best_a = 255;
                for (int ai = 0; ai < A; ++ai) {
                    const int x2 = std::clamp(xi + ai - grid.half, 0, X - 1);
                    x_now[0] = grid.x_grid[static_cast<std::size_t>(x2)];
                    const StepEffect e = sailing_step_effect(
                        std::span<const double>(x_prev, 1), std::span<const double>(x_now, 1),
                        soc, p_dem, false, cfg);
                    if (!e.feasible || e.floor_crossed) continue;
                    const double tail = dp_detail::interp_soc(next, grid, x2, e.soc_next);
                    if (tail == kInf) continue;
                    const double v = e.cost.total() + tail;
                    if (v < best) {
                        best = v;
                        best_a = static_cast<std::uint8_t>(ai);
                    }
                }
                plane[static_cast<std::size_t>(si) * X + xi] = best;
                sol.policy[(static_cast<std::size_t>(t) * S + si) * X + xi] = best_a;
            }
        }
    }

    // forward pass from the exact start state
    const int x0_idx = grid.snap_x_index(cfg.initial_cluster_power);
    double soc = cfg.soc_max;
    int x_idx = x0_idx;
    double x_val = grid.x_grid[static_cast<std::size_t>(x0_idx)];
    sol.optimal_cost = dp_detail::interp_soc(planes[0], grid, x0_idx, soc);
    if (sol.optimal_cost == kInf) throw NoFeasiblePolicyError(profile.id);

    for (int t = 0; t < T; ++t) {
        const double p_dem = profile.samples[static_cast<std::size_t>(t)].p_dem_kw;
        const auto& next = planes[static_cast<std::size_t>(t) + 1];
        double best = kInf;
        int best_x2 = x_idx;
        int best_ai = -1;
        StepEffect best_effect;
        for (int ai = 0; ai < A; ++ai) {
            const int x2 = std::clamp(x_idx + ai - grid.half, 0, X - 1);
            x_prev[0] = x_val;
            x_now[0] = grid.x_grid[static_cast<std::size_t>(x2)];
            const StepEffect e =
                sailing_step_effect(std::span<const double>(x_prev, 1),
                                    std::span<const double>(x_now, 1), soc, p_dem, false, cfg);
            if (!e.feasible || e.floor_crossed) continue;
            const double tail = dp_detail::interp_soc(next, grid, x2, e.soc_next);
            if (tail == kInf) continue;
            const double v = e.cost.total() + tail;
            if (v < best) {
                best = v;
                best_x2 = x2;
                best_ai = ai;
                best_effect = e;
            }
        }
        if (best_ai < 0) throw NoFeasiblePolicyError(profile.id);

        TrajectoryRow row;
        row.t = t;
        row.p_dem_kw = p_dem;
        row.x = {grid.x_grid[static_cast<std::size_t>(best_x2)]};
        row.soc = best_effect.soc_next;
        row.spa = false;
        row.batt_kw = best_effect.batt_kw;
        row.c_b = best_effect.cost.c_b;
        row.c_f = best_effect.cost.c_f;
        row.c_h = best_effect.cost.c_h;
        row.c_e = best_effect.cost.c_e;
        const bool clamped = x_idx + best_ai - grid.half != best_x2;
        row.overridden_mask = clamped ? 1u : 0u;
        row.reward = clamped ? -1.0 : bounded_tanh_reward(best_effect.cost.total());
        sol.trajectory.push_back(std::move(row));

        sol.realized_cost += best_effect.cost.total();
        sol.totals += best_effect.cost;
        soc = best_effect.soc_next;
        x_idx = best_x2;
        x_val = grid.x_grid[static_cast<std::size_t>(best_x2)];
    }

    // port phase, simulated with the environment's port dynamics
    sol.realized_cost += soc_shortfall_cost(soc, cfg);
    {
        double x[1] = {x_val}, scratch[1];
        for (std::size_t i = static_cast<std::size_t>(T); i < profile.samples.size(); ++i) {
            const StepEffect e =
                port_step_effect(std::span<double>(x, 1), soc, profile.samples[i].p_dem_kw,
                                 cfg, std::span<double>(scratch, 1));
            TrajectoryRow row;
            row.t = static_cast<int>(i);
            row.p_dem_kw = profile.samples[i].p_dem_kw;
            row.x = {x[0]};
            row.soc = e.soc_next;
            row.spa = true;
            row.batt_kw = e.batt_kw;
            row.c_b = e.cost.c_b;
            row.c_f = e.cost.c_f;
            row.c_h = e.cost.c_h;
            row.c_e = e.cost.c_e;
            row.reward = bounded_tanh_reward(e.cost.total());
            sol.trajectory.push_back(std::move(row));
            sol.realized_cost += e.cost.total();
            sol.totals += e.cost;
            soc = e.soc_next;
        }
    }

    if (planes_out) *planes_out = std::move(planes);
    sol.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return sol;
}

// Exhaustive minimum over all discrete action sequences, simulated step by
// step on the exact (non-interpolated) dynamics. Validation oracle for
// solve() on tiny instances.
inline double enumerate_cost(const LoadProfile& profile, const ShipConfig& cfg,
                             const DpGrid& grid) {
    if (cfg.n_clusters != 1)
        throw std::invalid_argument("enumeration runs uniform control only");
    if (grid.action_values.empty()) throw std::invalid_argument("empty action grid");
    profile.validate();

    const int T = static_cast<int>(profile.port_start());
    const double combos = std::pow(static_cast<double>(grid.action_levels()), T);
    if (combos > 1e6)
        throw std::invalid_argument("instance too large to enumerate (> 1e6 sequences)");

    const std::size_t port_start = static_cast<std::size_t>(T);

    // recursion mirrors the Bellman sum order: stage cost + best tail
    auto rec = [&](auto&& self, int t, double x, double soc) -> double {
        if (t == T) return dp_detail::terminal_dollars(x, soc, profile, port_start, cfg);
        const double p_dem = profile.samples[static_cast<std::size_t>(t)].p_dem_kw;
        double best = dp_detail::kInf;
        double x_prev[1] = {x}, x_now[1];
        for (double a : grid.action_values) {
            x_now[0] = std::clamp(x + a, 0.0, 1.0);
            const StepEffect e =
                sailing_step_effect(std::span<const double>(x_prev, 1),
                                    std::span<const double>(x_now, 1), soc, p_dem, false, cfg);
            if (!e.feasible || e.floor_crossed) continue;
            const double tail = self(self, t + 1, x_now[0], e.soc_next);
            if (tail == dp_detail::kInf) continue;
            best = std::min(best, e.cost.total() + tail);
        }
        return best;
    };

    const double x0 =
        grid.x_grid[static_cast<std::size_t>(grid.snap_x_index(cfg.initial_cluster_power))];
    const double result = rec(rec, 0, x0, cfg.soc_max);
    if (result == dp_detail::kInf) throw NoFeasiblePolicyError(profile.id);
    return result;
}

}  // namespace shipems
