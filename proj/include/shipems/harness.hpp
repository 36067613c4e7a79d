#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "shipems/config.hpp"
#include "shipems/ddp.hpp"
#include "shipems/dense_net.hpp"
#include "shipems/powertrain.hpp"
#include "shipems/profiles.hpp"
#include "shipems/svg_plot.hpp"
#include "shipems/td3.hpp"

namespace shipems {

// ---------------------------------------------------------------------------
// Rollouts and the canonical episode dollar cost. The optimal-control oracle
// minimises exactly this quantity, so agents, baselines and the oracle are
// always compared on the same objective: stage costs, the SOC shortfall
// charge at the end of the sailing phase, port-phase costs, and a flat
// penalty for voyages aborted before reaching port.

using Policy = std::function<Action(const SystemState&)>;

inline Policy zero_policy(int m) {
    return [m](const SystemState&) { return Action::zeros(m); };
}

inline Policy random_policy(int m, double limit, std::shared_ptr<Rng> rng) {
    return [m, limit, rng](const SystemState&) {
        Action a = Action::zeros(m);
        for (auto& v : a.a) v = rng->uniform(-limit, limit);
        return a;
    };
}

inline Policy agent_policy(const Td3Agent& agent) {
    return [&agent](const SystemState& s) { return Action{agent.policy_action(s.flatten())}; };
}

struct RolloutResult {
    double dollars = 0.0;
    CostBreakdown totals;
    double shortfall_cost = 0.0;
    double penalty_cost = 0.0;
    double return_sum = 0.0;
    bool terminated_early = false;
    TerminationReason reason = TerminationReason::none;
    int agent_steps = 0;
    std::vector<TrajectoryRow> trajectory;
};

inline RolloutResult run_episode(Environment& env, const LoadProfile& profile,
                                 const Policy& policy, bool protection) {
    env.set_overdischarge_protection(protection);
    SystemState s = env.reset(profile);
    RolloutResult r;
    double soc_at_sailing_end = env.config().soc_max;
    while (!env.terminated()) {
        const bool acting_in_port = s.spa;
        const StepOutcome out = env.step(policy(s));
        r.totals += out.cost;
        r.dollars += out.cost.total();
        r.return_sum += out.reward;
        ++r.agent_steps;
        if (!acting_in_port) soc_at_sailing_end = out.next_state.soc;
        if (out.terminated) {
            r.reason = out.truncated_reason;
            r.terminated_early = out.truncated_reason != TerminationReason::end_of_episode;
        }
        s = out.next_state;
    }
    r.shortfall_cost = soc_shortfall_cost(soc_at_sailing_end, env.config());
    r.dollars += r.shortfall_cost;
    if (r.terminated_early) {
        r.penalty_cost = env.config().early_termination_penalty;
        r.dollars += r.penalty_cost;
    }
    r.trajectory = env.trajectory();
    return r;
}

inline double mean_episode_dollars(Environment& env, const std::vector<LoadProfile>& voyages,
                                   const Policy& policy, bool protection) {
    double acc = 0.0;
    for (const auto& p : voyages) acc += run_episode(env, p, policy, protection).dollars;
    return acc / static_cast<double>(voyages.size());
}

// ---------------------------------------------------------------------------
// Training protocol: independent multi-seed runs with periodic deterministic
// evaluation (no exploration noise, over-discharge protection enabled).

struct EvalPoint {
    int episode = 0;
    double mean_cost = 0.0;
};

struct SeedResult {
    int seed_index = 0;
    std::uint64_t agent_seed = 0;
    std::vector<EvalPoint> curve;
    bool converged = false;
    double final_mean_cost = 0.0;  // final agent, evaluation voyages
    double slope = 0.0;            // eval-cost trend over the last 1000 episodes
    std::uint64_t env_steps = 0;
    double wall_seconds = 0.0;
    std::string checkpoint_path;
};

struct RunSummary {
    std::vector<SeedResult> seeds;
    std::vector<int> eval_episodes;
    std::vector<double> mean_curve;  // across converged seeds
    std::vector<double> std_curve;
    double baseline_cost = 0.0;  // zero-action policy on the evaluation voyages
    int best_seed = -1;
    std::string best_checkpoint;
    int n_converged = 0;
    double wall_seconds = 0.0;
};

namespace harness_detail {

inline std::vector<double> observation_scale(const ShipConfig& ship, double ceiling_kw) {
    std::vector<double> scale(static_cast<std::size_t>(ship.n_clusters) + 3, 1.0);
    scale.back() = 1.0 / ceiling_kw;
    return scale;
}

// least-squares slope and its standard error
inline std::pair<double, double> trend(const std::vector<EvalPoint>& pts) {
    const std::size_t n = pts.size();
    if (n < 3) return {0.0, 0.0};
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.episode;
        my += p.mean_cost;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        sxx += (p.episode - mx) * (p.episode - mx);
        sxy += (p.episode - mx) * (p.mean_cost - my);
    }
    if (sxx == 0.0) return {0.0, 0.0};
    const double slope = sxy / sxx;
    double ssr = 0.0;
    for (const auto& p : pts) {
        const double fit = my + slope * (p.episode - mx);
        ssr += (p.mean_cost - fit) * (p.mean_cost - fit);
    }
    const double sigma2 = ssr / static_cast<double>(n - 2);
    return {slope, std::sqrt(sigma2 / sxx)};
}

inline std::string seed_dir(const std::string& out_dir, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seed_%02d", i);
    return out_dir + "/" + buf;
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + path);
}

inline void copy_file_bytes(const std::string& from, const std::string& to) {
    write_text_file(to, read_text_file(from));
}

}  // namespace harness_detail

// A seed is converged when its final evaluations stay below twice the
// zero-action baseline and the evaluation-cost trend over the last 1000
// episodes is not increasing beyond noise.
inline bool classify_converged(const std::vector<EvalPoint>& curve, double baseline_cost,
                               int max_episodes, double* slope_out = nullptr) {
    if (curve.empty()) return false;
    const std::size_t tail = std::min<std::size_t>(10, curve.size());
    double final_mean = 0.0;
    for (std::size_t i = curve.size() - tail; i < curve.size(); ++i)
        final_mean += curve[i].mean_cost;
    final_mean /= static_cast<double>(tail);

    std::vector<EvalPoint> window;
    for (const auto& p : curve)
        if (p.episode > max_episodes - 1000) window.push_back(p);
    const auto [slope, stderr_] = harness_detail::trend(window);
    if (slope_out) *slope_out = slope;
    return final_mean < 2.0 * baseline_cost && slope <= 2.0 * stderr_;
}

inline SeedResult train_one_seed(int seed_index, const AppConfig& cfg,
                                 const std::vector<LoadProfile>& train_set,
                                 const std::vector<LoadProfile>& eval_set,
                                 const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const ShipConfig ship = cfg.run_ship();
    const int m = ship.n_clusters;

    SeedResult res;
    res.seed_index = seed_index;
    res.agent_seed = split_seed(cfg.run.seed, 100 + static_cast<std::uint64_t>(seed_index));

    Td3Agent agent(m + 3, m, ship.action_limit, cfg.td3, res.agent_seed,
                   harness_detail::observation_scale(ship, cfg.profiles.plant_ceiling_kw));
    agent.set_config_hash(config_hash(cfg));

    Rng episode_rng(split_seed(cfg.run.seed, 200 + static_cast<std::uint64_t>(seed_index)));
    Environment train_env(ship);
    Environment eval_env(ship);

    const std::string dir = harness_detail::seed_dir(out_dir, seed_index);
    harness_detail::ensure_dir(dir);
    std::string diag_csv = "episode,env_steps,critic1_loss,critic2_loss,actor_objective,mean_abs_td\n";
    std::string curve_csv = "episode,eval_cost\n";

    for (int episode = 1; episode <= cfg.run.max_episodes; ++episode) {
        const LoadProfile& profile =
            train_set[episode_rng.uniform_index(train_set.size())];
        train_env.set_overdischarge_protection(false);
        SystemState s = train_env.reset(profile);
        TrainDiagnostics last_diag;
        while (!train_env.terminated()) {
            const std::vector<double> flat = s.flatten();
            const std::vector<double> a = agent.select_action(flat, true);
            const StepOutcome out = train_env.step(Action{a});
            Transition tr;
            tr.s = flat;
            tr.a = a;
            tr.r = out.reward;
            tr.s_next = out.next_state.flatten();
            tr.terminal = out.terminated;
            const TrainDiagnostics d = agent.observe(tr);
            if (d.updated) last_diag = d;
            s = out.next_state;
        }
        diag_csv += std::to_string(episode) + "," + std::to_string(agent.env_steps()) + "," +
                    format_double(last_diag.critic1_loss) + "," +
                    format_double(last_diag.critic2_loss) + "," +
                    format_double(last_diag.actor_objective) + "," +
                    format_double(last_diag.mean_abs_td) + "\n";

        if (episode % cfg.run.eval_every_episodes == 0) {
            const double cost =
                mean_episode_dollars(eval_env, eval_set, agent_policy(agent), true);
            res.curve.push_back({episode, cost});
            curve_csv += std::to_string(episode) + "," + format_double(cost) + "\n";
        }
    }

    res.env_steps = agent.env_steps();
    res.final_mean_cost = mean_episode_dollars(eval_env, eval_set, agent_policy(agent), true);
    res.checkpoint_path = dir + "/agent.ckpt";
    agent.save(res.checkpoint_path);
    write_text_file(dir + "/curve.csv", curve_csv);
    write_text_file(dir + "/diagnostics.csv", diag_csv);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline RunSummary train_command(const AppConfig& cfg, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    harness_detail::ensure_dir(out_dir);
    const ShipConfig ship = cfg.run_ship();

    const ProfileSet profiles = generate_profiles(cfg.run.seed, cfg.run.n_profiles, cfg.profiles);
    harness_detail::ensure_dir(out_dir + "/profiles");
    for (std::size_t i = 0; i < profiles.train.size(); ++i)
        write_profile_csv(profiles.train[i],
                          out_dir + "/profiles/train_" + std::to_string(i) + ".csv");
    for (std::size_t i = 0; i < profiles.validation.size(); ++i)
        write_profile_csv(profiles.validation[i],
                          out_dir + "/profiles/validation_" + std::to_string(i) + ".csv");

    // evaluation voyages: a fixed random subset of the training set
    std::vector<LoadProfile> eval_set;
    {
        Rng pick(split_seed(cfg.run.seed, 1));
        std::vector<std::size_t> idx(profiles.train.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[pick.uniform_index(i)]);
        const std::size_t k =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.run.eval_voyages), idx.size());
        for (std::size_t i = 0; i < k; ++i) eval_set.push_back(profiles.train[idx[i]]);
    }

    RunSummary summary;
    {
        Environment env(ship);
        summary.baseline_cost =
            mean_episode_dollars(env, eval_set, zero_policy(ship.n_clusters), true);
    }

    summary.seeds.resize(static_cast<std::size_t>(cfg.run.n_seeds));
    {
        unsigned hw = std::thread::hardware_concurrency();
        if (hw == 0) hw = 1;
        const int workers = std::min<int>(cfg.run.threads > 0 ? cfg.run.threads : static_cast<int>(hw),
                                          cfg.run.n_seeds);
        std::atomic<int> next{0};
        auto work = [&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= cfg.run.n_seeds) return;
                summary.seeds[static_cast<std::size_t>(i)] =
                    train_one_seed(i, cfg, profiles.train, eval_set, out_dir);
            }
        };
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (auto& seed : summary.seeds) {
        seed.converged = classify_converged(seed.curve, summary.baseline_cost,
                                            cfg.run.max_episodes, &seed.slope);
        if (seed.converged) ++summary.n_converged;
    }

    // aggregate curves over converged seeds (all seeds if none converged)
    const bool any = summary.n_converged > 0;
    if (!summary.seeds.empty() && !summary.seeds[0].curve.empty()) {
        const std::size_t n_points = summary.seeds[0].curve.size();
        for (std::size_t k = 0; k < n_points; ++k) {
            double mean = 0.0;
            int n = 0;
            for (const auto& s : summary.seeds) {
                if (any && !s.converged) continue;
                mean += s.curve[k].mean_cost;
                ++n;
            }
            mean /= std::max(1, n);
            double var = 0.0;
            for (const auto& s : summary.seeds) {
                if (any && !s.converged) continue;
                var += (s.curve[k].mean_cost - mean) * (s.curve[k].mean_cost - mean);
            }
            var /= std::max(1, n);
            summary.eval_episodes.push_back(summary.seeds[0].curve[k].episode);
            summary.mean_curve.push_back(mean);
            summary.std_curve.push_back(std::sqrt(var));
        }
    }

    // best agent: lowest final evaluation cost among converged seeds
    for (std::size_t i = 0; i < summary.seeds.size(); ++i) {
        const auto& s = summary.seeds[i];
        if (any && !s.converged) continue;
        if (summary.best_seed < 0 ||
            s.final_mean_cost < summary.seeds[static_cast<std::size_t>(summary.best_seed)].final_mean_cost)
            summary.best_seed = static_cast<int>(i);
    }
    if (summary.best_seed >= 0) {
        summary.best_checkpoint = out_dir + "/best_agent.ckpt";
        harness_detail::copy_file_bytes(
            summary.seeds[static_cast<std::size_t>(summary.best_seed)].checkpoint_path,
            summary.best_checkpoint);
    }

    // aggregate csv + plot
    {
        std::string csv = "episode,mean_cost,std_cost,n_converged\n";
        for (std::size_t k = 0; k < summary.eval_episodes.size(); ++k)
            csv += std::to_string(summary.eval_episodes[k]) + "," +
                   format_double(summary.mean_curve[k]) + "," +
                   format_double(summary.std_curve[k]) + "," +
                   std::to_string(summary.n_converged) + "\n";
        write_text_file(out_dir + "/aggregate_curve.csv", csv);

        // moving average over up to 100 evaluation points for the plot
        PlotSeries mean_series{"mean eval cost (moving avg)", {}, "#1f77b4"};
        PlotBand band;
        const std::size_t window =
            std::min<std::size_t>(100, std::max<std::size_t>(1, summary.eval_episodes.size()));
        for (std::size_t k = 0; k < summary.eval_episodes.size(); ++k) {
            const std::size_t lo = k + 1 >= window ? k + 1 - window : 0;
            double acc = 0.0, accs = 0.0;
            for (std::size_t j = lo; j <= k; ++j) {
                acc += summary.mean_curve[j];
                accs += summary.std_curve[j];
            }
            const double n = static_cast<double>(k - lo + 1);
            const double x = summary.eval_episodes[k];
            mean_series.points.push_back({x, acc / n});
            band.lower.push_back({x, acc / n - accs / n});
            band.upper.push_back({x, acc / n + accs / n});
        }
        PlotSeries baseline{"zero-action baseline", {}, "#d62728"};
        if (!summary.eval_episodes.empty()) {
            baseline.points.push_back({static_cast<double>(summary.eval_episodes.front()),
                                       summary.baseline_cost});
            baseline.points.push_back({static_cast<double>(summary.eval_episodes.back()),
                                       summary.baseline_cost});
        }
        write_svg_chart(out_dir + "/learning_curve.svg", "Periodic evaluation cost",
                        "episode", "mean voyage cost [$]", {mean_series, baseline}, &band);
    }

    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // summary json (wall-clock kept separate from the reproducible artifacts)
    {
        nlohmann::json j;
        j["baseline_cost"] = summary.baseline_cost;
        j["n_converged"] = summary.n_converged;
        j["best_seed"] = summary.best_seed;
        j["best_checkpoint"] = summary.best_checkpoint;
        j["wall_seconds"] = summary.wall_seconds;
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto& s : summary.seeds) {
            seeds.push_back({{"seed_index", s.seed_index},
                             {"agent_seed", s.agent_seed},
                             {"converged", s.converged},
                             {"final_mean_cost", s.final_mean_cost},
                             {"slope", s.slope},
                             {"env_steps", s.env_steps},
                             {"wall_seconds", s.wall_seconds},
                             {"checkpoint", s.checkpoint_path}});
        }
        j["seeds"] = seeds;
        write_text_file(out_dir + "/summary.json", j.dump(2) + "\n");
    }
    save_app_config(cfg, out_dir + "/config.json");
    return summary;
}

// ---------------------------------------------------------------------------
// Evaluation reports in the voyage-cost table layout: PEMFC / Battery /
// Electricity / H2 rows with a Sum row equal to the column totals, cost and
// GWP columns, and ratio columns when a baseline report is supplied.

struct VoyageReport {
    std::string profile_id;
    CostBreakdown totals;
    double dollars = 0.0;
    double shortfall_cost = 0.0;
    double penalty_cost = 0.0;
    bool terminated_early = false;
    TerminationReason reason = TerminationReason::none;
};

struct EvalReport {
    std::vector<VoyageReport> voyages;
    CostBreakdown mean_totals;
    double mean_dollars = 0.0;
    int early_terminations = 0;
};

inline EvalReport evaluate_agent(const Td3Agent& agent, const std::vector<LoadProfile>& voyages,
                                 const ShipConfig& ship) {
    if (agent.state_dim() != ship.n_clusters + 3 || agent.action_dim() != ship.n_clusters)
        throw std::invalid_argument(
            "checkpoint/config dimension mismatch: agent expects m = " +
            std::to_string(agent.action_dim()) + ", config has m = " +
            std::to_string(ship.n_clusters));
    Environment env(ship);
    EvalReport rep;
    for (const auto& p : voyages) {
        const RolloutResult r = run_episode(env, p, agent_policy(agent), true);
        VoyageReport v;
        v.profile_id = p.id;
        v.totals = r.totals;
        v.dollars = r.dollars;
        v.shortfall_cost = r.shortfall_cost;
        v.penalty_cost = r.penalty_cost;
        v.terminated_early = r.terminated_early;
        v.reason = r.reason;
        if (r.terminated_early) ++rep.early_terminations;
        rep.voyages.push_back(std::move(v));
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, rep.voyages.size()));
    for (const auto& v : rep.voyages) {
        rep.mean_totals += v.totals;
        rep.mean_dollars += v.dollars;
    }
    rep.mean_totals.c_b /= n;
    rep.mean_totals.c_f /= n;
    rep.mean_totals.c_h /= n;
    rep.mean_totals.c_e /= n;
    rep.mean_totals.gwp_kg /= n;
    rep.mean_totals.h2_kg /= n;
    rep.mean_totals.shore_kwh /= n;
    rep.mean_dollars /= n;
    return rep;
}

struct TableRow {
    std::string label;
    double cost_a = 0.0, cost_b = 0.0, cost_ratio = 0.0;
    double gwp_a = 0.0, gwp_b = 0.0, gwp_ratio = 0.0;
    bool has_gwp = false;
};

struct CostTable {
    std::vector<TableRow> rows;  // pemfc, battery, electricity, h2, sum
    bool has_baseline = false;
};

namespace harness_detail {

inline double ratio_pct(double a, double b) {
    if (a == b) return 100.0;
    if (b == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return a / b * 100.0;
}

}  // namespace harness_detail

// The table recomputes its Sum row from the printed component values so the
// emitted file is exactly column-consistent.
inline CostTable make_cost_table(const CostBreakdown& a, const CostBreakdown* b,
                                 const ShipConfig& ship) {
    const double a_gwp_e = a.shore_kwh * ship.gwp.kg_co2e_per_kwh_elec;
    const double a_gwp_h = a.h2_kg * ship.gwp.kg_co2e_per_kg_h2;
    CostTable t;
    t.has_baseline = b != nullptr;
    const double b_gwp_e = b ? b->shore_kwh * ship.gwp.kg_co2e_per_kwh_elec : 0.0;
    const double b_gwp_h = b ? b->h2_kg * ship.gwp.kg_co2e_per_kg_h2 : 0.0;

    TableRow pemfc{"pemfc", a.c_f, b ? b->c_f : 0.0, 0.0, 0.0, 0.0, 0.0, false};
    TableRow battery{"battery", a.c_b, b ? b->c_b : 0.0, 0.0, 0.0, 0.0, 0.0, false};
    TableRow elec{"electricity", a.c_e, b ? b->c_e : 0.0, 0.0, a_gwp_e, b_gwp_e, 0.0, true};
    TableRow h2{"h2", a.c_h, b ? b->c_h : 0.0, 0.0, a_gwp_h, b_gwp_h, 0.0, true};
    TableRow sum{"sum",
                 pemfc.cost_a + battery.cost_a + elec.cost_a + h2.cost_a,
                 pemfc.cost_b + battery.cost_b + elec.cost_b + h2.cost_b,
                 0.0,
                 elec.gwp_a + h2.gwp_a,
                 elec.gwp_b + h2.gwp_b,
                 0.0,
                 true};
    for (TableRow* r : {&pemfc, &battery, &elec, &h2, &sum}) {
        r->cost_ratio = harness_detail::ratio_pct(r->cost_a, r->cost_b);
        r->gwp_ratio = harness_detail::ratio_pct(r->gwp_a, r->gwp_b);
    }
    t.rows = {pemfc, battery, elec, h2, sum};
    return t;
}

inline std::string cost_table_csv(const CostTable& t) {
    std::string out = "row,cost,cost_baseline,cost_ratio_pct,gwp_kg,gwp_baseline,gwp_ratio_pct\n";
    auto cell = [](double v, bool present) { return present ? format_double(v) : std::string(); };
    for (const auto& r : t.rows) {
        out += r.label;
        out += ',' + format_double(r.cost_a);
        out += ',' + cell(r.cost_b, t.has_baseline);
        out += ',' + (t.has_baseline && !std::isnan(r.cost_ratio) ? format_double(r.cost_ratio)
                                                                  : std::string());
        out += ',' + cell(r.gwp_a, r.has_gwp);
        out += ',' + cell(r.gwp_b, r.has_gwp && t.has_baseline);
        out += ',' + (r.has_gwp && t.has_baseline && !std::isnan(r.gwp_ratio)
                          ? format_double(r.gwp_ratio)
                          : std::string());
        out += '\n';
    }
    return out;
}

inline std::string cost_table_text(const CostTable& t, const std::string& a_name,
                                   const std::string& b_name) {
    char buf[256];
    std::string out;
    if (t.has_baseline) {
        std::snprintf(buf, sizeof(buf), "%-12s %12s %12s %9s %12s %12s %9s\n", "",
                      (a_name + " [$]").c_str(), (b_name + " [$]").c_str(), "[%]",
                      (a_name + " [kg]").c_str(), (b_name + " [kg]").c_str(), "[%]");
        out += buf;
        for (const auto& r : t.rows) {
            std::string label = r.label == "sum" ? "Sum" : r.label;
            if (r.has_gwp)
                std::snprintf(buf, sizeof(buf), "%-12s %12.1f %12.1f %9.1f %12.1f %12.1f %9.1f\n",
                              label.c_str(), r.cost_a, r.cost_b, r.cost_ratio, r.gwp_a, r.gwp_b,
                              r.gwp_ratio);
            else
                std::snprintf(buf, sizeof(buf), "%-12s %12.1f %12.1f %9.1f %12s %12s %9s\n",
                              label.c_str(), r.cost_a, r.cost_b, r.cost_ratio, "-", "-", "-");
            out += buf;
        }
    } else {
        std::snprintf(buf, sizeof(buf), "%-12s %12s %12s\n", "", "cost [$]", "GWP [kg]");
        out += buf;
        for (const auto& r : t.rows) {
            std::string label = r.label == "sum" ? "Sum" : r.label;
            if (r.has_gwp)
                std::snprintf(buf, sizeof(buf), "%-12s %12.1f %12.1f\n", label.c_str(), r.cost_a,
                              r.gwp_a);
            else
                std::snprintf(buf, sizeof(buf), "%-12s %12.1f %12s\n", label.c_str(), r.cost_a,
                              "-");
            out += buf;
        }
    }
    return out;
}

// evaluate subcommand: per-voyage tables plus an averages table
inline EvalReport evaluate_command(const Td3Agent& agent, const Td3Agent* baseline,
                                   const std::vector<LoadProfile>& voyages,
                                   const ShipConfig& ship, const ShipConfig* baseline_ship,
                                   const std::string& out_dir) {
    harness_detail::ensure_dir(out_dir);
    const EvalReport rep = evaluate_agent(agent, voyages, ship);
    EvalReport base_rep;
    if (baseline)
        base_rep = evaluate_agent(*baseline, voyages, baseline_ship ? *baseline_ship : ship);

    std::string voyage_csv =
        "profile,c_b,c_f,c_h,c_e,sum,gwp_kg,shortfall,penalty,terminated_early,reason\n";
    for (const auto& v : rep.voyages) {
        voyage_csv += v.profile_id;
        voyage_csv += ',' + format_double(v.totals.c_b);
        voyage_csv += ',' + format_double(v.totals.c_f);
        voyage_csv += ',' + format_double(v.totals.c_h);
        voyage_csv += ',' + format_double(v.totals.c_e);
        voyage_csv += ',' + format_double(v.totals.total());
        voyage_csv += ',' + format_double(v.totals.gwp_kg);
        voyage_csv += ',' + format_double(v.shortfall_cost);
        voyage_csv += ',' + format_double(v.penalty_cost);
        voyage_csv += v.terminated_early ? ",1," : ",0,";
        voyage_csv += to_string(v.reason);
        voyage_csv += '\n';
    }
    write_text_file(out_dir + "/voyages.csv", voyage_csv);

    for (std::size_t i = 0; i < rep.voyages.size(); ++i) {
        const CostBreakdown* b = baseline && i < base_rep.voyages.size()
                                     ? &base_rep.voyages[i].totals
                                     : nullptr;
        const CostTable t = make_cost_table(rep.voyages[i].totals, b, ship);
        write_text_file(out_dir + "/table_" + rep.voyages[i].profile_id + ".csv",
                        cost_table_csv(t));
    }
    const CostTable avg =
        make_cost_table(rep.mean_totals, baseline ? &base_rep.mean_totals : nullptr, ship);
    write_text_file(out_dir + "/table_average.csv", cost_table_csv(avg));
    write_text_file(out_dir + "/table_average.txt",
                    cost_table_text(avg, "agent", baseline ? "baseline" : ""));
    return rep;
}

// ---------------------------------------------------------------------------
// Benchmark against the offline-optimal oracle.

struct BenchmarkRow {
    std::string profile_id;
    double dp_cost = 0.0;
    double agent_cost = 0.0;
    double ratio_pct = 0.0;
    double dp_gwp = 0.0;
    double agent_gwp = 0.0;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    double avg_dp_cost = 0.0;
    double avg_agent_cost = 0.0;
    double avg_ratio_pct = 0.0;
    double avg_dp_gwp = 0.0;
    double avg_agent_gwp = 0.0;
    double gwp_ratio_pct = 0.0;
    double dp_runtime_seconds = 0.0;
};

inline BenchmarkReport benchmark_agent(const Td3Agent& agent,
                                       const std::vector<LoadProfile>& voyages,
                                       const ShipConfig& ship, const DpGridConfig& grid_cfg,
                                       const std::string& out_dir = "") {
    const ShipConfig oracle_cfg = ship.uniform();
    const DpGrid grid = DpGrid::make(grid_cfg, oracle_cfg);
    Environment env(ship);

    BenchmarkReport rep;
    if (!out_dir.empty()) harness_detail::ensure_dir(out_dir + "/dp");
    for (const auto& p : voyages) {
        const DpSolution sol = solve(p, oracle_cfg, grid);
        const RolloutResult r = run_episode(env, p, agent_policy(agent), true);
        BenchmarkRow row;
        row.profile_id = p.id;
        row.dp_cost = sol.realized_cost;
        row.agent_cost = r.dollars;
        row.ratio_pct = harness_detail::ratio_pct(r.dollars, sol.realized_cost);
        row.dp_gwp = sol.totals.gwp_kg;
        row.agent_gwp = r.totals.gwp_kg;
        rep.rows.push_back(row);
        rep.avg_dp_cost += sol.realized_cost;
        rep.avg_agent_cost += r.dollars;
        rep.avg_dp_gwp += sol.totals.gwp_kg;
        rep.avg_agent_gwp += r.totals.gwp_kg;
        rep.dp_runtime_seconds += sol.runtime_seconds;

        if (!out_dir.empty()) {
            write_text_file(out_dir + "/dp/" + p.id + ".csv",
                            trajectory_csv(sol.trajectory, 1));
            nlohmann::json j;
            j["profile"] = p.id;
            j["optimal_cost"] = sol.optimal_cost;
            j["realized_cost"] = sol.realized_cost;
            j["grid"] = {{"soc_levels", grid.soc_levels()},
                         {"x_levels", grid.x_levels()},
                         {"action_levels", grid.action_levels()}};
            j["runtime_seconds"] = sol.runtime_seconds;
            write_text_file(out_dir + "/dp/" + p.id + ".json", j.dump(2) + "\n");
        }
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, rep.rows.size()));
    rep.avg_dp_cost /= n;
    rep.avg_agent_cost /= n;
    rep.avg_dp_gwp /= n;
    rep.avg_agent_gwp /= n;
    rep.avg_ratio_pct = harness_detail::ratio_pct(rep.avg_agent_cost, rep.avg_dp_cost);
    rep.gwp_ratio_pct = harness_detail::ratio_pct(rep.avg_agent_gwp, rep.avg_dp_gwp);

    if (!out_dir.empty()) {
        std::string csv = "profile,dp_cost,agent_cost,ratio_pct,dp_gwp,agent_gwp\n";
        PlotSeries dp_series{"offline optimum", {}, "#2ca02c"};
        PlotSeries ag_series{"agent", {}, "#1f77b4"};
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const auto& r = rep.rows[i];
            csv += r.profile_id + ',' + format_double(r.dp_cost) + ',' +
                   format_double(r.agent_cost) + ',' + format_double(r.ratio_pct) + ',' +
                   format_double(r.dp_gwp) + ',' + format_double(r.agent_gwp) + '\n';
            dp_series.points.push_back({static_cast<double>(i), r.dp_cost});
            ag_series.points.push_back({static_cast<double>(i), r.agent_cost});
        }
        write_text_file(out_dir + "/benchmark_voyages.csv", csv);

        const std::string algo =
            agent.action_dim() == 1 ? "TD3 uniform" : ("TD3 " + std::to_string(agent.action_dim()) + "-cluster");
        std::string table = "algorithm,avg_cost,ratio_to_ddp_pct,avg_gwp,gwp_ratio_to_ddp_pct\n";
        table += "DDP," + format_double(rep.avg_dp_cost) + ",100.0," +
                 format_double(rep.avg_dp_gwp) + ",100.0\n";
        table += algo + "," + format_double(rep.avg_agent_cost) + "," +
                 format_double(rep.avg_ratio_pct) + "," + format_double(rep.avg_agent_gwp) +
                 "," + format_double(rep.gwp_ratio_pct) + "\n";
        write_text_file(out_dir + "/benchmark_table.csv", table);
        write_svg_chart(out_dir + "/benchmark_costs.svg", "Per-voyage cost vs offline optimum",
                        "voyage index", "episode cost [$]", {dp_series, ag_series});
    }
    return rep;
}

// gradcheck subcommand: finite-difference verification over randomly sized
// actor and critic networks.
struct GradCheckSummary {
    int nets = 0;
    std::size_t params = 0;
    std::size_t passed = 0;
    std::size_t excluded = 0;
    double worst_rel_err = 0.0;
    bool ok = false;
};

inline GradCheckSummary gradcheck_battery(int n_nets, std::uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    GradCheckSummary sum;
    for (int i = 0; i < n_nets; ++i) {
        const int m = static_cast<int>(rng.uniform_int(1, 4));
        const int hidden = static_cast<int>(rng.uniform_int(3, 8));
        const bool actor = i % 2 == 0;
        DenseNet net = actor ? make_actor(m + 3, {hidden, hidden}, m, 0.04, rng)
                             : make_critic(m + 3, m, {hidden, hidden}, rng);
        std::vector<double> input(static_cast<std::size_t>(net.input_dim()));
        for (auto& v : input) v = rng.uniform(-1.0, 1.0);
        std::vector<double> upstream(static_cast<std::size_t>(net.output_dim()));
        for (auto& v : upstream) v = rng.uniform(-1.0, 1.0);
        const GradCheckReport rep = gradient_check(net, input, upstream, 1e-5, tol);
        sum.nets += 1;
        sum.params += rep.n_params;
        sum.passed += rep.n_passed;
        sum.excluded += rep.n_excluded;
        sum.worst_rel_err = std::max(sum.worst_rel_err, rep.max_rel_err);
    }
    const std::size_t considered = sum.params - sum.excluded;
    sum.ok = considered > 0 &&
             static_cast<double>(sum.passed) / static_cast<double>(considered) >= 0.99;
    return sum;
}

}  // namespace shipems
