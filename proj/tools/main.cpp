// Command-line front end: profile generation, multi-seed training, report
// evaluation, offline-optimal benchmarking and gradient verification.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shipems/config.hpp"
#include "shipems/ddp.hpp"
#include "shipems/harness.hpp"
#include "shipems/powertrain.hpp"
#include "shipems/profiles.hpp"
#include "shipems/svg_plot.hpp"
#include "shipems/td3.hpp"

namespace {

using namespace shipems;

AppConfig load_config(const std::string& config_path, const std::string& preset,
                      std::optional<std::uint64_t> seed_override) {
    AppConfig cfg;
    if (!config_path.empty()) {
        cfg = load_app_config(config_path);
    } else if (preset == "desk") {
        cfg = AppConfig::desk_preset();
    } else if (preset == "paper") {
        cfg = AppConfig::paper_preset();
    }
    if (seed_override) cfg.run.seed = *seed_override;
    cfg.validate();
    return cfg;
}

std::vector<LoadProfile> load_profile_dir(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv" &&
            e.path().filename().string() != "manifest.csv")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    std::vector<LoadProfile> out;
    for (const auto& f : files) out.push_back(read_profile_csv(f));
    if (out.empty()) throw std::runtime_error("no .csv profiles found in " + dir);
    return out;
}

// profiles for evaluation/benchmark: an explicit directory wins, otherwise
// the generator's validation split for the configured seed
std::vector<LoadProfile> evaluation_profiles(const AppConfig& cfg, const std::string& dir) {
    if (!dir.empty()) return load_profile_dir(dir);
    const ProfileSet set = generate_profiles(cfg.run.seed, cfg.run.n_profiles, cfg.profiles);
    return set.validation;
}

int cmd_generate(const AppConfig& cfg, const std::string& out, int count) {
    std::filesystem::create_directories(out);
    const int n = count > 0 ? count : cfg.run.n_profiles;
    const ProfileSet set = generate_profiles(cfg.run.seed, n, cfg.profiles);
    std::string manifest = "file,id,class,split,steps\n";
    auto dump = [&](const std::vector<LoadProfile>& v, const char* split, const char* stem) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%03zu.csv", stem, i);
            write_profile_csv(v[i], out + "/" + name);
            manifest += std::string(name) + "," + v[i].id + "," + to_string(v[i].class_label) +
                        "," + split + "," + std::to_string(v[i].size()) + "\n";
        }
    };
    dump(set.train, "train", "train");
    dump(set.validation, "validation", "validation");
    write_text_file(out + "/manifest.csv", manifest);

    PlotSeries demand{"demand", {}, "#1f77b4"};
    const LoadProfile& sample = set.train.front();
    for (std::size_t i = 0; i < sample.samples.size(); ++i)
        demand.points.push_back({static_cast<double>(i), sample.samples[i].p_dem_kw});
    write_svg_chart(out + "/sample_profile.svg", "Sample voyage: " + sample.id, "step",
                    "demand [kW]", {demand});

    std::printf("wrote %zu train + %zu validation profiles to %s\n", set.train.size(),
                set.validation.size(), out.c_str());
    return 0;
}

int cmd_train(const AppConfig& cfg, const std::string& out) {
    const RunSummary s = train_command(cfg, out);
    std::printf("seeds: %d  converged: %d  zero-action baseline: %.1f $\n",
                static_cast<int>(s.seeds.size()), s.n_converged, s.baseline_cost);
    for (const auto& seed : s.seeds)
        std::printf("  seed %02d: final eval cost %.1f $  %s  (%.1f s, %llu env steps)\n",
                    seed.seed_index, seed.final_mean_cost,
                    seed.converged ? "converged" : "diverged", seed.wall_seconds,
                    static_cast<unsigned long long>(seed.env_steps));
    if (s.best_seed >= 0)
        std::printf("best seed: %02d -> %s\n", s.best_seed, s.best_checkpoint.c_str());
    std::printf("total wall time: %.1f s\n", s.wall_seconds);
    return 0;
}

int cmd_evaluate(const AppConfig& cfg, const std::string& checkpoint,
                 const std::string& baseline, const std::string& profile_dir,
                 const std::string& out) {
    const std::vector<LoadProfile> voyages = evaluation_profiles(cfg, profile_dir);
    Td3Agent agent = Td3Agent::load(checkpoint, cfg.td3);
    const ShipConfig ship = cfg.ship.with_clusters(agent.action_dim());

    std::optional<Td3Agent> base;
    ShipConfig base_ship = ship;
    if (!baseline.empty()) {
        base.emplace(Td3Agent::load(baseline, cfg.td3));
        base_ship = cfg.ship.with_clusters(base->action_dim());
    }
    const EvalReport rep = evaluate_command(agent, base ? &*base : nullptr, voyages, ship,
                                            base ? &base_ship : nullptr, out);
    std::printf("%s", cost_table_text(make_cost_table(rep.mean_totals, nullptr, ship), "agent", "")
                          .c_str());
    std::printf("voyages: %zu  mean episode cost: %.1f $  early terminations: %d\n",
                rep.voyages.size(), rep.mean_dollars, rep.early_terminations);
    std::printf("tables written to %s\n", out.c_str());
    return 0;
}

int cmd_benchmark(const AppConfig& cfg, const std::string& checkpoint,
                  const std::string& profile_dir, const std::string& out) {
    const std::vector<LoadProfile> voyages = evaluation_profiles(cfg, profile_dir);
    Td3Agent agent = Td3Agent::load(checkpoint, cfg.td3);
    const ShipConfig ship = cfg.ship.with_clusters(agent.action_dim());
    const BenchmarkReport rep = benchmark_agent(agent, voyages, ship, cfg.dp, out);
    std::printf("offline optimum: %.1f $   agent: %.1f $   ratio: %.1f %%\n", rep.avg_dp_cost,
                rep.avg_agent_cost, rep.avg_ratio_pct);
    std::printf("GWP: optimum %.1f kg   agent %.1f kg   ratio %.1f %%\n", rep.avg_dp_gwp,
                rep.avg_agent_gwp, rep.gwp_ratio_pct);
    std::printf("oracle runtime: %.2f s over %zu voyages\n", rep.dp_runtime_seconds,
                rep.rows.size());
    std::printf("outputs written to %s\n", out.c_str());
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int nets) {
    const GradCheckSummary s = gradcheck_battery(nets, seed);
    std::printf("networks: %d  parameters: %zu  passed: %zu  kink-excluded: %zu\n", s.nets,
                s.params, s.passed, s.excluded);
    std::printf("worst relative error (non-excluded): %.3g\n", s.worst_rel_err);
    std::printf("%s\n", s.ok ? "PASS" : "FAIL");
    return s.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"energy management strategies for a fuel-cell/battery ship"};
    app.require_subcommand(1);

    std::string config_path, preset = "default", out, checkpoint, baseline, profile_dir;
    std::optional<std::uint64_t> seed;
    int count = 0, nets = 24;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--preset", preset, "default, desk or paper")
            ->check(CLI::IsMember({"default", "desk", "paper"}));
        sub->add_option("--seed", seed, "override run seed");
    };

    auto* gen = app.add_subcommand("generate-profiles", "write synthetic voyage profiles");
    add_common(gen);
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--count", count, "number of profiles (default from config)");

    auto* train = app.add_subcommand("train", "multi-seed training with periodic evaluation");
    add_common(train);
    train->add_option("--out", out, "output directory (default from config)");

    auto* eval = app.add_subcommand("evaluate", "voyage cost/GWP tables for a checkpoint");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
    eval->add_option("--baseline", baseline, "second checkpoint for ratio columns");
    eval->add_option("--profiles", profile_dir,
                     "profile directory (default: generated validation set)");
    eval->add_option("--out", out, "output directory")->required();

    auto* bench =
        app.add_subcommand("benchmark", "compare a checkpoint with the offline optimum");
    add_common(bench);
    bench->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
    bench->add_option("--profiles", profile_dir,
                      "profile directory (default: generated validation set)");
    bench->add_option("--out", out, "output directory")->required();

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(grad);
    grad->add_option("--nets", nets, "number of random networks");

    CLI11_PARSE(app, argc, argv);

    try {
        const AppConfig cfg = load_config(config_path, preset, seed);
        if (gen->parsed()) return cmd_generate(cfg, out, count);
        if (train->parsed()) return cmd_train(cfg, out.empty() ? cfg.run.out_dir : out);
        if (eval->parsed()) return cmd_evaluate(cfg, checkpoint, baseline, profile_dir, out);
        if (bench->parsed()) return cmd_benchmark(cfg, checkpoint, profile_dir, out);
        if (grad->parsed()) return cmd_gradcheck(seed.value_or(1), nets);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
