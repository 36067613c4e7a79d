#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "shipems/harness.hpp"

using namespace shipems;

namespace {

AppConfig smoke_config() {
    AppConfig cfg = AppConfig::desk_preset();
    cfg.run.n_seeds = 2;
    cfg.run.max_episodes = 40;
    cfg.run.eval_every_episodes = 20;
    cfg.run.eval_voyages = 3;
    cfg.run.n_profiles = 8;
    cfg.run.seed = 7;
    cfg.td3.hidden_units = {12, 12};
    cfg.td3.batch_size = 16;
    cfg.td3.warmup_steps = 100;
    cfg.td3.replay_capacity = 20000;
    return cfg;
}

struct TempDir {
    std::string path;
    explicit TempDir(std::string p) : path(std::move(p)) {}
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace

TEST_CASE("episode dollars include terminal accounting", "[harness]") {
    ShipConfig ship;
    const ShipConfig c = ship.uniform();
    ProfileGenConfig pg;
    Rng rng(3);
    const LoadProfile p = generate_profile(rng, pg, DemandClass::moderate, "acct");

    Environment env(c);
    const RolloutResult r = run_episode(env, p, zero_policy(1), true);
    // zero-action on a moderate voyage cannot serve the plateau: aborted
    CHECK(r.terminated_early);
    CHECK(r.penalty_cost == c.early_termination_penalty);
    CHECK(r.dollars >= r.penalty_cost);
    CHECK(r.dollars ==
          Catch::Approx(r.totals.total() + r.shortfall_cost + r.penalty_cost).margin(1e-9));
}

TEST_CASE("evaluation rollouts leave the agent untouched", "[harness]") {
    Td3Config tc;
    tc.hidden_units = {8, 8};
    tc.batch_size = 4;
    tc.warmup_steps = 0;
    Td3Agent agent(4, 1, 0.04, tc, 5);
    const std::uint64_t steps_before = agent.env_steps();

    ShipConfig ship;
    const ShipConfig c = ship.uniform();
    ProfileGenConfig pg;
    Rng rng(6);
    const LoadProfile p = generate_profile(rng, pg, DemandClass::low, "pure");
    const EvalReport rep1 = evaluate_agent(agent, {p}, c);
    const EvalReport rep2 = evaluate_agent(agent, {p}, c);
    CHECK(agent.env_steps() == steps_before);
    CHECK(rep1.mean_dollars == rep2.mean_dollars);
}

TEST_CASE("checkpoint/config cluster mismatch is rejected", "[harness]") {
    Td3Config tc;
    tc.hidden_units = {8};
    Td3Agent agent(7, 4, 0.04, tc, 5);  // m = 4 agent
    ShipConfig ship;
    const ShipConfig c1 = ship.uniform();  // m = 1 plant
    ProfileGenConfig pg;
    Rng rng(6);
    const LoadProfile p = generate_profile(rng, pg, DemandClass::low, "mismatch");
    CHECK_THROWS_AS(evaluate_agent(agent, {p}, c1), std::invalid_argument);
}

TEST_CASE("cost tables are column-exact and ratio-correct", "[harness]") {
    ShipConfig ship;
    CostBreakdown a;
    a.c_b = 63.7;
    a.c_f = 259.4;
    a.h2_kg = 63.2;
    a.shore_kwh = 364.0;
    a.c_h = a.h2_kg * ship.prices.h2_per_kg;
    a.c_e = a.shore_kwh * ship.prices.elec_per_kwh;
    a.gwp_kg = a.h2_kg * ship.gwp.kg_co2e_per_kg_h2 + a.shore_kwh * ship.gwp.kg_co2e_per_kwh_elec;

    SECTION("sum row equals the column totals exactly") {
        const CostTable t = make_cost_table(a, nullptr, ship);
        REQUIRE(t.rows.size() == 5);
        CHECK(t.rows[4].cost_a == t.rows[0].cost_a + t.rows[1].cost_a + t.rows[2].cost_a +
                                      t.rows[3].cost_a);
        CHECK(t.rows[4].gwp_a == t.rows[2].gwp_a + t.rows[3].gwp_a);

        // survives the csv round trip bit-exactly
        const std::string csv = cost_table_csv(t);
        const auto lines = split_lines(csv);
        REQUIRE(lines.size() == 6);
        double parsed_sum = parse_double(split_csv_line(lines[5])[1], "t", 6);
        double parsed_components = 0.0;
        for (int i = 1; i <= 4; ++i)
            parsed_components +=
                parse_double(split_csv_line(lines[static_cast<std::size_t>(i)])[1], "t", 2);
        CHECK(parsed_sum == parsed_components);
    }
    SECTION("identical reports give 100.0 ratios everywhere") {
        const CostTable t = make_cost_table(a, &a, ship);
        for (const auto& r : t.rows) {
            CHECK(r.cost_ratio == 100.0);
            if (r.has_gwp) CHECK(r.gwp_ratio == 100.0);
        }
    }
    SECTION("the emitted gwp columns reproduce the configured kg-per-dollar pattern") {
        const CostTable t = make_cost_table(a, nullptr, ship);
        const double elec_kg_per_dollar = t.rows[2].gwp_a / t.rows[2].cost_a;
        const double h2_kg_per_dollar = t.rows[3].gwp_a / t.rows[3].cost_a;
        CHECK(elec_kg_per_dollar ==
              Catch::Approx(ship.gwp.kg_co2e_per_kwh_elec / ship.prices.elec_per_kwh));
        CHECK(h2_kg_per_dollar ==
              Catch::Approx(ship.gwp.kg_co2e_per_kg_h2 / ship.prices.h2_per_kg));
        CHECK(elec_kg_per_dollar == Catch::Approx(1.87));
        CHECK(h2_kg_per_dollar == Catch::Approx(1.0 / 5.5));
    }
}

TEST_CASE("convergence classification", "[harness]") {
    std::vector<EvalPoint> flat;
    for (int e = 100; e <= 2000; e += 100) flat.push_back({e, 700.0 + (e % 300) * 0.01});
    CHECK(classify_converged(flat, 5000.0, 2000));

    std::vector<EvalPoint> diverged;
    for (int e = 100; e <= 2000; e += 100) diverged.push_back({e, 11000.0});
    CHECK_FALSE(classify_converged(diverged, 5000.0, 2000));

    std::vector<EvalPoint> rising;
    for (int e = 100; e <= 2000; e += 100) rising.push_back({e, 700.0 + e * 2.0});
    CHECK_FALSE(classify_converged(rising, 5000.0, 2000));
}

TEST_CASE("smoke training run emits a full artifact set deterministically", "[harness]") {
    const AppConfig cfg = smoke_config();
    TempDir dir_a("smoke_run_a");
    const RunSummary a = train_command(cfg, dir_a.path);

    REQUIRE(a.seeds.size() == 2);
    CHECK(a.seeds[0].curve.size() == 2);
    CHECK(std::filesystem::exists(dir_a.path + "/aggregate_curve.csv"));
    CHECK(std::filesystem::exists(dir_a.path + "/learning_curve.svg"));
    CHECK(std::filesystem::exists(dir_a.path + "/summary.json"));
    CHECK(std::filesystem::exists(dir_a.path + "/seed_00/agent.ckpt"));
    CHECK(std::filesystem::exists(dir_a.path + "/seed_01/curve.csv"));
    REQUIRE(a.best_seed >= 0);
    CHECK(std::filesystem::exists(a.best_checkpoint));

    // aggregate equals the recomputed arithmetic mean over converged seeds
    for (std::size_t k = 0; k < a.eval_episodes.size(); ++k) {
        double mean = 0.0;
        int n = 0;
        for (const auto& s : a.seeds) {
            if (a.n_converged > 0 && !s.converged) continue;
            mean += s.curve[k].mean_cost;
            ++n;
        }
        CHECK(a.mean_curve[k] == mean / std::max(1, n));
    }

    TempDir dir_b("smoke_run_b");
    const RunSummary b = train_command(cfg, dir_b.path);

    REQUIRE(b.seeds.size() == a.seeds.size());
    CHECK(a.baseline_cost == b.baseline_cost);
    CHECK(a.best_seed == b.best_seed);
    for (std::size_t i = 0; i < a.seeds.size(); ++i) {
        CHECK(a.seeds[i].final_mean_cost == b.seeds[i].final_mean_cost);
        CHECK(a.seeds[i].converged == b.seeds[i].converged);
        CHECK(a.seeds[i].env_steps == b.seeds[i].env_steps);
    }
    // byte-identical curves and checkpoints
    for (int i = 0; i < 2; ++i) {
        const std::string sa = harness_detail::seed_dir(dir_a.path, i);
        const std::string sb = harness_detail::seed_dir(dir_b.path, i);
        CHECK(read_text_file(sa + "/curve.csv") == read_text_file(sb + "/curve.csv"));
        const bool ckpt_same =
            read_text_file(sa + "/agent.ckpt") == read_text_file(sb + "/agent.ckpt");
        CHECK(ckpt_same);
    }
    CHECK(read_text_file(dir_a.path + "/aggregate_curve.csv") ==
          read_text_file(dir_b.path + "/aggregate_curve.csv"));
}

TEST_CASE("evaluate command writes voyage and average tables", "[harness]") {
    Td3Config tc;
    tc.hidden_units = {8, 8};
    Td3Agent agent(4, 1, 0.04, tc, 15);
    ShipConfig ship;
    const ShipConfig c = ship.uniform();
    ProfileGenConfig pg;
    Rng rng(16);
    std::vector<LoadProfile> voyages = {
        generate_profile(rng, pg, DemandClass::low, "ev-low"),
        generate_profile(rng, pg, DemandClass::moderate, "ev-mod"),
    };
    TempDir dir("smoke_eval_out");
    const EvalReport rep = evaluate_command(agent, &agent, voyages, c, &c, dir.path);
    REQUIRE(rep.voyages.size() == 2);
    CHECK(std::filesystem::exists(dir.path + "/voyages.csv"));
    CHECK(std::filesystem::exists(dir.path + "/table_ev-low.csv"));
    CHECK(std::filesystem::exists(dir.path + "/table_average.csv"));

    // identical agent as its own baseline: every ratio cell is exactly 100
    const auto lines = split_lines(read_text_file(dir.path + "/table_average.csv"));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        CHECK(f[3] == "100");
        if (!f[6].empty()) CHECK(f[6] == "100");
    }
}

TEST_CASE("gradcheck battery passes at spec tolerances", "[harness]") {
    const GradCheckSummary s = gradcheck_battery(24, 99);
    CHECK(s.nets == 24);
    CHECK(s.params > 1000);
    CHECK(s.ok);
}
