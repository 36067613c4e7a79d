#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shipems/powertrain.hpp"
#include "shipems/rng.hpp"

using namespace shipems;

namespace {

// Minimal plant with round numbers for hand calculation.
ShipConfig tiny_config() {
    ShipConfig c;
    c.rated_fc_power_kw = 100.0;
    c.n_clusters = 1;
    c.converter_efficiencies = {1.0};
    c.battery_capacity_kwh = 100.0;
    c.soc_min = 0.15;
    c.soc_max = 0.9;
    c.soc_terminate_floor = 0.1;
    c.step_seconds = 3600.0;
    c.initial_cluster_power = 0.5;
    c.battery.charge_power_limit_kw = 50.0;
    c.battery.discharge_power_limit_kw = 50.0;
    c.battery.charge_efficiency = 1.0;
    c.battery.discharge_efficiency = 1.0;
    c.prices.h2_per_kg = 2.0;
    c.prices.elec_per_kwh = 0.1;
    c.prices.batt_cost_per_kwh_throughput = 0.1;
    c.prices.fc_degradation = {};
    c.prices.fc_degradation.start_cost_per_kw = 0.0;
    c.prices.fc_degradation.transient_cost_per_kw = 0.0;
    c.prices.fc_degradation.low_power_cost_per_kw_h = 0.0;
    c.prices.fc_degradation.high_power_cost_per_kw_h = 0.0;
    c.fc_efficiency.points = {{0.0, 0.5}, {1.0, 0.5}};
    return c;
}

LoadProfile flat_profile(double demand_kw, int sailing, int port, double step_s = 3600.0,
                         double port_demand = 0.0) {
    LoadProfile p;
    p.id = "flat";
    p.step_seconds = step_s;
    for (int i = 0; i < sailing; ++i) p.samples.push_back({demand_kw, false});
    for (int i = 0; i < port; ++i) p.samples.push_back({port_demand, true});
    return p;
}

}  // namespace

TEST_CASE("converter-summed fuel cell power", "[powertrain]") {
    ShipConfig c;  // defaults: 2940 kW, m = 4
    c.converter_efficiencies = {1.0, 1.0, 1.0, 1.0};
    SystemState s;
    s.x = {1.0, 1.0, 1.0, 1.0};
    CHECK(total_converter_power(s, c) == Catch::Approx(2940.0).margin(1e-12));

    s.x = {0.0, 0.0, 0.0, 0.0};
    CHECK(total_converter_power(s, c) == 0.0);

    ShipConfig c2;
    c2.rated_fc_power_kw = 200.0;  // cluster rated power 100 kW
    c2.n_clusters = 2;
    c2.converter_efficiencies = {0.95, 0.90};
    SystemState s2;
    s2.x = {0.5, 0.25};
    CHECK(total_converter_power(s2, c2) == Catch::Approx(70.0).margin(1e-12));
}

TEST_CASE("actions are clamped and flagged", "[powertrain]") {
    ShipConfig c = tiny_config();
    c.action_limit = 0.04;
    SystemState s;
    s.x = {0.5};

    auto [x1, ov1] = apply_action(s, Action{{0.04}}, c);
    CHECK(x1[0] == Catch::Approx(0.54).margin(1e-15));
    CHECK_FALSE(ov1[0]);

    s.x = {0.99};
    auto [x2, ov2] = apply_action(s, Action{{0.04}}, c);
    CHECK(x2[0] == 1.0);
    CHECK(ov2[0]);

    s.x = {0.02};
    auto [x3, ov3] = apply_action(s, Action{{-0.04}}, c);
    CHECK(x3[0] == 0.0);
    CHECK(ov3[0]);
}

TEST_CASE("battery power balance", "[powertrain]") {
    SECTION("balanced bus leaves the battery idle") {
        ShipConfig c = tiny_config();
        SystemState s;
        s.x = {0.5};
        s.soc = 0.6;
        s.p_dem_kw = 50.0;
        const auto b = battery_power(s, 50.0, c);
        CHECK(b.batt_kw == 0.0);
        CHECK(b.soc_next == 0.6);
    }
    SECTION("full battery absorbs nothing, surplus curtailed") {
        ShipConfig c = tiny_config();
        SystemState s;
        s.x = {1.0};
        s.soc = c.soc_max;
        s.p_dem_kw = 0.0;
        const auto b = battery_power(s, 100.0, c);
        CHECK(b.batt_kw == 0.0);
        CHECK(b.soc_next == c.soc_max);
        CHECK(b.curtail_kw == Catch::Approx(100.0));
    }
    SECTION("coulomb counting on discharge") {
        ShipConfig c;
        c.n_clusters = 1;
        c.converter_efficiencies = {1.0};
        c.battery_capacity_kwh = 581.0;
        c.step_seconds = 60.0;
        c.battery.discharge_efficiency = 0.95;
        c.battery.discharge_power_limit_kw = 1500.0;
        SystemState s;
        s.x = {0.5};
        s.soc = 0.8;
        s.p_dem_kw = 500.0;
        const auto b = battery_power(s, 300.0, c);
        const double expected_drop = (200.0 / 0.95) * (60.0 / 3600.0) / 581.0;
        CHECK(b.batt_kw == Catch::Approx(200.0));
        CHECK(0.8 - b.soc_next == Catch::Approx(expected_drop).epsilon(1e-12));
    }
}

TEST_CASE("step costs", "[powertrain]") {
    SECTION("everything idle costs nothing") {
        ShipConfig c;  // full defaults, including nonzero degradation prices
        c.validate();
        std::vector<double> x(4, 0.0);
        const auto cost = step_costs(x, x, 0.0, 0.0, c);
        CHECK(cost.c_b == 0.0);
        CHECK(cost.c_f == 0.0);
        CHECK(cost.c_h == 0.0);
        CHECK(cost.c_e == 0.0);
        CHECK(cost.gwp_kg == 0.0);
        CHECK(cost.total() == 0.0);
    }
    SECTION("hydrogen cost of one cluster at fixed power") {
        ShipConfig c;
        c.rated_fc_power_kw = 2940.0;
        c.n_clusters = 4;
        c.converter_efficiencies = {0.98, 0.98, 0.98, 0.98};
        c.step_seconds = 60.0;
        c.prices.h2_per_kg = 5.5;
        c.prices.fc_degradation.transient_cost_per_kw = 0.0;
        c.fc_efficiency.points = {{0.0, 0.35}, {0.2, 0.52}, {0.5, 0.55}, {1.0, 0.47}};
        std::vector<double> x = {0.5, 0.0, 0.0, 0.0};
        const auto cost = step_costs(x, x, 0.0, 0.0, c);
        // independent evaluation: P_c * x / (eta(x) * LHV) * dt
        const double mass = 735.0 * 0.5 / (0.55 * 33.3) * (60.0 / 3600.0);
        CHECK(cost.h2_kg == Catch::Approx(mass).epsilon(1e-12));
        CHECK(cost.c_h == Catch::Approx(mass * 5.5).epsilon(1e-12));
        CHECK(cost.total() == cost.c_b + cost.c_f + cost.c_h + cost.c_e);
    }
    SECTION("degradation terms fire per cluster") {
        ShipConfig c = tiny_config();
        c.prices.fc_degradation.start_cost_per_kw = 0.01;
        c.prices.fc_degradation.transient_cost_per_kw = 0.02;
        c.prices.fc_degradation.low_power_cost_per_kw_h = 0.03;
        c.prices.fc_degradation.low_power_threshold = 0.12;
        std::vector<double> x0 = {0.0};
        std::vector<double> x1 = {0.05};
        const auto cost = step_costs(x0, x1, 0.0, 0.0, c);
        // 100 kW cluster: start + transient 0.05 + low-power dwell for 1 h
        const double expected = 100.0 * (0.01 + 0.02 * 0.05 + 0.03 * 1.0);
        CHECK(cost.c_f == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("reward branches", "[powertrain]") {
    SystemState sailing;
    sailing.x = {0.5};
    sailing.spa = false;
    const std::vector<std::uint8_t> no_ov = {0};
    const std::vector<std::uint8_t> ov = {1};

    CHECK(reward(sailing, false, no_ov, 5.0, {}) == -1.0);
    CHECK(reward(sailing, true, ov, 5.0, {}) == -1.0);

    // tanh limits: huge cost -> reward near 0+, vanishing cost -> just below 1
    CHECK(reward(sailing, true, no_ov, 1e12, {}) > 0.0);
    CHECK(reward(sailing, true, no_ov, 1e12, {}) < 1e-10);
    CHECK(reward(sailing, true, no_ov, 1e-15, {}) < 1.0);
    CHECK(reward(sailing, true, no_ov, 1e-15, {}) > 0.999);

    SystemState port = sailing;
    port.spa = true;
    const std::vector<double> port_costs = {1.0, 1.0};
    CHECK(reward(port, true, no_ov, 0.0, port_costs) ==
          Catch::Approx(2.0 * std::tanh(1.0)).epsilon(1e-12));
}

TEST_CASE("episode stepping", "[powertrain]") {
    SECTION("zero action from a feasible state is a fixed point") {
        ShipConfig c = tiny_config();
        Environment env(c);
        env.reset(flat_profile(30.0, 3, 2));
        const auto out = env.step(Action::zeros(1));
        CHECK(out.next_state.x[0] == 0.5);
        CHECK_FALSE(out.terminated);
        // p1 = 50 >= demand 30, battery full: surplus curtailed, cost = H2 only
        const double mass = 100.0 * 0.5 / (0.5 * 33.3) * 1.0;
        CHECK(out.cost.total() == Catch::Approx(mass * 2.0).epsilon(1e-12));
        CHECK(out.reward == Catch::Approx(std::tanh(1.0 / (mass * 2.0))).epsilon(1e-12));
    }
    SECTION("over-discharge terminates with the floor reason") {
        ShipConfig c = tiny_config();
        c.soc_min = 0.15;
        c.soc_max = 0.2;
        c.soc_terminate_floor = 0.1;
        Environment env(c);
        env.reset(flat_profile(62.0, 5, 2));
        const auto out = env.step(Action::zeros(1));  // deficit 12 kW -> soc 0.08
        CHECK(out.terminated);
        CHECK(out.truncated_reason == TerminationReason::soc_floor);
        CHECK(out.reward == -1.0);
        CHECK_THROWS_AS(env.step(Action::zeros(1)), EpisodeTerminatedError);
    }
    SECTION("unservable demand terminates as infeasible") {
        ShipConfig c = tiny_config();
        Environment env(c);
        env.reset(flat_profile(120.0, 5, 2));  // deficit 70 kW > 50 kW limit
        const auto out = env.step(Action::zeros(1));
        CHECK(out.terminated);
        CHECK(out.truncated_reason == TerminationReason::infeasible);
        CHECK(out.reward == -1.0);
    }
    SECTION("reaching port ends the episode with the summed port reward") {
        ShipConfig c = tiny_config();
        c.initial_cluster_power = 0.0;
        Environment env(c);
        env.reset(flat_profile(0.0, 2, 3));
        auto s = env.step(Action::zeros(1));  // sail 1
        REQUIRE_FALSE(s.terminated);
        s = env.step(Action::zeros(1));  // sail 2, lands in port state
        REQUIRE_FALSE(s.terminated);
        CHECK(s.next_state.spa);
        const auto out = env.step(Action::zeros(1));  // port mega-step
        CHECK(out.terminated);
        CHECK(out.truncated_reason == TerminationReason::end_of_episode);
        // battery stays at soc_max and fuel cells are off: zero-cost port steps
        CHECK(out.reward == Catch::Approx(3.0 * bounded_tanh_reward(0.0)).epsilon(1e-12));
        CHECK(out.reward < 3.0);
        CHECK(out.cost.total() == 0.0);
    }
    SECTION("port charging replenishes the battery from shore") {
        ShipConfig c = tiny_config();
        c.initial_cluster_power = 0.0;  // battery-only voyage
        Environment env(c);
        env.reset(flat_profile(40.0, 1, 3));
        env.step(Action::zeros(1));  // discharges 40 kW for an hour
        const double soc_after = env.state().soc;
        REQUIRE(soc_after == Catch::Approx(0.5));
        const auto out = env.step(Action::zeros(1));
        CHECK(out.terminated);
        // charged back toward soc_max at <= 50 kW; electricity billed
        CHECK(out.next_state.soc == Catch::Approx(c.soc_max));
        CHECK(out.cost.c_e > 0.0);
        // port soc is non-decreasing
        double prev = soc_after;
        for (const auto& row : env.trajectory()) {
            if (!row.spa) continue;
            CHECK(row.soc >= prev);
            prev = row.soc;
        }
    }
}

TEST_CASE("environment reset", "[powertrain]") {
    ShipConfig c;  // m = 4 defaults
    Environment env(c);
    LoadProfile p = flat_profile(1000.0, 10, 5, 60.0);

    const auto s1 = env.reset(p);
    CHECK(s1.soc == c.soc_max);
    CHECK(s1.dim() == 7);
    CHECK(s1.flatten().size() == 7);

    const auto s2 = env.reset(p);
    CHECK(s1.flatten() == s2.flatten());

    LoadProfile empty;
    CHECK_THROWS(env.reset(empty));
}

TEST_CASE("energy balance and soc bounds over random steps", "[powertrain]") {
    Rng rng(20240811);
    ShipConfig c;
    c.validate();
    const int m = c.n_clusters;
    std::vector<double> x_prev(m), x_now(m);
    std::vector<std::uint8_t> ov(m);
    std::vector<double> a(m);
    for (int iter = 0; iter < 20000; ++iter) {
        for (int k = 0; k < m; ++k) {
            x_prev[k] = rng.uniform01();
            a[k] = rng.uniform(-c.action_limit, c.action_limit);
        }
        const double soc = rng.uniform01();
        const double p_dem = rng.uniform(0.0, 4370.0);
        const bool protection = rng.uniform01() < 0.5;
        apply_action(x_prev, a, x_now, ov);
        const auto e = sailing_step_effect(x_prev, x_now, soc, p_dem, protection, c);
        const double residual = p_dem - (e.p1_kw + e.batt_kw - e.curtail_kw) - e.unmet_kw;
        CHECK(std::abs(residual) < 1e-9);
        CHECK(e.soc_next >= 0.0);
        CHECK(e.soc_next <= 1.0);
        CHECK(e.cost.total() == e.cost.c_b + e.cost.c_f + e.cost.c_h + e.cost.c_e);
        if (protection) CHECK(e.soc_next >= std::min(soc, c.soc_min) - 1e-12);
    }
}

TEST_CASE("battery discharge is monotone in demand", "[powertrain]") {
    Rng rng(7);
    ShipConfig c;
    for (int iter = 0; iter < 2000; ++iter) {
        const double p1 = rng.uniform(0.0, 2940.0);
        const double soc = rng.uniform01();
        const double d1 = rng.uniform(0.0, 4370.0);
        const double d2 = d1 + rng.uniform(0.0, 500.0);
        const auto b1 = battery_balance(p1, d1, soc, false, c);
        const auto b2 = battery_balance(p1, d2, soc, false, c);
        CHECK(b2.batt_kw >= b1.batt_kw - 1e-12);
    }
}

TEST_CASE("uniform control equals multi-cluster control with equal actions", "[powertrain]") {
    ShipConfig c4;
    c4.n_clusters = 4;
    c4.converter_efficiencies = {0.95, 0.95, 0.95, 0.95};
    ShipConfig c1 = c4.uniform();
    REQUIRE(c1.converter_efficiencies[0] == Catch::Approx(0.95));

    LoadProfile p;
    p.id = "mix";
    p.step_seconds = 60.0;
    Rng demand_rng(99);
    for (int i = 0; i < 40; ++i) p.samples.push_back({demand_rng.uniform(300.0, 2600.0), false});
    for (int i = 0; i < 10; ++i) p.samples.push_back({0.0, true});

    Environment e4(c4), e1(c1);
    e4.reset(p);
    e1.reset(p);
    Rng act_rng(5);
    while (!e1.terminated()) {
        const double av = act_rng.uniform(-c1.action_limit, c1.action_limit);
        const auto o1 = e1.step(Action{{av}});
        const auto o4 = e4.step(Action{{av, av, av, av}});
        const double p1_single = total_converter_power(o1.next_state, c1);
        const double p1_multi = total_converter_power(o4.next_state, c4);
        CHECK(p1_single == Catch::Approx(p1_multi).margin(1e-9));
        CHECK(o1.next_state.soc == Catch::Approx(o4.next_state.soc).margin(1e-12));
        CHECK(o1.terminated == o4.terminated);
        if (o1.terminated) break;
    }
}

TEST_CASE("sailing rewards stay in the half-open unit interval", "[powertrain]") {
    ShipConfig c;
    Environment env(c);
    LoadProfile p;
    p.step_seconds = 60.0;
    p.id = "r";
    Rng rng(3);
    for (int i = 0; i < 60; ++i) p.samples.push_back({rng.uniform(0.0, 4000.0), false});
    p.samples.push_back({0.0, true});

    for (int episode = 0; episode < 20; ++episode) {
        env.reset(p);
        while (!env.terminated()) {
            Action a = Action::zeros(c.n_clusters);
            for (auto& v : a.a) v = rng.uniform(-c.action_limit, c.action_limit);
            const bool acting_in_port = env.state().spa;
            const auto out = env.step(a);
            if (!acting_in_port) {
                CHECK(out.reward >= -1.0);
                CHECK(out.reward < 1.0);
                if (out.truncated_reason == TerminationReason::infeasible ||
                    out.truncated_reason == TerminationReason::soc_floor)
                    CHECK(out.reward == -1.0);
            } else {
                CHECK(out.reward >= 0.0);
            }
        }
    }
}

TEST_CASE("trajectory log round-trips through csv", "[powertrain]") {
    ShipConfig c = tiny_config();
    Environment env(c);
    env.reset(flat_profile(60.0, 3, 2));
    while (!env.terminated()) env.step(Action::zeros(1));
    const auto& rows = env.trajectory();
    REQUIRE(rows.size() == 5);

    const std::string path = "traj_roundtrip_test.csv";
    write_text_file(path, trajectory_csv(rows, 1));
    const auto back = read_trajectory_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].t == rows[i].t);
        CHECK(back[i].x == rows[i].x);
        CHECK(back[i].soc == rows[i].soc);
        CHECK(back[i].reward == rows[i].reward);
        CHECK(back[i].c_h == rows[i].c_h);
    }
    std::remove(path.c_str());
}
