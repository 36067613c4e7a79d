#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>

#include "shipems/profiles.hpp"

using namespace shipems;

namespace {

double plateau_estimate(const LoadProfile& p) {
    // median demand over the middle third of the sailing phase
    const std::size_t n = p.port_start();
    std::vector<double> mid;
    for (std::size_t i = n / 3; i < 2 * n / 3; ++i) mid.push_back(p.samples[i].p_dem_kw);
    std::sort(mid.begin(), mid.end());
    return mid[mid.size() / 2];
}

}  // namespace

TEST_CASE("generation is deterministic in the seed", "[profiles]") {
    ProfileGenConfig cfg;
    const auto a = generate_profiles(42, 12, cfg);
    const auto b = generate_profiles(42, 12, cfg);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);

    const auto c = generate_profiles(43, 12, cfg);
    CHECK(a.train != c.train);
}

TEST_CASE("train and validation sets are disjoint", "[profiles]") {
    ProfileGenConfig cfg;
    const auto set = generate_profiles(7, 20, cfg);
    CHECK(!set.train.empty());
    CHECK(!set.validation.empty());
    CHECK(set.train.size() + set.validation.size() == 20);
    for (const auto& t : set.train)
        for (const auto& v : set.validation) CHECK(t.id != v.id);
}

TEST_CASE("class plateaus land in their bands", "[profiles]") {
    ProfileGenConfig cfg;
    Rng rng(1234);
    for (int i = 0; i < 40; ++i) {
        const auto low = generate_profile(rng, cfg, DemandClass::low, "l");
        CHECK(plateau_estimate(low) < 0.45 * cfg.plant_ceiling_kw);
        const auto high = generate_profile(rng, cfg, DemandClass::high, "h");
        CHECK(plateau_estimate(high) > 0.75 * cfg.plant_ceiling_kw);
    }
}

TEST_CASE("every generated profile satisfies the invariants", "[profiles]") {
    ProfileGenConfig cfg;
    const auto set = generate_profiles(99, 30, cfg);
    auto check = [&](const LoadProfile& p) {
        REQUIRE_NOTHROW(p.validate(cfg.plant_ceiling_kw));
        CHECK(p.samples.back().spa);
        CHECK_FALSE(p.samples.front().spa);
        const double peak =
            std::max_element(p.samples.begin(), p.samples.end(), [](auto& a, auto& b) {
                return a.p_dem_kw < b.p_dem_kw;
            })->p_dem_kw;
        CHECK(peak <= cfg.plant_ceiling_kw);
    };
    for (const auto& p : set.train) check(p);
    for (const auto& p : set.validation) check(p);
}

TEST_CASE("invalid class mix is rejected", "[profiles]") {
    ProfileGenConfig cfg;
    cfg.class_mix = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(generate_profiles(1, 4, cfg), ConfigError);
    cfg.class_mix = {-1.0, 1.0, 0.0};
    CHECK_THROWS_AS(generate_profiles(1, 4, cfg), ConfigError);
}

TEST_CASE("profile csv round-trip is lossless", "[profiles]") {
    ProfileGenConfig cfg;
    Rng rng(5);
    const auto p = generate_profile(rng, cfg, DemandClass::moderate, "roundtrip-01");
    const std::string path = "profile_roundtrip_test.csv";
    write_profile_csv(p, path);
    const auto back = read_profile_csv(path);
    CHECK(back == p);
    std::remove(path.c_str());
}

TEST_CASE("profile csv parse errors carry line numbers", "[profiles]") {
    const std::string path = "profile_parse_test.csv";

    SECTION("negative demand names the row") {
        write_text_file(path, "t_s,p_dem_kw,spa\n0,100,0\n60,-5,0\n120,0,1\n");
        try {
            read_profile_csv(path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find("negative") != std::string::npos);
        }
    }
    SECTION("header-only file is an empty profile") {
        write_text_file(path, "t_s,p_dem_kw,spa\n");
        CHECK_THROWS_WITH(read_profile_csv(path), Catch::Matchers::ContainsSubstring("empty"));
    }
    SECTION("spa may not switch back") {
        write_text_file(path, "t_s,p_dem_kw,spa\n0,100,0\n60,0,1\n120,50,0\n180,0,1\n");
        try {
            read_profile_csv(path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
        }
    }
    SECTION("malformed number names the row") {
        write_text_file(path, "t_s,p_dem_kw,spa\n0,abc,0\n60,0,1\n");
        try {
            read_profile_csv(path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("generator statistics are stationary across seed ranges", "[profiles]") {
    ProfileGenConfig cfg;
    cfg.class_mix = {0.0, 1.0, 0.0};
    auto mean_plateau = [&](std::uint64_t seed_base) {
        double acc = 0.0;
        int n = 0;
        for (std::uint64_t s = seed_base; s < seed_base + 4; ++s) {
            const auto set = generate_profiles(s, 30, cfg);
            for (const auto& p : set.train) {
                acc += plateau_estimate(p);
                ++n;
            }
            for (const auto& p : set.validation) {
                acc += plateau_estimate(p);
                ++n;
            }
        }
        REQUIRE(n >= 100);
        return acc / n;
    };
    const double a = mean_plateau(1000);
    const double b = mean_plateau(9000);
    CHECK(std::abs(a - b) / a < 0.05);
}
