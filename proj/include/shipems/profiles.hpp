#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "shipems/config.hpp"
#include "shipems/csv.hpp"
#include "shipems/rng.hpp"

namespace shipems {

enum class DemandClass { low, moderate, high };

inline const char* to_string(DemandClass c) {
    switch (c) {
        case DemandClass::low: return "low";
        case DemandClass::moderate: return "moderate";
        case DemandClass::high: return "high";
    }
    return "?";
}

inline DemandClass demand_class_from_string(const std::string& s) {
    if (s == "low") return DemandClass::low;
    if (s == "moderate") return DemandClass::moderate;
    if (s == "high") return DemandClass::high;
    throw std::runtime_error("unknown demand class '" + s + "'");
}

struct ProfileSample {
    double p_dem_kw = 0.0;
    bool spa = false;  // shore power available (in port)

    bool operator==(const ProfileSample&) const = default;
};

// One episode worth of load data: a sailing phase (spa = 0) followed by a
// port phase (spa = 1). spa switches exactly once and never switches back.
struct LoadProfile {
    std::string id;
    std::vector<ProfileSample> samples;
    double step_seconds = 60.0;
    DemandClass class_label = DemandClass::moderate;

    std::size_t size() const { return samples.size(); }

    // index of the first port sample
    std::size_t port_start() const {
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].spa) return i;
        return samples.size();
    }

    void validate(double ceiling_kw = 0.0) const {
        if (samples.empty()) throw std::runtime_error("profile '" + id + "' is empty");
        int transitions = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].p_dem_kw < 0.0)
                throw std::runtime_error("profile '" + id + "': negative demand at index " +
                                         std::to_string(i));
            if (ceiling_kw > 0.0 && samples[i].p_dem_kw > ceiling_kw)
                throw std::runtime_error("profile '" + id + "': demand above plant ceiling at index " +
                                         std::to_string(i));
            if (i > 0 && samples[i].spa != samples[i - 1].spa) {
                ++transitions;
                if (!samples[i].spa)
                    throw std::runtime_error("profile '" + id + "': spa switches back to sailing");
            }
        }
        if (!samples.back().spa)
            throw std::runtime_error("profile '" + id + "': must end in port mode");
        if (samples.front().spa || transitions != 1)
            throw std::runtime_error("profile '" + id +
                                     "': spa must switch exactly once from sailing to port");
    }

    bool operator==(const LoadProfile&) const = default;
};

struct ProfileSet {
    std::vector<LoadProfile> train;
    std::vector<LoadProfile> validation;
    std::uint64_t seed = 0;
};

namespace detail {

// Cosine ease between two levels; w in [0, 1].
inline double ease(double a, double b, double w) {
    return a + (b - a) * 0.5 * (1.0 - std::cos(3.14159265358979323846 * w));
}

}  // namespace detail

// Synthetic voyage: manoeuvre hold, eased ramp up, cruise plateau with
// band-limited fluctuation, eased ramp down, manoeuvre hold, then port.
inline LoadProfile generate_profile(Rng& rng, const ProfileGenConfig& cfg,
                                    DemandClass cls, const std::string& id) {
    const double ceiling = cfg.plant_ceiling_kw;
    double plateau_lo = cfg.moderate_plateau_lo, plateau_hi = cfg.moderate_plateau_hi;
    if (cls == DemandClass::low) {
        plateau_lo = cfg.low_plateau_lo;
        plateau_hi = cfg.low_plateau_hi;
    } else if (cls == DemandClass::high) {
        plateau_lo = cfg.high_plateau_lo;
        plateau_hi = cfg.high_plateau_hi;
    }
    const double plateau = ceiling * rng.uniform(plateau_lo, plateau_hi);
    const double man_start = ceiling * rng.uniform(cfg.manoeuvre_lo, cfg.manoeuvre_hi);
    const double man_end = ceiling * rng.uniform(cfg.manoeuvre_lo, cfg.manoeuvre_hi);

    const int n = cfg.sailing_steps;
    // segment lengths in steps; high-demand voyages get longer ramps so the
    // plateau stays within battery reach
    const bool high = cls == DemandClass::high;
    int hold0 = static_cast<int>(rng.uniform_int(high ? 4 : 3, high ? 6 : 5));
    int ramp_up = static_cast<int>(rng.uniform_int(high ? 12 : 8, high ? 15 : 12));
    int ramp_down = static_cast<int>(rng.uniform_int(high ? 9 : 6, high ? 12 : 10));
    int hold1 = static_cast<int>(rng.uniform_int(3, 5));
    while (hold0 + ramp_up + ramp_down + hold1 > n - 4) {
        if (ramp_up > 4) --ramp_up;
        if (ramp_down > 4) --ramp_down;
        if (hold0 > 1) --hold0;
        if (hold1 > 1) --hold1;
    }
    const int plateau_len = n - hold0 - ramp_up - ramp_down - hold1;

    std::vector<double> base(static_cast<std::size_t>(n));
    int t = 0;
    for (int i = 0; i < hold0; ++i) base[t++] = man_start;
    for (int i = 0; i < ramp_up; ++i)
        base[t++] = detail::ease(man_start, plateau, (i + 1.0) / (ramp_up + 1.0));
    for (int i = 0; i < plateau_len; ++i) base[t++] = plateau;
    for (int i = 0; i < ramp_down; ++i)
        base[t++] = detail::ease(plateau, man_end, (i + 1.0) / (ramp_down + 1.0));
    for (int i = 0; i < hold1; ++i) base[t++] = man_end;

    // three sinusoids with random phase plus smoothed Gaussian noise
    const double fluct_scale = high ? cfg.high_fluctuation_scale : 1.0;
    double amp[3];
    double period[3];
    double phase[3];
    double amp_total = 0.0;
    for (int k = 0; k < 3; ++k) {
        amp[k] = rng.uniform(0.2, 1.0);
        amp_total += amp[k];
        period[k] = rng.uniform(6.0, 30.0);
        phase[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    }
    for (int k = 0; k < 3; ++k) amp[k] *= fluct_scale * cfg.fluctuation_amplitude / amp_total;

    std::vector<double> noise(static_cast<std::size_t>(n));
    for (auto& v : noise) v = rng.normal(0.0, fluct_scale * cfg.noise_sigma);
    std::vector<double> smooth(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (int k = i - 2; k <= i + 2; ++k)
            if (k >= 0 && k < n) {
                acc += noise[static_cast<std::size_t>(k)];
                ++cnt;
            }
        smooth[static_cast<std::size_t>(i)] = acc / cnt;
    }

    LoadProfile p;
    p.id = id;
    p.step_seconds = cfg.step_seconds;
    p.class_label = cls;
    p.samples.reserve(static_cast<std::size_t>(n + cfg.port_steps));
    for (int i = 0; i < n; ++i) {
        double f = 0.0;
        for (int k = 0; k < 3; ++k)
            f += amp[k] * std::sin(2.0 * 3.14159265358979323846 * i / period[k] + phase[k]);
        f += smooth[static_cast<std::size_t>(i)];
        const double local = base[static_cast<std::size_t>(i)];
        double v = local + plateau * f;
        v = std::clamp(v, 0.0, ceiling);
        p.samples.push_back({v, false});
    }
    for (int i = 0; i < cfg.port_steps; ++i) p.samples.push_back({cfg.port_demand_kw, true});
    return p;
}

inline ProfileSet generate_profiles(std::uint64_t seed, int n_profiles,
                                    const ProfileGenConfig& cfg) {
    cfg.validate();
    if (n_profiles < 2) throw std::runtime_error("need at least 2 profiles to split");

    Rng rng(split_seed(seed, 17));
    const double mix_total = cfg.class_mix[0] + cfg.class_mix[1] + cfg.class_mix[2];

    std::vector<LoadProfile> all;
    all.reserve(static_cast<std::size_t>(n_profiles));
    for (int i = 0; i < n_profiles; ++i) {
        const double u = rng.uniform01() * mix_total;
        DemandClass cls = DemandClass::high;
        if (u < cfg.class_mix[0]) cls = DemandClass::low;
        else if (u < cfg.class_mix[0] + cfg.class_mix[1]) cls = DemandClass::moderate;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "gen-%llu-%03d",
                      static_cast<unsigned long long>(seed), i);
        all.push_back(generate_profile(rng, cfg, cls, buf));
        all.back().validate(cfg.plant_ceiling_kw);
    }

    // deterministic split: shuffle indices with the same stream, carve the tail
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    std::size_t n_val = static_cast<std::size_t>(
        std::lround(cfg.validation_fraction * static_cast<double>(all.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, all.size() - 1);

    ProfileSet set;
    set.seed = seed;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i < idx.size() - n_val) set.train.push_back(all[idx[i]]);
        else set.validation.push_back(all[idx[i]]);
    }
    return set;
}

// ---------------------------------------------------------------------------
// CSV schema: optional "# key: value" comment lines (id, class), a required
// header "t_s,p_dem_kw,spa", then one row per step.

inline void write_profile_csv(const LoadProfile& p, const std::string& path) {
    std::string out;
    out += "# id: " + p.id + "\n";
    out += "# class: " + std::string(to_string(p.class_label)) + "\n";
    out += "t_s,p_dem_kw,spa\n";
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        out += format_double(static_cast<double>(i) * p.step_seconds);
        out += ',';
        out += format_double(p.samples[i].p_dem_kw);
        out += ',';
        out += p.samples[i].spa ? '1' : '0';
        out += '\n';
    }
    write_text_file(path, out);
}

inline LoadProfile read_profile_csv(const std::string& path) {
    const auto lines = split_lines(read_text_file(path));
    LoadProfile p;
    // default id from the file name
    {
        std::size_t slash = path.find_last_of("/\\");
        std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
        if (std::size_t dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
        p.id = stem;
    }

    std::size_t lineno = 0;
    bool header_seen = false;
    std::vector<double> times;
    for (const std::string& line : lines) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = line.substr(1);
            const std::size_t colon = body.find(':');
            if (colon != std::string::npos) {
                std::string key = body.substr(0, colon);
                std::string val = body.substr(colon + 1);
                auto trim = [](std::string& s) {
                    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
                    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
                };
                trim(key);
                trim(val);
                if (key == "id") p.id = val;
                else if (key == "class") p.class_label = demand_class_from_string(val);
            }
            continue;
        }
        if (!header_seen) {
            if (line != "t_s,p_dem_kw,spa")
                throw ParseError(path, lineno, "expected header 't_s,p_dem_kw,spa'");
            header_seen = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw ParseError(path, lineno, "expected 3 fields, got " +
                                               std::to_string(fields.size()));
        const double t_s = parse_double(fields[0], path, lineno);
        const double dem = parse_double(fields[1], path, lineno);
        const long spa = parse_long(fields[2], path, lineno);
        if (dem < 0.0) throw ParseError(path, lineno, "negative power demand");
        if (spa != 0 && spa != 1) throw ParseError(path, lineno, "spa must be 0 or 1");
        if (!p.samples.empty() && p.samples.back().spa && spa == 0)
            throw ParseError(path, lineno, "spa switches back to sailing");
        times.push_back(t_s);
        p.samples.push_back({dem, spa == 1});
    }
    if (!header_seen) throw ParseError(path, lineno, "missing header 't_s,p_dem_kw,spa'");
    if (p.samples.empty()) throw ParseError(path, lineno, "empty profile (header only)");
    if (times.size() >= 2) p.step_seconds = times[1] - times[0];
    if (p.step_seconds <= 0.0) throw ParseError(path, 1, "non-increasing time column");
    p.validate();
    return p;
}

}  // namespace shipems
