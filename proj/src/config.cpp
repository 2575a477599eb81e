#include "qkd/config.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace qkd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw ConfigError("config validation failed: " + what);
}

void check(bool ok, const char* what) {
    if (!ok) fail(what);
}

}  // namespace

void validate(const Config& cfg) {
    const auto& p = cfg.protocol;
    check(p.rep_rate > 0, "rep_rate > 0 violated");
    check(p.mu2 > 0, "mu2 > 0 violated");
    check(p.mu1 > p.mu2, "mu1 > mu2 violated");
    check(p.p_mu1 > 0 && p.p_mu1 < 1, "0 < p_mu1 < 1 violated");
    check(p.p_x_alice > 0 && p.p_x_alice < 1, "0 < p_x_alice < 1 violated");
    check(p.p_x_bob > 0 && p.p_x_bob < 1, "0 < p_x_bob < 1 violated");
    check(p.n_z_ec >= 16, "n_z_ec >= 16 violated");
    check(p.n_z_pa % p.n_z_ec == 0, "n_z_pa multiple of n_z_ec violated");
    check(p.f_ec_cap >= 1.0, "f_ec_cap >= 1 violated");

    const auto& ch = cfg.channel;
    check(ch.fiber_length >= 0, "fiber_length >= 0 violated");
    check(ch.attenuation >= 0, "attenuation >= 0 violated");
    check(ch.extra_loss >= 0, "extra_loss >= 0 violated");
    check(ch.drift_rate >= 0, "drift_rate >= 0 violated");

    const auto& d = cfg.detector;
    check(d.efficiency >= 0 && d.efficiency <= 1, "0 <= efficiency <= 1 violated");
    check(d.dark_rate >= 0, "dark_rate >= 0 violated");
    check(d.dead_time >= 0, "dead_time >= 0 violated");
    check(d.pbs_extinction > 0, "pbs_extinction > 0 violated");

    const auto& s = cfg.security;
    check(s.eps_sec > 0 && s.eps_sec < 1, "0 < eps_sec < 1 violated");
    check(s.eps_cor > 0 && s.eps_cor < 1, "0 < eps_cor < 1 violated");

    check(cfg.feedback_step_init > 0, "feedback_step_init > 0 violated");
    check(cfg.feedback_step_floor > 0, "feedback_step_floor > 0 violated");
    check(cfg.feedback_step_floor <= cfg.feedback_step_init,
          "feedback_step_floor <= feedback_step_init violated");
}

Config load_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config parse error: top level must be an object");

    Config cfg;

    auto num = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number()) fail(std::string(key) + " must be a number");
        out = v.get<double>();
    };
    auto uint = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_unsigned()) fail(std::string(key) + " must be a non-negative integer");
        out = v.get<std::decay_t<decltype(out)>>();
    };
    auto boolean = [&](const char* key, bool& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_boolean()) fail(std::string(key) + " must be a boolean");
        out = v.get<bool>();
    };

    static const char* known[] = {
        "rep_rate", "mu1", "mu2", "p_mu1", "p_x_alice", "p_x_bob",
        "n_z_ec", "n_z_pa", "f_ec_cap",
        "fiber_length", "attenuation", "extra_loss", "misalignment_angle0", "drift_rate",
        "efficiency", "dark_rate", "dead_time", "pbs_extinction",
        "eps_sec", "eps_cor",
        "double_click_random", "feedback_enabled", "feedback_step_init",
        "feedback_step_floor", "max_failed_blocks", "watchdog_slots",
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool found = false;
        for (auto* k : known)
            if (it.key() == k) { found = true; break; }
        if (!found) throw ConfigError("unknown config key: " + it.key());
    }

    num("rep_rate", cfg.protocol.rep_rate);
    num("mu1", cfg.protocol.mu1);
    num("mu2", cfg.protocol.mu2);
    num("p_mu1", cfg.protocol.p_mu1);
    num("p_x_alice", cfg.protocol.p_x_alice);
    num("p_x_bob", cfg.protocol.p_x_bob);
    uint("n_z_ec", cfg.protocol.n_z_ec);
    uint("n_z_pa", cfg.protocol.n_z_pa);
    num("f_ec_cap", cfg.protocol.f_ec_cap);

    num("fiber_length", cfg.channel.fiber_length);
    num("attenuation", cfg.channel.attenuation);
    num("extra_loss", cfg.channel.extra_loss);
    num("misalignment_angle0", cfg.channel.misalignment_angle0);
    num("drift_rate", cfg.channel.drift_rate);

    num("efficiency", cfg.detector.efficiency);
    num("dark_rate", cfg.detector.dark_rate);
    num("dead_time", cfg.detector.dead_time);
    num("pbs_extinction", cfg.detector.pbs_extinction);

    num("eps_sec", cfg.security.eps_sec);
    num("eps_cor", cfg.security.eps_cor);

    boolean("double_click_random", cfg.double_click_random);
    boolean("feedback_enabled", cfg.feedback_enabled);
    num("feedback_step_init", cfg.feedback_step_init);
    num("feedback_step_floor", cfg.feedback_step_floor);
    uint("max_failed_blocks", cfg.max_failed_blocks);
    uint("watchdog_slots", cfg.watchdog_slots);

    validate(cfg);
    return cfg;
}

std::string save_config(const Config& cfg) {
    json j;
    j["rep_rate"] = cfg.protocol.rep_rate;
    j["mu1"] = cfg.protocol.mu1;
    j["mu2"] = cfg.protocol.mu2;
    j["p_mu1"] = cfg.protocol.p_mu1;
    j["p_x_alice"] = cfg.protocol.p_x_alice;
    j["p_x_bob"] = cfg.protocol.p_x_bob;
    j["n_z_ec"] = cfg.protocol.n_z_ec;
    j["n_z_pa"] = cfg.protocol.n_z_pa;
    j["f_ec_cap"] = cfg.protocol.f_ec_cap;
    j["fiber_length"] = cfg.channel.fiber_length;
    j["attenuation"] = cfg.channel.attenuation;
    j["extra_loss"] = cfg.channel.extra_loss;
    j["misalignment_angle0"] = cfg.channel.misalignment_angle0;
    j["drift_rate"] = cfg.channel.drift_rate;
    j["efficiency"] = cfg.detector.efficiency;
    j["dark_rate"] = cfg.detector.dark_rate;
    j["dead_time"] = cfg.detector.dead_time;
    j["pbs_extinction"] = cfg.detector.pbs_extinction;
    j["eps_sec"] = cfg.security.eps_sec;
    j["eps_cor"] = cfg.security.eps_cor;
    j["double_click_random"] = cfg.double_click_random;
    j["feedback_enabled"] = cfg.feedback_enabled;
    j["feedback_step_init"] = cfg.feedback_step_init;
    j["feedback_step_floor"] = cfg.feedback_step_floor;
    j["max_failed_blocks"] = cfg.max_failed_blocks;
    j["watchdog_slots"] = cfg.watchdog_slots;
    return j.dump(2);
}

double effective_transmittance(const ChannelParams& ch) {
    return std::pow(10.0, -(ch.fiber_length * ch.attenuation + ch.extra_loss) / 10.0);
}

}  // namespace qkd
