#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qkd/finitekey.hpp"
#include "qkd/session.hpp"
#include "qkd/transport.hpp"

namespace {

constexpr int kExitAbort = 2;
constexpr uint64_t kTestScalePaBlock = 819200;  // 100 EC blocks

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Full-size PA blocks are opt-in: without --paper-blocks (or an explicit
// n_z_pa in the config file) sessions run at test scale.
qkd::Config load_cli_config(const std::string& path, bool paper_blocks) {
    qkd::Config cfg;
    bool explicit_pa = false;
    if (!path.empty()) {
        const std::string text = read_file(path);
        cfg = qkd::load_config(text);
        explicit_pa = nlohmann::json::parse(text).contains("n_z_pa");
    }
    if (!paper_blocks && !explicit_pa) {
        cfg.protocol.n_z_pa = kTestScalePaBlock;
        qkd::validate(cfg);
    }
    return cfg;
}

void print_report(const qkd::SessionReport& r) {
    std::printf("distance_km      %.2f\n", r.distance_km);
    if (r.aborted) {
        std::printf("status           ABORT: %s\n", r.abort_reason.c_str());
        return;
    }
    std::printf("skr_bps          %.3f\n", r.skr);
    std::printf("qber_z           %.5f\n", r.qber_z);
    std::printf("qber_x           %.5f\n", r.qber_x);
    std::printf("l_total          %llu\n", (unsigned long long)r.l_total);
    std::printf("lambda_ec        %llu\n", (unsigned long long)r.lambda_ec);
    std::printf("blocks_failed    %u\n", r.blocks_failed);
    std::printf("slots_sent       %llu\n", (unsigned long long)r.slots_sent);
    std::printf("s_z0 bounds      [%.1f, %.1f]\n", r.bounds.s_z0_low, r.bounds.s_z0_high);
    std::printf("s_z1_low         %.1f\n", r.bounds.s_z1_low);
    std::printf("phi_z_high       %.5f\n", r.bounds.phi_z_high);
}

void write_key(const qkd::BitVec& key, const std::string& path, bool hex) {
    std::ofstream f(path, hex ? std::ios::out : std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    const auto bytes = key.to_bytes();
    if (hex) {
        for (size_t i = 0; i < bytes.size(); ++i) {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
            f << buf;
            if ((i + 1) % 32 == 0) f << '\n';
        }
        f << '\n';
    } else {
        f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    }
}

int cmd_simulate(const std::string& config_path, double distance, uint64_t seed,
                 bool paper_blocks, bool tcp, const std::string& trace,
                 const std::string& fb_trace, const std::string& key_out, bool key_hex) {
    qkd::Config cfg = load_cli_config(config_path, paper_blocks);
    if (distance >= 0) cfg.channel.fiber_length = distance;
    qkd::validate(cfg);

    qkd::SessionResult res;
    if (tcp) {
        qkd::AliceEndpoint alice(cfg);
        qkd::TcpServer server(0);
        std::thread alice_thread([&] { server.serve_one(alice); });
        {
            qkd::TcpRequestChannel chan("127.0.0.1", server.port());
            qkd::SessionOptions opts;
            opts.channel = &chan;
            opts.remote_alice = &alice;
            opts.event_trace_csv = trace;
            opts.feedback_trace_csv = fb_trace;
            res = qkd::run_session(cfg, seed, opts);
        }
        alice_thread.join();
        res.alice_secret = alice.secret_key();
    } else {
        qkd::SessionOptions opts;
        opts.event_trace_csv = trace;
        opts.feedback_trace_csv = fb_trace;
        res = qkd::run_session(cfg, seed, opts);
    }

    print_report(res.report);
    if (res.report.aborted) return kExitAbort;
    if (res.alice_secret != res.bob_secret) {
        std::fprintf(stderr, "error: endpoint keys differ\n");
        return kExitAbort;
    }
    if (!key_out.empty()) write_key(res.bob_secret, key_out, key_hex);
    return 0;
}

int cmd_curve(const std::string& config_path, double from, double to, double step, bool analytic,
              bool optimize, uint64_t seed, bool paper_blocks, const std::string& out_path) {
    qkd::Config cfg = load_cli_config(config_path, paper_blocks || analytic);
    std::vector<double> distances;
    for (double d = from; d <= to + 1e-9; d += step) distances.push_back(d);
    const auto rows = qkd::curve(cfg, distances, analytic, optimize, seed);
    const std::string csv = qkd::curve_csv(rows);
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot open " + out_path);
        f << csv;
    }
    return 0;
}

int cmd_optimize(const std::string& config_path, const std::vector<double>& distances) {
    qkd::Config cfg = load_cli_config(config_path, true);
    std::cout << "distance_km,mu1,mu2,p_mu1,skr_bps\n";
    for (double d : distances) {
        const auto r = qkd::optimize_params(d, cfg);
        std::printf("%g,%g,%g,%g,%g\n", d, r.mu1, r.mu2, r.p_mu1, r.skr_bps);
    }
    return 0;
}

int cmd_keylen(const std::string& tallies_path) {
    const auto j = nlohmann::json::parse(read_file(tallies_path));
    qkd::ProtocolParams p;
    qkd::SecurityParams sec;
    p.mu1 = j.value("mu1", p.mu1);
    p.mu2 = j.value("mu2", p.mu2);
    p.p_mu1 = j.value("p_mu1", p.p_mu1);
    sec.eps_sec = j.value("eps_sec", sec.eps_sec);
    sec.eps_cor = j.value("eps_cor", sec.eps_cor);

    qkd::IntensityTallies t;
    t.n_z = {j.value("n_z_mu1", 0.0), j.value("n_z_mu2", 0.0)};
    t.n_x = {j.value("n_x_mu1", 0.0), j.value("n_x_mu2", 0.0)};
    t.m_x = {j.value("m_x_mu1", 0.0), j.value("m_x_mu2", 0.0)};
    t.m_z_total = j.value("m_z_total", 0.0);
    const double lambda_ec = j.value("lambda_ec", 0.0);

    qkd::FiniteKeyBounds b = qkd::compute_bounds(t, p, sec);
    qkd::secret_key_length(b, lambda_ec, sec);
    std::printf("tau0        %.6f\ntau1        %.6f\n", b.tau0, b.tau1);
    std::printf("s_z0_low    %.2f\ns_z0_high   %.2f\ns_z1_low    %.2f\n", b.s_z0_low,
                b.s_z0_high, b.s_z1_low);
    std::printf("s_x0_low    %.2f\ns_x1_low    %.2f\nv_x1_high   %.2f\n", b.s_x0_low, b.s_x1_low,
                b.v_x1_high);
    std::printf("phi_z_high  %.6f\n", b.phi_z_high);
    std::printf("lambda_ec   %.1f\n", lambda_ec);
    std::printf("l           %llu\n", (unsigned long long)b.l);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-state one-decoy BB84 link simulator and post-processing stack"};
    app.require_subcommand(1);

    std::string config_path, out_path, trace, fb_trace, key_out, tallies_path;
    double distance = -1, from = 25, to = 225, step = 25;
    uint64_t seed = 1;
    bool paper_blocks = false, tcp = false, analytic = false, optimize = false, key_hex = false;
    std::vector<double> distances;

    auto* sim = app.add_subcommand("simulate", "run one full key exchange session");
    sim->add_option("--config", config_path, "JSON config file");
    sim->add_option("--distance", distance, "fiber length in km");
    sim->add_option("--seed", seed, "session seed");
    sim->add_flag("--paper-blocks", paper_blocks, "use the full 8192000-bit PA block");
    sim->add_flag("--tcp", tcp, "run the classical channel over TCP loopback");
    sim->add_option("--trace", trace, "write the detection event trace CSV");
    sim->add_option("--feedback-trace", fb_trace, "write the feedback loop trace CSV");
    sim->add_option("--key-out", key_out, "write the secret key to this file");
    sim->add_flag("--key-hex", key_hex, "write the key as hex lines instead of binary");

    auto* cur = app.add_subcommand("curve", "secret key rate versus distance");
    cur->add_option("--config", config_path, "JSON config file");
    cur->add_option("--from", from, "first distance, km");
    cur->add_option("--to", to, "last distance, km");
    cur->add_option("--step", step, "distance step, km")->check(CLI::PositiveNumber);
    cur->add_flag("--analytic", analytic, "use the closed-form rate model instead of simulating");
    cur->add_flag("--optimize", optimize, "optimize mu1, mu2, p_mu1 per distance");
    cur->add_option("--seed", seed, "base seed for simulated rows");
    cur->add_flag("--paper-blocks", paper_blocks, "use the full 8192000-bit PA block");
    cur->add_option("--out", out_path, "output CSV path ('-' for stdout)");

    auto* opt = app.add_subcommand("optimize", "optimal source parameters per distance");
    opt->add_option("--config", config_path, "JSON config file");
    opt->add_option("--distance", distances, "distance(s) in km")->required();

    auto* kl = app.add_subcommand("keylen", "finite-key bounds and key length from tallies");
    kl->add_option("--tallies", tallies_path, "JSON tallies file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, distance, seed, paper_blocks, tcp, trace, fb_trace,
                                key_out, key_hex);
        if (cur->parsed())
            return cmd_curve(config_path, from, to, step, analytic, optimize, seed, paper_blocks,
                             out_path);
        if (opt->parsed()) return cmd_optimize(config_path, distances);
        if (kl->parsed()) return cmd_keylen(tallies_path);
    } catch (const qkd::ProtocolError& e) {
        std::fprintf(stderr, "protocol abort: %s\n", e.what());
        return kExitAbort;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
