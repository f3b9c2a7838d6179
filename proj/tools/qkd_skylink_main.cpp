// qkd-skylink: command-line front end for the satellite QKD link simulator.
//
// Subcommands:
//   run            full end-to-end pass -> report, logs, key store
//   pass           pass geometry profile as CSV
//   ao-bench       paired open/closed-loop AO coupling comparison
//   channel-bench  scintillation series statistics and beam diversity
//   report         re-emit / check a report file
//   scenario       write the default scenario file
//
// Exit codes: 0 success, 2 scenario validation error, 3 protocol abort.
// QKD_SKYLINK_LOG=quiet|info|debug controls verbosity only.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "skylink/adaptive_optics.hpp"
#include "skylink/errors.hpp"
#include "skylink/mission.hpp"
#include "skylink/pass_geometry.hpp"
#include "skylink/rng.hpp"
#include "skylink/scenario.hpp"
#include "skylink/turbulence.hpp"

namespace {

int log_level() {
    const char* env = std::getenv("QKD_SKYLINK_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
}

skylink::ScenarioConfig load_or_default(const std::string& path, bool have_seed,
                                        std::uint64_t seed) {
    skylink::ScenarioConfig cfg;
    if (!path.empty()) {
        auto loaded = skylink::load_scenario(path);
        if (!loaded.config) {
            std::ostringstream msg;
            msg << "scenario validation failed:";
            for (const auto& e : loaded.errors) msg << "\n  - " << e;
            throw skylink::ConfigError(msg.str());
        }
        cfg = *loaded.config;
    }
    if (have_seed) cfg.seed = seed;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_run(const std::string& scenario_path, bool have_seed, std::uint64_t seed,
            const std::string& out_dir, bool deterministic_check) {
    auto cfg = load_or_default(scenario_path, have_seed, seed);
    auto art = skylink::run_end_to_end(cfg);
    skylink::write_artifacts(art, out_dir);

    if (log_level() >= 1) {
        const auto& r = art.report;
        std::cout << "pass duration      " << r.pass_duration_s << " s\n"
                  << "availability       " << r.availability_fraction << "\n"
                  << "mean coupling      " << r.mean_coupling_eta << "\n"
                  << "sifted bits        " << r.sifted_bits << "\n"
                  << "qber               " << r.qber << "\n"
                  << "final key bits     " << r.final_key_bits << "\n"
                  << "projected key rate " << r.projected_key_rate_bps << " bit/s at "
                  << r.full_rate_hz << " Hz\n";
        if (!r.abort_reason.empty()) std::cout << "abort: " << r.abort_reason << "\n";
        std::cout << "artifacts in " << out_dir << "\n";
    }

    if (deterministic_check) {
        namespace fs = std::filesystem;
        std::string check_dir = out_dir + "/deterministic-check";
        auto second = skylink::run_end_to_end(cfg);
        skylink::write_artifacts(second, check_dir);
        for (const char* name :
             {"report.json", "report.csv", "timeline.csv", "telemetry.jsonl",
              "transcript.jsonl", "key.bin"}) {
            fs::path a = fs::path(out_dir) / name;
            fs::path b = fs::path(check_dir) / name;
            if (fs::exists(a) != fs::exists(b) ||
                (fs::exists(a) && slurp(a) != slurp(b))) {
                std::cerr << "deterministic check FAILED on " << name << "\n";
                return 1;
            }
        }
        if (log_level() >= 1) std::cout << "deterministic check passed\n";
    }
    return art.report.abort_reason.empty() ? 0 : 3;
}

int cmd_pass(const std::string& scenario_path, bool have_seed, std::uint64_t seed,
             const std::string& out_file) {
    auto cfg = load_or_default(scenario_path, have_seed, seed);
    auto pass = skylink::propagate_pass(cfg.orbit, cfg.station, cfg.session.pass_step_s);
    if (out_file.empty()) {
        skylink::write_pass_csv(std::cout, pass);
    } else {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw skylink::ConfigError("cannot write " + out_file);
        skylink::write_pass_csv(out, pass);
    }
    if (log_level() >= 2)
        std::cerr << "pass samples: " << pass.size() << "\n";
    return 0;
}

int cmd_ao_bench(const std::string& scenario_path, bool have_seed, std::uint64_t seed,
                 double duration_s) {
    auto cfg = load_or_default(scenario_path, have_seed, seed);

    const double aperture = cfg.station.aperture_diameter_m;
    const double pixel = aperture * cfg.ao.screen_oversize / cfg.ao.grid_n;
    double r0 = skylink::fried_parameter_m(cfg.turbulence, 0.0, cfg.protocol.wavelength_m);
    skylink::FrozenFlowStrip flow(cfg.ao.grid_n, pixel, r0, cfg.turbulence.wind_speed_mps,
                                  duration_s + 1.0,
                                  skylink::derive_seed(cfg.seed, "ao-bench"), aperture);

    auto screen_at = [&](int t) { return flow.sample(t / cfg.loop.rate_hz); };
    int steps = static_cast<int>(duration_s * cfg.loop.rate_hz);
    auto closed = skylink::run_closed_loop(screen_at, steps, cfg.loop, cfg.ao.subap_n,
                                           cfg.ao.wfs_noise_rad, cfg.seed);
    double open_mean = 0.0, closed_mean = 0.0, residual_mean = 0.0;
    for (int t = 0; t < steps; ++t) {
        open_mean += skylink::coupling_efficiency(screen_at(t), cfg.loop.mode_radius_ratio);
        closed_mean += closed[static_cast<std::size_t>(t)].coupling_eta;
        residual_mean += closed[static_cast<std::size_t>(t)].residual_rms_rad;
    }
    open_mean /= steps;
    closed_mean /= steps;
    residual_mean /= steps;

    std::cout << "D/r0               " << aperture / r0 << "\n"
              << "steps              " << steps << " at " << cfg.loop.rate_hz << " Hz\n"
              << "open-loop coupling " << open_mean << "\n"
              << "closed-loop        " << closed_mean << "\n"
              << "improvement        " << (open_mean > 0 ? closed_mean / open_mean : 0.0)
              << "x\n"
              << "mean residual rms  " << residual_mean << " rad\n";
    return 0;
}

int cmd_channel_bench(const std::string& scenario_path, bool have_seed, std::uint64_t seed,
                      double duration_s, const std::string& out_file) {
    auto cfg = load_or_default(scenario_path, have_seed, seed);
    double scint = cfg.turbulence.scintillation_index_zenith;
    if (scint <= 0.0) {
        std::cout << "scintillation disabled in this scenario\n";
        return 0;
    }
    auto stats = [](const skylink::TransmittanceSeries& s) {
        double mean = 0.0;
        for (double v : s.samples) mean += v;
        mean /= static_cast<double>(s.samples.size());
        double var = 0.0;
        for (double v : s.samples) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.samples.size());
        return std::pair<double, double>(mean, var / (mean * mean));
    };
    auto single = skylink::scintillation_series(0.5, scint, cfg.loop.rate_hz, duration_s, 1,
                                                skylink::derive_seed(cfg.seed, "bench", 1));
    auto multi = skylink::scintillation_series(0.5, scint, cfg.loop.rate_hz, duration_s,
                                               cfg.station.uplink_beam_count,
                                               skylink::derive_seed(cfg.seed, "bench", 2));
    auto [m1, nv1] = stats(single);
    auto [mn, nvn] = stats(multi);
    std::cout << "samples                     " << single.samples.size() << "\n"
              << "single-beam mean, nvar      " << m1 << ", " << nv1 << "\n"
              << cfg.station.uplink_beam_count << "-beam mean, nvar         " << mn << ", "
              << nvn << "\n"
              << "variance reduction          " << (nvn > 0 ? nv1 / nvn : 0.0) << "x\n";
    if (!out_file.empty()) {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw skylink::ConfigError("cannot write " + out_file);
        skylink::write_series_csv(out, multi);
    }
    return 0;
}

int cmd_report(const std::string& report_path, const std::string& format,
               const std::string& out_file, const std::string& scenario_path) {
    auto report = skylink::report_from_json(slurp(report_path));
    if (!scenario_path.empty()) {
        auto loaded = skylink::load_scenario(scenario_path);
        if (!loaded.config)
            throw skylink::ConfigError("cannot check consistency: invalid scenario");
        bool ok = skylink::report_self_consistent(report, *loaded.config);
        std::cout << "self-consistency: " << (ok ? "ok" : "FAILED") << "\n";
        if (!ok) return 1;
    }
    if (!out_file.empty()) skylink::emit_report(report, format, out_file);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"satellite-to-ground BB84 QKD link simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = "out", out_file, format = "json", report_path;
    std::uint64_t seed = 0;
    bool deterministic_check = false;
    double duration_s = 2.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", scenario_path, "scenario JSON file");
        cmd->add_option("--seed", seed, "override the master seed");
    };

    auto* run = app.add_subcommand("run", "run a full pass end to end");
    add_common(run);
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--deterministic-check", deterministic_check,
                  "run twice and compare artifact bytes");

    auto* pass = app.add_subcommand("pass", "print or save the pass profile CSV");
    add_common(pass);
    pass->add_option("--out", out_file, "CSV output file (stdout when omitted)");

    auto* ao = app.add_subcommand("ao-bench", "open vs closed loop coupling benchmark");
    add_common(ao);
    ao->add_option("--duration", duration_s, "simulated seconds");

    auto* chan = app.add_subcommand("channel-bench", "scintillation diversity statistics");
    add_common(chan);
    chan->add_option("--duration", duration_s, "simulated seconds");
    chan->add_option("--out", out_file, "series CSV output file");

    auto* rep = app.add_subcommand("report", "re-emit or check a report");
    rep->add_option("--in", report_path, "report.json to read")->required();
    rep->add_option("--format", format, "json or csv");
    rep->add_option("--out", out_file, "output file");
    rep->add_option("--scenario", scenario_path, "scenario for the consistency check");

    auto* scn = app.add_subcommand("scenario", "write the default scenario file");
    scn->add_option("--out", out_file, "destination path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(scenario_path, run->count("--seed") > 0, seed, out_dir,
                           deterministic_check);
        if (pass->parsed())
            return cmd_pass(scenario_path, pass->count("--seed") > 0, seed, out_file);
        if (ao->parsed())
            return cmd_ao_bench(scenario_path, ao->count("--seed") > 0, seed, duration_s);
        if (chan->parsed())
            return cmd_channel_bench(scenario_path, chan->count("--seed") > 0, seed,
                                     duration_s, out_file);
        if (rep->parsed()) return cmd_report(report_path, format, out_file, scenario_path);
        if (scn->parsed()) {
            skylink::save_scenario(skylink::ScenarioConfig{}, out_file);
            return 0;
        }
    } catch (const skylink::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const skylink::ProtocolError& e) {
        std::cerr << "protocol abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
