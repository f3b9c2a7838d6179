#include "skylink/mission.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skylink/errors.hpp"
#include "skylink/rng.hpp"

namespace skylink {

using nlohmann::json;

namespace {
constexpr double kPi = 3.14159265358979323846;
// Turbulence strength is re-evaluated on segments no longer than this, so
// the Fried parameter follows the elevation profile through the pass.
constexpr double kMaxSegmentS = 20.0;

std::map<std::string, double> tally_gains(const PhotonTally& tally) {
    std::map<std::string, double> out;
    for (auto c : {IntensityClass::signal, IntensityClass::decoy, IntensityClass::vacuum})
        out[to_string(c)] = tally.gain(c);
    return out;
}

std::map<std::string, double> tally_qbers(const PhotonTally& tally) {
    std::map<std::string, double> out;
    for (auto c : {IntensityClass::signal, IntensityClass::decoy, IntensityClass::vacuum})
        out[to_string(c)] = tally.qber(c);
    return out;
}

std::map<IntensityClass, double> to_class_map(const std::map<std::string, double>& named) {
    std::map<IntensityClass, double> out;
    for (auto c : {IntensityClass::signal, IntensityClass::decoy, IntensityClass::vacuum})
        out[c] = named.at(to_string(c));
    return out;
}

void merge_tally(PhotonTally& into, const PhotonTally& from) {
    for (int c = 0; c < 3; ++c) {
        auto& a = into.per_class[c];
        const auto& b = from.per_class[c];
        a.sent += b.sent;
        a.clicked += b.clicked;
        a.sifted += b.sifted;
        a.errors += b.errors;
        for (int n = 0; n <= PhotonTally::kMaxPhotons; ++n) {
            a.sent_n[n] += b.sent_n[n];
            a.clicked_n[n] += b.clicked_n[n];
            a.sifted_n[n] += b.sifted_n[n];
            a.error_n[n] += b.error_n[n];
        }
    }
}

std::vector<std::uint8_t> to_bytes(const std::string& s) {
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

const PassSample& sample_at(const std::vector<PassSample>& pass, double t_s) {
    // Pass samples are uniform in time starting at pass.front().t_s.
    double step = pass.size() > 1 ? pass[1].t_s - pass[0].t_s : 1.0;
    auto idx = static_cast<std::size_t>((t_s - pass.front().t_s) / step);
    if (idx >= pass.size()) idx = pass.size() - 1;
    return pass[idx];
}
} // namespace

MissionArtifacts run_end_to_end(const ScenarioConfig& cfg) {
    {
        auto errors = cfg.validate_all();
        if (!errors.empty()) {
            std::string joined = "invalid scenario:";
            for (const auto& e : errors) joined += "\n  - " + e;
            throw ConfigError(joined);
        }
    }

    MissionArtifacts art;
    PassReport& rep = art.report;
    rep.master_seed = cfg.seed;
    rep.session_id = derive_seed(cfg.seed, "session");
    rep.eavesdropper =
        cfg.eavesdropper == EavesdropperModel::intercept_resend ? "intercept_resend" : "none";
    rep.scaled_slot_rate_hz = cfg.scaled_slot_rate_hz;
    rep.full_rate_hz = cfg.protocol.qubit_rate_hz;
    art.key_record.session_id = rep.session_id;
    art.key_record.master_seed = cfg.seed;

    // Geometry and link state machine.
    auto pass = propagate_pass(cfg.orbit, cfg.station, cfg.session.pass_step_s);
    if (pass.empty()) {
        rep.abort_reason = "no visibility: pass never clears the elevation mask";
        return art;
    }
    art.timeline = run_pass(pass, cfg.cloud_blockages, cfg.pat, derive_seed(cfg.seed, "pat"));
    rep.pass_duration_s = art.timeline.pass_end_s - art.timeline.pass_start_s;
    rep.availability_fraction = art.timeline.availability_fraction;
    for (const auto& [a, b] : art.timeline.qkd_windows) rep.qkd_active_s += b - a;

    Transcript transcript(derive_seed(cfg.seed, "auth"), cfg.session.auth_pool_bytes);

    // AO geometry is shared by every segment: calibrating the reconstructor
    // once keeps the whole run deterministic and cheap.
    const double pixel_m =
        cfg.station.aperture_diameter_m * cfg.ao.screen_oversize / cfg.ao.grid_n;
    auto geometry = WavefrontScreen::flat(cfg.ao.grid_n, pixel_m);
    geometry.set_pupil(cfg.station.aperture_diameter_m);
    Reconstructor reconstructor(geometry, cfg.ao.subap_n, cfg.loop.dm_mode_count);
    ZernikeBasis basis(geometry, cfg.loop.dm_mode_count);
    CouplingKernel coupling_kernel(geometry, cfg.loop.mode_radius_ratio);

    CalibrationState cal;
    cal.drift_rms_per_step = cfg.session.calibration_drift_rms;
    cal.drift_seed = derive_seed(cfg.seed, "cal_drift");

    const auto slots_per_tick =
        static_cast<std::size_t>(std::llround(cfg.scaled_slot_rate_hz / cfg.loop.rate_hz));
    LinkConfig link;
    link.detector = cfg.detector;
    link.eavesdropper = cfg.eavesdropper;
    link.slot_rate_hz = cfg.scaled_slot_rate_hz;
    link.eve_resend_mu = cfg.protocol.mu_signal;

    KeyMaterial alice_key, bob_key;
    alice_key.stage = KeyStage::sifted;
    bob_key.stage = KeyStage::sifted;
    PhotonTally tally;
    std::vector<double> photodiode_trace;
    double coupling_sum = 0.0, channel_sum = 0.0;
    std::uint64_t tick_count = 0;
    std::uint64_t global_tick = 0;
    std::uint64_t next_slot = 0;
    std::uint64_t segment_index = 0;
    double next_telemetry_t = art.timeline.pass_start_s;
    bool safety_violation = false;

    for (const auto& [win_a, win_b] : art.timeline.qkd_windows) {
        double seg_a = win_a;
        while (seg_a < win_b - 1e-9 && !safety_violation) {
            double seg_b = std::min(win_b, seg_a + kMaxSegmentS);
            auto ticks = static_cast<std::size_t>(
                std::floor((seg_b - seg_a) * cfg.loop.rate_hz + 1e-9));
            if (ticks == 0) break;
            ++segment_index;

            // Turbulence for this segment at the segment-mid elevation: a
            // frozen-flow strip long enough for the whole segment.
            const PassSample& mid = sample_at(pass, 0.5 * (seg_a + seg_b));
            double zenith_deg = 90.0 - mid.elevation_deg;
            double r0 = fried_parameter_m(cfg.turbulence, zenith_deg, cfg.protocol.wavelength_m);
            FrozenFlowStrip flow(cfg.ao.grid_n, pixel_m, r0, cfg.turbulence.wind_speed_mps,
                                 seg_b - seg_a + 1.0,
                                 derive_seed(cfg.seed, "screen", segment_index),
                                 cfg.station.aperture_diameter_m);
            WavefrontScreen residual = flow.sample(0.0);

            // Closed-loop AO over the segment.
            ModalCoefficients command = ModalCoefficients::zeros(cfg.loop.dm_mode_count);
            std::vector<double> coupling_series(ticks);
            std::uint64_t wfs_seed = derive_seed(cfg.seed, "wfs", segment_index);

            // Downlink intensity fading, airmass-scaled scintillation.
            double airmass = 1.0 / std::sin(mid.elevation_deg * kPi / 180.0);
            double scint = cfg.turbulence.scintillation_index_zenith *
                           std::pow(airmass, 11.0 / 6.0);
            TransmittanceSeries fade;
            if (scint > 0.0) {
                fade = scintillation_series(1.0, scint, cfg.loop.rate_hz,
                                            static_cast<double>(ticks) / cfg.loop.rate_hz, 1,
                                            derive_seed(cfg.seed, "fade", segment_index));
            } else {
                fade.rate_hz = cfg.loop.rate_hz;
                fade.samples.assign(ticks, 1.0);
                fade.mean_transmittance = 1.0;
            }

            for (std::size_t t = 0; t < ticks; ++t) {
                double abs_t = seg_a + static_cast<double>(t) / cfg.loop.rate_hz;

                // One-frame-delay integrator step on the frozen-flow screen.
                flow.sample_into(static_cast<double>(t) / cfg.loop.rate_hz, residual);
                basis.accumulate(residual, command, -1.0);
                double eta_coupling = coupling_kernel.efficiency(residual);
                SlopeMeasurement slopes = shwfs_measure(
                    residual, cfg.ao.subap_n, cfg.ao.wfs_noise_rad,
                    derive_seed(wfs_seed, "tick", t));
                ModalCoefficients delta = reconstructor.reconstruct(slopes);
                for (int k = 0; k < cfg.loop.dm_mode_count; ++k)
                    command.values[k] += cfg.loop.gain * delta.values[k];
                coupling_series[t] = eta_coupling;

                // Static channel at the current elevation, times the fade.
                const PassSample& here = sample_at(pass, abs_t);
                double loss_db = static_loss_db(here, cfg.channel.divergence_full_angle_rad,
                                                cfg.station, cfg.channel.zenith_atm_loss_db);
                double eta_channel = std::pow(10.0, -loss_db / 10.0) * fade.samples[t];
                if (eta_channel > 1.0) eta_channel = 1.0;

                // Transmitter: calibration feedback, then one tick of frames.
                cal = calibration_step(cal, 0.0, cfg.session.calibration_gain);
                auto frames = generate_block(cfg.protocol, slots_per_tick,
                                             derive_seed(cfg.seed, "frames", global_tick),
                                             next_slot);
                double mu_acc = 0.0;
                std::size_t mu_count = 0;
                try {
                    for (auto& f : frames) {
                        f = apply_modulation(f, cal);
                        f = set_output_level(f, true, 0.0);
                        if (f.role == FrameRole::quantum) {
                            mu_acc += f.mean_photon_number;
                            ++mu_count;
                            if (f.mean_photon_number > rep.max_quantum_mu)
                                rep.max_quantum_mu = f.mean_photon_number;
                        }
                    }
                } catch (const ProtocolError& e) {
                    rep.abort_reason = e.what();
                    safety_violation = true;
                    break;
                }
                photodiode_trace.push_back(mu_count ? mu_acc / mu_count : 0.0);

                // Detection with slot indices local to this tick.
                auto local = frames;
                for (auto& f : local) f.slot -= next_slot;
                TransmittanceSeries ch;
                ch.rate_hz = cfg.loop.rate_hz;
                ch.samples = {eta_channel};
                ch.mean_transmittance = eta_channel;
                TransmittanceSeries cp;
                cp.rate_hz = cfg.loop.rate_hz;
                cp.samples = {eta_coupling};
                cp.mean_transmittance = eta_coupling;
                auto result = transmit_and_detect(local, ch, cp, link,
                                                  derive_seed(cfg.seed, "link", global_tick));
                for (auto& r : result.records) r.slot += next_slot;

                auto sifted = sift(frames, result.records);
                alice_key.bits.insert(alice_key.bits.end(), sifted.alice.bits.begin(),
                                      sifted.alice.bits.end());
                bob_key.bits.insert(bob_key.bits.end(), sifted.bob.bits.begin(),
                                    sifted.bob.bits.end());
                alice_key.source_slots.insert(alice_key.source_slots.end(),
                                              sifted.alice.source_slots.begin(),
                                              sifted.alice.source_slots.end());
                bob_key.source_slots.insert(bob_key.source_slots.end(),
                                            sifted.bob.source_slots.begin(),
                                            sifted.bob.source_slots.end());
                merge_tally(tally, result.tally);

                coupling_sum += eta_coupling;
                channel_sum += eta_channel;
                ++tick_count;
                next_slot += slots_per_tick;
                ++global_tick;

                if (abs_t >= next_telemetry_t) {
                    std::map<std::string, double> counters{
                        {"slots_transmitted", static_cast<double>(next_slot)},
                        {"sifted_bits", static_cast<double>(alice_key.size())},
                        {"eta_channel", eta_channel},
                        {"eta_coupling", eta_coupling},
                    };
                    art.telemetry.push_back(telemetry_snapshot(cal, counters, abs_t));
                    next_telemetry_t += cfg.session.telemetry_period_s;
                }
            }
            seg_a = seg_b;
        }
        if (safety_violation) break;
    }

    rep.slots_transmitted = next_slot;
    rep.sifted_bits = alice_key.size();
    rep.mean_coupling_eta = tick_count ? coupling_sum / static_cast<double>(tick_count) : 0.0;
    rep.mean_channel_eta = tick_count ? channel_sum / static_cast<double>(tick_count) : 0.0;
    rep.gains = tally_gains(tally);
    rep.class_qbers = tally_qbers(tally);

    // Hacking-protection scan of the monitored output power.
    if (photodiode_trace.size() >= 10) {
        auto anomaly = detect_anomaly(photodiode_trace, cfg.session.anomaly_threshold_sigma);
        rep.alarms = anomaly.alarms.size();
        for (const auto& alarm : anomaly.alarms) art.telemetry.push_back(alarm);
    }

    auto finish = [&](const std::string& reason) {
        rep.abort_reason = reason;
        rep.final_key_bits = 0;
        art.transcript = transcript.entries();
        return art;
    };

    if (safety_violation) {
        art.transcript = transcript.entries();
        return art;
    }
    if (alice_key.size() < 100)
        return finish("insufficient sifted bits for post-processing");

    // Classical protocol with an authenticated transcript.
    transcript.record("bob->alice", "basis_reveal",
                      to_bytes("bases for " + std::to_string(rep.sifted_bits) + " detections"),
                      0);
    transcript.record("alice->bob", "sift_ack",
                      to_bytes(std::to_string(rep.sifted_bits) + " slots kept"), 0);

    QberEstimate est;
    try {
        est = estimate_qber(alice_key, bob_key, cfg.session.qber_sample_fraction,
                            derive_seed(cfg.seed, "qber_sample"));
    } catch (const std::exception& e) {
        return finish(std::string("qber estimation failed: ") + e.what());
    }
    rep.qber = est.qber;
    rep.sifted_bits_remaining = est.alice_remaining.size();
    transcript.record("alice->bob", "qber_sample",
                      to_bytes(std::to_string(est.sample_size) + " disclosed bits"),
                      est.sample_size);
    transcript.record("bob->alice", "qber_estimate",
                      to_bytes("qber " + std::to_string(est.qber)), 0);

    // Decoy bounds come from the class statistics whether or not a key is
    // extractable.
    try {
        auto bounds = decoy_bounds(to_class_map(rep.gains), to_class_map(rep.class_qbers),
                                   cfg.protocol);
        rep.y1_lower = bounds.y1_lower;
        rep.e1_upper = bounds.e1_upper;
        rep.decoy_warning = bounds.statistics_warning;
    } catch (const std::exception& e) {
        return finish(std::string("decoy analysis failed: ") + e.what());
    }

    if (est.qber >= kQberAbortThreshold)
        return finish("measured QBER at or above the abort threshold");

    CascadeResult cascade;
    try {
        double block_qber = std::clamp(est.qber, 0.005, 0.15);
        cascade = cascade_correct(est.alice_remaining, est.bob_remaining, block_qber,
                                  cfg.session.cascade_passes,
                                  derive_seed(cfg.seed, "cascade"));
    } catch (const ReconciliationError& e) {
        return finish(std::string("reconciliation aborted: ") + e.what());
    } catch (const std::exception& e) {
        return finish(std::string("reconciliation failed: ") + e.what());
    }
    rep.corrected_errors = cascade.corrected_errors;
    rep.leakage_bits = cascade.corrected_bob.leakage_bits;
    transcript.record("alice->bob", "cascade_parities",
                      to_bytes(std::to_string(cascade.leakage_bits - 64) + " parities"),
                      cascade.leakage_bits - 64);
    transcript.record("bob->alice", "verification_hash",
                      to_bytes(std::to_string(key_verification_hash(
                          cascade.corrected_bob.bits))),
                      64);

    DecoyBounds bounds{rep.y1_lower, rep.e1_upper, rep.decoy_warning};
    std::int64_t key_len = secret_key_length(
        static_cast<std::int64_t>(rep.sifted_bits_remaining), rep.qber, rep.leakage_bits,
        bounds, to_class_map(rep.gains), cfg.protocol);
    if (key_len <= 0)
        return finish("no extractable key at the measured parameters");

    auto final_key = toeplitz_pa(cascade.corrected_bob, derive_seed(cfg.seed, "pa"),
                                 static_cast<std::size_t>(key_len));
    transcript.record("alice->bob", "pa_seed",
                      to_bytes("toeplitz " + std::to_string(key_len) + " bits"), 0);

    rep.final_key_bits = key_len;
    if (rep.qkd_active_s > 0.0)
        rep.projected_key_rate_bps = static_cast<double>(key_len) / rep.qkd_active_s *
                                     (rep.full_rate_hz / rep.scaled_slot_rate_hz);

    art.key_record.qber = rep.qber;
    art.key_record.leakage_bits = rep.leakage_bits;
    art.key_record.key_bits = final_key.bits;
    art.key_available = true;
    art.transcript = transcript.entries();
    return art;
}

// --- report serialization ---------------------------------------------

std::string report_to_json(const PassReport& r) {
    json j;
    j["session_id"] = r.session_id;
    j["master_seed"] = r.master_seed;
    j["eavesdropper"] = r.eavesdropper;
    j["pass_duration_s"] = r.pass_duration_s;
    j["qkd_active_s"] = r.qkd_active_s;
    j["availability_fraction"] = r.availability_fraction;
    j["mean_coupling_eta"] = r.mean_coupling_eta;
    j["mean_channel_eta"] = r.mean_channel_eta;
    j["slots_transmitted"] = r.slots_transmitted;
    j["sifted_bits"] = r.sifted_bits;
    j["sifted_bits_remaining"] = r.sifted_bits_remaining;
    j["qber"] = r.qber;
    j["leakage_bits"] = r.leakage_bits;
    j["corrected_errors"] = r.corrected_errors;
    j["final_key_bits"] = r.final_key_bits;
    j["gains"] = r.gains;
    j["class_qbers"] = r.class_qbers;
    j["y1_lower"] = r.y1_lower;
    j["e1_upper"] = r.e1_upper;
    j["decoy_warning"] = r.decoy_warning;
    j["scaled_slot_rate_hz"] = r.scaled_slot_rate_hz;
    j["full_rate_hz"] = r.full_rate_hz;
    j["projected_key_rate_bps"] = r.projected_key_rate_bps;
    j["max_quantum_mu"] = r.max_quantum_mu;
    j["alarms"] = r.alarms;
    j["abort_reason"] = r.abort_reason;
    return j.dump(2) + "\n";
}

PassReport report_from_json(const std::string& text) {
    json j = json::parse(text);
    PassReport r;
    r.session_id = j.at("session_id").get<std::uint64_t>();
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.eavesdropper = j.at("eavesdropper").get<std::string>();
    r.pass_duration_s = j.at("pass_duration_s").get<double>();
    r.qkd_active_s = j.at("qkd_active_s").get<double>();
    r.availability_fraction = j.at("availability_fraction").get<double>();
    r.mean_coupling_eta = j.at("mean_coupling_eta").get<double>();
    r.mean_channel_eta = j.at("mean_channel_eta").get<double>();
    r.slots_transmitted = j.at("slots_transmitted").get<std::uint64_t>();
    r.sifted_bits = j.at("sifted_bits").get<std::uint64_t>();
    r.sifted_bits_remaining = j.at("sifted_bits_remaining").get<std::uint64_t>();
    r.qber = j.at("qber").get<double>();
    r.leakage_bits = j.at("leakage_bits").get<std::uint64_t>();
    r.corrected_errors = j.at("corrected_errors").get<std::uint64_t>();
    r.final_key_bits = j.at("final_key_bits").get<std::int64_t>();
    r.gains = j.at("gains").get<std::map<std::string, double>>();
    r.class_qbers = j.at("class_qbers").get<std::map<std::string, double>>();
    r.y1_lower = j.at("y1_lower").get<double>();
    r.e1_upper = j.at("e1_upper").get<double>();
    r.decoy_warning = j.at("decoy_warning").get<bool>();
    r.scaled_slot_rate_hz = j.at("scaled_slot_rate_hz").get<double>();
    r.full_rate_hz = j.at("full_rate_hz").get<double>();
    r.projected_key_rate_bps = j.at("projected_key_rate_bps").get<double>();
    r.max_quantum_mu = j.at("max_quantum_mu").get<double>();
    r.alarms = j.at("alarms").get<std::uint64_t>();
    r.abort_reason = j.at("abort_reason").get<std::string>();
    return r;
}

const char* const kReportCsvHeader =
    "session_id,master_seed,eavesdropper,pass_duration_s,qkd_active_s,"
    "availability_fraction,mean_coupling_eta,mean_channel_eta,slots_transmitted,"
    "sifted_bits,sifted_bits_remaining,qber,leakage_bits,corrected_errors,"
    "final_key_bits,gain_signal,gain_decoy,gain_vacuum,qber_signal,qber_decoy,"
    "qber_vacuum,y1_lower,e1_upper,decoy_warning,scaled_slot_rate_hz,full_rate_hz,"
    "projected_key_rate_bps,max_quantum_mu,alarms,abort_reason";

std::string report_to_csv(const PassReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << kReportCsvHeader << '\n'
        << r.session_id << ',' << r.master_seed << ',' << r.eavesdropper << ','
        << r.pass_duration_s << ',' << r.qkd_active_s << ',' << r.availability_fraction << ','
        << r.mean_coupling_eta << ',' << r.mean_channel_eta << ',' << r.slots_transmitted
        << ',' << r.sifted_bits << ',' << r.sifted_bits_remaining << ',' << r.qber << ','
        << r.leakage_bits << ',' << r.corrected_errors << ',' << r.final_key_bits << ','
        << r.gains.at("signal") << ',' << r.gains.at("decoy") << ',' << r.gains.at("vacuum")
        << ',' << r.class_qbers.at("signal") << ',' << r.class_qbers.at("decoy") << ','
        << r.class_qbers.at("vacuum") << ',' << r.y1_lower << ',' << r.e1_upper << ','
        << (r.decoy_warning ? 1 : 0) << ',' << r.scaled_slot_rate_hz << ',' << r.full_rate_hz
        << ',' << r.projected_key_rate_bps << ',' << r.max_quantum_mu << ',' << r.alarms << ',' << r.abort_reason
        << '\n';
    return out.str();
}

bool report_self_consistent(const PassReport& r, const ScenarioConfig& cfg) {
    if (!r.abort_reason.empty()) return r.final_key_bits == 0;
    DecoyBounds bounds{r.y1_lower, r.e1_upper, r.decoy_warning};
    auto recomputed = secret_key_length(static_cast<std::int64_t>(r.sifted_bits_remaining),
                                        r.qber, r.leakage_bits, bounds,
                                        to_class_map(r.gains), cfg.protocol);
    return recomputed == r.final_key_bits;
}

void write_artifacts(const MissionArtifacts& art, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
        if (!out)
            throw ConfigError("cannot write " + (fs::path(out_dir) / name).string());
        return out;
    };
    {
        auto out = open("report.json");
        out << report_to_json(art.report);
    }
    {
        auto out = open("report.csv");
        out << report_to_csv(art.report);
    }
    {
        auto out = open("timeline.csv");
        write_timeline_csv(out, art.timeline.timeline);
    }
    {
        auto out = open("telemetry.jsonl");
        for (const auto& packet : art.telemetry) out << packet.serialize() << '\n';
    }
    {
        auto out = open("transcript.jsonl");
        for (const auto& e : art.transcript) {
            json j;
            j["direction"] = e.direction;
            j["type"] = e.type;
            j["payload_size"] = e.payload_bytes;
            j["leakage_delta"] = e.leakage_delta;
            j["tag"] = e.auth_tag;
            out << j.dump() << '\n';
        }
    }
    if (art.key_available) {
        auto out = open("key.bin");
        write_key_store(out, art.key_record);
    }
}

void emit_report(const PassReport& report, const std::string& format,
                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("emit_report: cannot write " + path);
    if (format == "json")
        out << report_to_json(report);
    else if (format == "csv")
        out << report_to_csv(report);
    else
        throw ConfigError("emit_report: format must be 'json' or 'csv'");
}

} // namespace skylink
