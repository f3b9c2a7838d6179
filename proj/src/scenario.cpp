#include "skylink/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skylink/errors.hpp"

namespace skylink {

using nlohmann::json;

void ChannelConfig::validate() const {
    if (!(divergence_full_angle_rad > 0.0))
        throw ConfigError("channel.divergence_full_angle_rad must be > 0");
    if (zenith_atm_loss_db < 0.0)
        throw ConfigError("channel.zenith_atm_loss_db must be >= 0");
}

void AoSimConfig::validate() const {
    if (grid_n < 16 || (grid_n & (grid_n - 1)) != 0)
        throw ConfigError("ao.grid_n must be a power of two >= 16");
    if (!(screen_oversize > 1.0))
        throw ConfigError("ao.screen_oversize must exceed 1");
    if (subap_n < 2 || grid_n % subap_n != 0)
        throw ConfigError("ao.subap_n must be >= 2 and divide ao.grid_n");
    if (wfs_noise_rad < 0.0)
        throw ConfigError("ao.wfs_noise_rad must be >= 0");
}

void SessionConfig::validate() const {
    if (!(pass_step_s > 0.0))
        throw ConfigError("session.pass_step_s must be > 0");
    if (!(qber_sample_fraction > 0.0) || qber_sample_fraction >= 1.0)
        throw ConfigError("session.qber_sample_fraction must lie in (0, 1)");
    if (cascade_passes < 2)
        throw ConfigError("session.cascade_passes must be >= 2");
    if (auth_pool_bytes < 64)
        throw ConfigError("session.auth_pool_bytes must be >= 64");
    if (!(telemetry_period_s > 0.0))
        throw ConfigError("session.telemetry_period_s must be > 0");
    if (!(anomaly_threshold_sigma > 0.0))
        throw ConfigError("session.anomaly_threshold_sigma must be > 0");
    if (!(calibration_gain > 0.0) || calibration_gain > 1.0)
        throw ConfigError("session.calibration_gain must lie in (0, 1]");
    if (calibration_drift_rms < 0.0)
        throw ConfigError("session.calibration_drift_rms must be >= 0");
}

std::vector<std::string> ScenarioConfig::validate_all() const {
    std::vector<std::string> errors;
    auto check = [&errors](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            errors.emplace_back(e.what());
        }
    };
    check([&] { orbit.validate(); });
    check([&] { station.validate(); });
    check([&] { turbulence.validate(); });
    check([&] { protocol.validate(); });
    check([&] { detector.validate(); });
    check([&] { loop.validate(); });
    check([&] { pat.validate(); });
    check([&] { channel.validate(); });
    check([&] { ao.validate(); });
    check([&] { session.validate(); });
    check([&] {
        if (!(scaled_slot_rate_hz > 0.0))
            throw ConfigError("scaled_slot_rate_hz must be > 0");
        if (scaled_slot_rate_hz < loop.rate_hz)
            throw ConfigError("scaled_slot_rate_hz must be >= loop.rate_hz");
    });
    check([&] {
        for (std::size_t i = 0; i < cloud_blockages.size(); ++i) {
            if (cloud_blockages[i].second <= cloud_blockages[i].first)
                throw ConfigError("cloud_blockages[" + std::to_string(i) +
                                  "] is empty or inverted");
        }
    });
    return errors;
}

namespace {
json clouds_to_json(const std::vector<std::pair<double, double>>& clouds) {
    json arr = json::array();
    for (const auto& [a, b] : clouds) arr.push_back(json::array({a, b}));
    return arr;
}
} // namespace

std::string scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    j["orbit"] = {{"altitude_km", cfg.orbit.altitude_km},
                  {"max_elevation_deg", cfg.orbit.max_elevation_deg},
                  {"earth_radius_km", cfg.orbit.earth_radius_km}};
    j["station"] = {{"aperture_diameter_m", cfg.station.aperture_diameter_m},
                    {"elevation_mask_deg", cfg.station.elevation_mask_deg},
                    {"uplink_beam_count", cfg.station.uplink_beam_count}};
    j["turbulence"] = {{"r0_zenith_m", cfg.turbulence.r0_zenith_m},
                       {"reference_wavelength_m", cfg.turbulence.reference_wavelength_m},
                       {"wind_speed_mps", cfg.turbulence.wind_speed_mps},
                       {"scintillation_index_zenith", cfg.turbulence.scintillation_index_zenith}};
    j["protocol"] = {{"qubit_rate_hz", cfg.protocol.qubit_rate_hz},
                     {"basis_probabilities",
                      json::array({cfg.protocol.basis_probabilities[0],
                                   cfg.protocol.basis_probabilities[1]})},
                     {"mu_signal", cfg.protocol.mu_signal},
                     {"mu_decoy", cfg.protocol.mu_decoy},
                     {"mu_vacuum", cfg.protocol.mu_vacuum},
                     {"intensity_probabilities",
                      json::array({cfg.protocol.intensity_probabilities[0],
                                   cfg.protocol.intensity_probabilities[1],
                                   cfg.protocol.intensity_probabilities[2]})},
                     {"wavelength_m", cfg.protocol.wavelength_m},
                     {"reference_interval", cfg.protocol.reference_interval},
                     {"reference_mu", cfg.protocol.reference_mu}};
    j["detector"] = {{"efficiency", cfg.detector.efficiency},
                     {"dark_count_prob_per_slot", cfg.detector.dark_count_prob_per_slot},
                     {"error_prob", cfg.detector.error_prob}};
    j["loop"] = {{"rate_hz", cfg.loop.rate_hz},
                 {"gain", cfg.loop.gain},
                 {"dm_mode_count", cfg.loop.dm_mode_count},
                 {"mode_radius_ratio", cfg.loop.mode_radius_ratio}};
    j["pat"] = {{"uplink_acquire_delay_s", cfg.pat.uplink_acquire_delay_s},
                {"downlink_acquire_delay_s", cfg.pat.downlink_acquire_delay_s},
                {"tracking_settle_delay_s", cfg.pat.tracking_settle_delay_s},
                {"reacquire_delay_s", cfg.pat.reacquire_delay_s},
                {"reacquire_timeout_s", cfg.pat.reacquire_timeout_s}};
    j["channel"] = {{"divergence_full_angle_rad", cfg.channel.divergence_full_angle_rad},
                    {"zenith_atm_loss_db", cfg.channel.zenith_atm_loss_db}};
    j["ao"] = {{"grid_n", cfg.ao.grid_n},
               {"screen_oversize", cfg.ao.screen_oversize},
               {"subap_n", cfg.ao.subap_n},
               {"wfs_noise_rad", cfg.ao.wfs_noise_rad}};
    j["session"] = {{"pass_step_s", cfg.session.pass_step_s},
                    {"qber_sample_fraction", cfg.session.qber_sample_fraction},
                    {"cascade_passes", cfg.session.cascade_passes},
                    {"auth_pool_bytes", cfg.session.auth_pool_bytes},
                    {"telemetry_period_s", cfg.session.telemetry_period_s},
                    {"anomaly_threshold_sigma", cfg.session.anomaly_threshold_sigma},
                    {"calibration_gain", cfg.session.calibration_gain},
                    {"calibration_drift_rms", cfg.session.calibration_drift_rms}};
    j["cloud_blockages"] = clouds_to_json(cfg.cloud_blockages);
    j["eavesdropper"] =
        cfg.eavesdropper == EavesdropperModel::intercept_resend ? "intercept_resend" : "none";
    j["seed"] = cfg.seed;
    j["scaled_slot_rate_hz"] = cfg.scaled_slot_rate_hz;
    return j.dump(2) + "\n";
}

namespace {
// Overwrites `out` when the key is present; leaves the default otherwise.
template <typename T>
void load_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}
} // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
    json j = json::parse(text);
    ScenarioConfig cfg;
    if (j.contains("orbit")) {
        const auto& s = j["orbit"];
        load_field(s, "altitude_km", cfg.orbit.altitude_km);
        load_field(s, "max_elevation_deg", cfg.orbit.max_elevation_deg);
        load_field(s, "earth_radius_km", cfg.orbit.earth_radius_km);
    }
    if (j.contains("station")) {
        const auto& s = j["station"];
        load_field(s, "aperture_diameter_m", cfg.station.aperture_diameter_m);
        load_field(s, "elevation_mask_deg", cfg.station.elevation_mask_deg);
        load_field(s, "uplink_beam_count", cfg.station.uplink_beam_count);
    }
    if (j.contains("turbulence")) {
        const auto& s = j["turbulence"];
        load_field(s, "r0_zenith_m", cfg.turbulence.r0_zenith_m);
        load_field(s, "reference_wavelength_m", cfg.turbulence.reference_wavelength_m);
        load_field(s, "wind_speed_mps", cfg.turbulence.wind_speed_mps);
        load_field(s, "scintillation_index_zenith", cfg.turbulence.scintillation_index_zenith);
    }
    if (j.contains("protocol")) {
        const auto& s = j["protocol"];
        load_field(s, "qubit_rate_hz", cfg.protocol.qubit_rate_hz);
        if (s.contains("basis_probabilities")) {
            cfg.protocol.basis_probabilities[0] = s["basis_probabilities"].at(0).get<double>();
            cfg.protocol.basis_probabilities[1] = s["basis_probabilities"].at(1).get<double>();
        }
        load_field(s, "mu_signal", cfg.protocol.mu_signal);
        load_field(s, "mu_decoy", cfg.protocol.mu_decoy);
        load_field(s, "mu_vacuum", cfg.protocol.mu_vacuum);
        if (s.contains("intensity_probabilities")) {
            for (int k = 0; k < 3; ++k)
                cfg.protocol.intensity_probabilities[k] =
                    s["intensity_probabilities"].at(k).get<double>();
        }
        load_field(s, "wavelength_m", cfg.protocol.wavelength_m);
        load_field(s, "reference_interval", cfg.protocol.reference_interval);
        load_field(s, "reference_mu", cfg.protocol.reference_mu);
    }
    if (j.contains("detector")) {
        const auto& s = j["detector"];
        load_field(s, "efficiency", cfg.detector.efficiency);
        load_field(s, "dark_count_prob_per_slot", cfg.detector.dark_count_prob_per_slot);
        load_field(s, "error_prob", cfg.detector.error_prob);
    }
    if (j.contains("loop")) {
        const auto& s = j["loop"];
        load_field(s, "rate_hz", cfg.loop.rate_hz);
        load_field(s, "gain", cfg.loop.gain);
        load_field(s, "dm_mode_count", cfg.loop.dm_mode_count);
        load_field(s, "mode_radius_ratio", cfg.loop.mode_radius_ratio);
    }
    if (j.contains("pat")) {
        const auto& s = j["pat"];
        load_field(s, "uplink_acquire_delay_s", cfg.pat.uplink_acquire_delay_s);
        load_field(s, "downlink_acquire_delay_s", cfg.pat.downlink_acquire_delay_s);
        load_field(s, "tracking_settle_delay_s", cfg.pat.tracking_settle_delay_s);
        load_field(s, "reacquire_delay_s", cfg.pat.reacquire_delay_s);
        load_field(s, "reacquire_timeout_s", cfg.pat.reacquire_timeout_s);
    }
    if (j.contains("channel")) {
        const auto& s = j["channel"];
        load_field(s, "divergence_full_angle_rad", cfg.channel.divergence_full_angle_rad);
        load_field(s, "zenith_atm_loss_db", cfg.channel.zenith_atm_loss_db);
    }
    if (j.contains("ao")) {
        const auto& s = j["ao"];
        load_field(s, "grid_n", cfg.ao.grid_n);
        load_field(s, "screen_oversize", cfg.ao.screen_oversize);
        load_field(s, "subap_n", cfg.ao.subap_n);
        load_field(s, "wfs_noise_rad", cfg.ao.wfs_noise_rad);
    }
    if (j.contains("session")) {
        const auto& s = j["session"];
        load_field(s, "pass_step_s", cfg.session.pass_step_s);
        load_field(s, "qber_sample_fraction", cfg.session.qber_sample_fraction);
        load_field(s, "cascade_passes", cfg.session.cascade_passes);
        load_field(s, "auth_pool_bytes", cfg.session.auth_pool_bytes);
        load_field(s, "telemetry_period_s", cfg.session.telemetry_period_s);
        load_field(s, "anomaly_threshold_sigma", cfg.session.anomaly_threshold_sigma);
        load_field(s, "calibration_gain", cfg.session.calibration_gain);
        load_field(s, "calibration_drift_rms", cfg.session.calibration_drift_rms);
    }
    if (j.contains("cloud_blockages")) {
        cfg.cloud_blockages.clear();
        for (const auto& c : j["cloud_blockages"])
            cfg.cloud_blockages.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
    }
    if (j.contains("eavesdropper")) {
        std::string eve = j["eavesdropper"].get<std::string>();
        if (eve == "none")
            cfg.eavesdropper = EavesdropperModel::none;
        else if (eve == "intercept_resend")
            cfg.eavesdropper = EavesdropperModel::intercept_resend;
        else
            throw ConfigError("eavesdropper must be 'none' or 'intercept_resend'");
    }
    load_field(j, "seed", cfg.seed);
    load_field(j, "scaled_slot_rate_hz", cfg.scaled_slot_rate_hz);
    return cfg;
}

ScenarioLoadResult load_scenario(const std::string& path) {
    ScenarioLoadResult result;
    std::ifstream in(path);
    if (!in) {
        result.errors.push_back("cannot open scenario file: " + path);
        return result;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ScenarioConfig cfg;
    try {
        cfg = scenario_from_json(buf.str());
    } catch (const json::exception& e) {
        result.errors.push_back(std::string("scenario parse error: ") + e.what());
        return result;
    } catch (const std::exception& e) {
        result.errors.push_back(e.what());
        return result;
    }
    result.errors = cfg.validate_all();
    if (result.errors.empty()) result.config = cfg;
    return result;
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write scenario file: " + path);
    out << scenario_to_json(cfg);
}

} // namespace skylink
