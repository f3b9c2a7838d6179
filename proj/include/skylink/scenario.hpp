// Scenario configuration: every module's parameters plus the master seed,
// serialized as JSON. Validation reports the full list of violations, not
// just the first.

#ifndef SKYLINK_SCENARIO_HPP
#define SKYLINK_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skylink/adaptive_optics.hpp"
#include "skylink/pass_geometry.hpp"
#include "skylink/pat.hpp"
#include "skylink/quantum_link.hpp"
#include "skylink/transmitter.hpp"
#include "skylink/turbulence.hpp"

namespace skylink {

struct ChannelConfig {
    double divergence_full_angle_rad = 10e-6;
    double zenith_atm_loss_db = 1.0;

    void validate() const;
};

struct AoSimConfig {
    int grid_n = 64;
    double screen_oversize = 1.25; // grid extent / aperture diameter
    int subap_n = 16;
    double wfs_noise_rad = 0.01;

    void validate() const;
};

struct SessionConfig {
    double pass_step_s = 1.0;
    double qber_sample_fraction = 0.1;
    int cascade_passes = 4;
    std::uint64_t auth_pool_bytes = 1 << 16;
    double telemetry_period_s = 1.0;
    double anomaly_threshold_sigma = 6.0;
    double calibration_gain = 0.3;
    double calibration_drift_rms = 1e-3;

    void validate() const;
};

struct ScenarioConfig {
    // Mission defaults: a 500 km overhead pass culminating at 70 degrees,
    // worked above a 30 degree elevation mask.
    OrbitConfig orbit{500.0, 70.0, 6371.0};
    StationConfig station{0.80, 30.0, 4};
    TurbulenceProfile turbulence;
    ProtocolParams protocol;
    DetectorModel detector;
    LoopConfig loop;
    PatTimingConfig pat;
    ChannelConfig channel;
    AoSimConfig ao;
    SessionConfig session;
    std::vector<std::pair<double, double>> cloud_blockages;
    EavesdropperModel eavesdropper = EavesdropperModel::none;
    std::uint64_t seed = 1;
    double scaled_slot_rate_hz = 1e6;

    // Every violation across all sub-configs; empty means valid.
    std::vector<std::string> validate_all() const;
};

std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const std::string& text);

struct ScenarioLoadResult {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> errors;
};

// Parse + validate; parse failures and invariant violations all end up in
// `errors` with field context.
ScenarioLoadResult load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

} // namespace skylink

#endif
