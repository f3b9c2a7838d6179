// Satellite QKD transmitter model: seeded BB84 frame generation with decoy
// intensities, phase modulation with calibration drift, photodiode-feedback
// bias control, SOA/VOA output leveling down to single-photon pulses,
// power-trace anomaly detection and CRC-checked telemetry.

#ifndef SKYLINK_TRANSMITTER_HPP
#define SKYLINK_TRANSMITTER_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace skylink {

enum class FrameRole : std::uint8_t { quantum, reference };
enum class IntensityClass : std::uint8_t { signal, decoy, vacuum };

const char* to_string(IntensityClass c);

struct ProtocolParams {
    double qubit_rate_hz = 2.25e9; // full mission modulation rate
    double basis_probabilities[2] = {0.5, 0.5};
    double mu_signal = 0.5;
    double mu_decoy = 0.1;
    double mu_vacuum = 0.0;
    double intensity_probabilities[3] = {0.8, 0.1, 0.1}; // signal, decoy, vacuum
    double wavelength_m = 1550e-9;                       // C band
    // One high-power reference frame per this many slots (timing/tracking
    // aid); the exact flight interleaving pattern is not public.
    std::uint64_t reference_interval = 1000;
    double reference_mu = 1000.0;

    void validate() const;
    double mu_for(IntensityClass c) const;
    double intensity_probability(IntensityClass c) const;
};

struct PulseFrame {
    std::uint64_t slot = 0;
    FrameRole role = FrameRole::quantum;
    std::uint8_t basis = 0;
    std::uint8_t bit = 0;
    IntensityClass intensity = IntensityClass::signal;
    double mean_photon_number = 0.0;
    double phase_rad = 0.0;
};

// Intended BB84 phase: pi/2 * (2*bit + basis), i.e. {0, pi} in basis 0 and
// {pi/2, 3pi/2} in basis 1.
double bb84_phase(std::uint8_t basis, std::uint8_t bit);

// Deterministic QRNG stand-in: basis/bit/intensity drawn per the configured
// probabilities, reference frames interleaved every reference_interval
// slots. Slot numbers start at first_slot.
std::vector<PulseFrame> generate_block(const ProtocolParams& params, std::size_t length,
                                       std::uint64_t seed, std::uint64_t first_slot = 0);

struct CalibrationState {
    double phase_bias_rad = 0.0;
    double amplitude_bias = 1.0;
    double drift_rms_per_step = 0.0; // random-walk step on the phase bias
    double photodiode_reading = 0.0;
    std::uint64_t drift_steps = 0; // counts steps so drift draws are reproducible
    std::uint64_t drift_seed = 0;
};

// Modulator output: phase shifted by the calibration phase bias, mean
// photon number scaled by the amplitude bias. Nothing else changes.
PulseFrame apply_modulation(const PulseFrame& frame, const CalibrationState& cal);

// One proportional feedback step toward the target phase, then the random
// drift of the environment. With zero drift the bias contracts to zero
// geometrically in the gain.
CalibrationState calibration_step(const CalibrationState& cal, double target_phase_rad,
                                  double ctrl_gain);

// SOA gate and VOA attenuation. SOA off multiplies by the extinction
// factor; the VOA applies 10^(-att/10). A quantum frame ending above one
// photon per pulse violates the transmitter safety envelope.
PulseFrame set_output_level(const PulseFrame& frame, bool soa_on, double voa_attenuation_db,
                            double soa_gain = 1.0, double soa_extinction = 1e-4);

struct TelemetryPacket {
    double timestamp_s = 0.0;
    std::string packet_type; // housekeeping | calibration | alarm
    std::map<std::string, double> fields;
    std::uint32_t crc32 = 0;

    // Canonical serialization (single JSON line, sorted keys) and parser;
    // the CRC covers everything before the crc field.
    std::string serialize() const;
    static TelemetryPacket parse(const std::string& line);
};

std::uint32_t crc32_ieee(const void* data, std::size_t size);

TelemetryPacket telemetry_snapshot(const CalibrationState& cal,
                                   const std::map<std::string, double>& counters,
                                   double t_s);

struct AlarmRegion {
    std::size_t first_index = 0;
    std::size_t last_index = 0;
    double peak_deviation_sigma = 0.0;
};

struct AnomalyReport {
    std::vector<AlarmRegion> regions;
    std::vector<TelemetryPacket> alarms; // one packet per flagged region
    double median = 0.0;
    double robust_sigma = 0.0; // 1.4826 * MAD
};

// Robust outlier scan of a monitored power trace: flags samples more than
// threshold_sigma robust deviations from the median. Requires >= 10
// samples.
AnomalyReport detect_anomaly(const std::vector<double>& power_trace, double threshold_sigma);

} // namespace skylink

#endif
