#include "skylink/transmitter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "skylink/errors.hpp"
#include "skylink/rng.hpp"

namespace skylink {

namespace {
constexpr double kHalfPi = 1.57079632679489661923;

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return (n % 2) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
} // namespace

const char* to_string(IntensityClass c) {
    switch (c) {
        case IntensityClass::signal: return "signal";
        case IntensityClass::decoy: return "decoy";
        case IntensityClass::vacuum: return "vacuum";
    }
    return "?";
}

void ProtocolParams::validate() const {
    if (!(qubit_rate_hz > 0.0))
        throw ConfigError("protocol.qubit_rate_hz must be > 0");
    if (!(wavelength_m > 0.0))
        throw ConfigError("protocol.wavelength_m must be > 0");
    for (double p : basis_probabilities)
        if (p < 0.0 || p > 1.0)
            throw ConfigError("protocol.basis_probabilities must lie in [0, 1]");
    if (std::abs(basis_probabilities[0] + basis_probabilities[1] - 1.0) > 1e-9)
        throw ConfigError("protocol.basis_probabilities must sum to 1");
    double psum = 0.0;
    for (double p : intensity_probabilities) {
        if (p < 0.0 || p > 1.0)
            throw ConfigError("protocol.intensity_probabilities must lie in [0, 1]");
        psum += p;
    }
    if (std::abs(psum - 1.0) > 1e-9)
        throw ConfigError("protocol.intensity_probabilities must sum to 1");
    if (!(mu_signal > mu_decoy && mu_decoy > mu_vacuum && mu_vacuum >= 0.0))
        throw ConfigError("protocol intensities must satisfy mu_s > mu_d > mu_v >= 0");
    if (mu_signal > 1.0)
        throw ConfigError("protocol.mu_signal must not exceed one photon per pulse");
    if (reference_interval < 1)
        throw ConfigError("protocol.reference_interval must be >= 1");
    if (!(reference_mu > 1.0))
        throw ConfigError("protocol.reference_mu must be well above one photon");
}

double ProtocolParams::mu_for(IntensityClass c) const {
    switch (c) {
        case IntensityClass::signal: return mu_signal;
        case IntensityClass::decoy: return mu_decoy;
        case IntensityClass::vacuum: return mu_vacuum;
    }
    return 0.0;
}

double ProtocolParams::intensity_probability(IntensityClass c) const {
    return intensity_probabilities[static_cast<int>(c)];
}

double bb84_phase(std::uint8_t basis, std::uint8_t bit) {
    return kHalfPi * (2.0 * bit + basis);
}

std::vector<PulseFrame> generate_block(const ProtocolParams& params, std::size_t length,
                                       std::uint64_t seed, std::uint64_t first_slot) {
    params.validate();
    if (length < 1)
        throw ConfigError("generate_block: length must be >= 1");

    Rng rng(derive_seed(seed, "frame_block"));
    std::vector<PulseFrame> frames;
    frames.reserve(length);
    for (std::size_t k = 0; k < length; ++k) {
        PulseFrame f;
        f.slot = first_slot + k;
        if (f.slot % params.reference_interval == 0) {
            f.role = FrameRole::reference;
            f.mean_photon_number = params.reference_mu;
            frames.push_back(f);
            continue;
        }
        f.basis = rng.uniform() < params.basis_probabilities[0] ? 0 : 1;
        f.bit = static_cast<std::uint8_t>(rng.uniform_int(2));
        double u = rng.uniform();
        if (u < params.intensity_probabilities[0])
            f.intensity = IntensityClass::signal;
        else if (u < params.intensity_probabilities[0] + params.intensity_probabilities[1])
            f.intensity = IntensityClass::decoy;
        else
            f.intensity = IntensityClass::vacuum;
        f.mean_photon_number = params.mu_for(f.intensity);
        f.phase_rad = bb84_phase(f.basis, f.bit);
        frames.push_back(f);
    }
    return frames;
}

PulseFrame apply_modulation(const PulseFrame& frame, const CalibrationState& cal) {
    PulseFrame out = frame;
    out.phase_rad = frame.phase_rad + cal.phase_bias_rad;
    out.mean_photon_number = frame.mean_photon_number * cal.amplitude_bias;
    return out;
}

CalibrationState calibration_step(const CalibrationState& cal, double target_phase_rad,
                                  double ctrl_gain) {
    if (!(ctrl_gain > 0.0) || ctrl_gain > 1.0)
        throw ConfigError("calibration_step: ctrl_gain must lie in (0, 1]");

    CalibrationState out = cal;
    // Photodiode measures the phase error against the target; proportional
    // correction, then the environmental drift takes its random step.
    double error = cal.phase_bias_rad - target_phase_rad;
    out.phase_bias_rad = cal.phase_bias_rad - ctrl_gain * error;
    if (cal.drift_rms_per_step > 0.0) {
        Rng rng(derive_seed(cal.drift_seed, "cal_drift", cal.drift_steps));
        out.phase_bias_rad += rng.normal(0.0, cal.drift_rms_per_step);
    }
    out.drift_steps = cal.drift_steps + 1;
    out.photodiode_reading = std::abs(out.phase_bias_rad - target_phase_rad);
    return out;
}

PulseFrame set_output_level(const PulseFrame& frame, bool soa_on, double voa_attenuation_db,
                            double soa_gain, double soa_extinction) {
    if (voa_attenuation_db < 0.0)
        throw DomainError("set_output_level: VOA attenuation must be >= 0 dB");

    PulseFrame out = frame;
    out.mean_photon_number *= soa_on ? soa_gain : soa_extinction;
    out.mean_photon_number *= std::pow(10.0, -voa_attenuation_db / 10.0);
    if (out.role == FrameRole::quantum && out.mean_photon_number > 1.0)
        throw ProtocolError("set_output_level: quantum frame above one photon per pulse (slot " +
                            std::to_string(out.slot) + ")");
    return out;
}

namespace {
std::string telemetry_payload(const TelemetryPacket& p) {
    nlohmann::json j;
    j["t_s"] = p.timestamp_s;
    j["type"] = p.packet_type;
    j["fields"] = p.fields;
    return j.dump();
}
} // namespace

std::string TelemetryPacket::serialize() const {
    std::string payload = telemetry_payload(*this);
    nlohmann::json j = nlohmann::json::parse(payload);
    j["crc32"] = crc32_ieee(payload.data(), payload.size());
    return j.dump();
}

TelemetryPacket TelemetryPacket::parse(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    TelemetryPacket p;
    p.timestamp_s = j.at("t_s").get<double>();
    p.packet_type = j.at("type").get<std::string>();
    p.fields = j.at("fields").get<std::map<std::string, double>>();
    p.crc32 = j.at("crc32").get<std::uint32_t>();

    std::string s = telemetry_payload(p);
    if (crc32_ieee(s.data(), s.size()) != p.crc32)
        throw ProtocolError("telemetry packet failed CRC validation");
    return p;
}

std::uint32_t crc32_ieee(const void* data, std::size_t size) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i)
        crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

TelemetryPacket telemetry_snapshot(const CalibrationState& cal,
                                   const std::map<std::string, double>& counters,
                                   double t_s) {
    TelemetryPacket p;
    p.timestamp_s = t_s;
    p.packet_type = "housekeeping";
    p.fields = counters;
    p.fields["phase_bias_rad"] = cal.phase_bias_rad;
    p.fields["amplitude_bias"] = cal.amplitude_bias;
    p.fields["photodiode_reading"] = cal.photodiode_reading;
    std::string payload = telemetry_payload(p);
    p.crc32 = crc32_ieee(payload.data(), payload.size());
    return p;
}

AnomalyReport detect_anomaly(const std::vector<double>& power_trace, double threshold_sigma) {
    if (power_trace.size() < 10)
        throw DomainError("detect_anomaly: need at least 10 samples");
    if (!(threshold_sigma > 0.0))
        throw ConfigError("detect_anomaly: threshold_sigma must be > 0");

    AnomalyReport report;
    report.median = median_of(power_trace);
    std::vector<double> dev(power_trace.size());
    for (std::size_t i = 0; i < power_trace.size(); ++i)
        dev[i] = std::abs(power_trace[i] - report.median);
    report.robust_sigma = 1.4826 * median_of(dev);

    const double limit = threshold_sigma * report.robust_sigma;
    bool in_region = false;
    AlarmRegion region;
    auto flush = [&]() {
        if (!in_region) return;
        report.regions.push_back(region);
        TelemetryPacket alarm;
        alarm.packet_type = "alarm";
        alarm.timestamp_s = static_cast<double>(region.first_index);
        alarm.fields["first_index"] = static_cast<double>(region.first_index);
        alarm.fields["last_index"] = static_cast<double>(region.last_index);
        alarm.fields["peak_deviation_sigma"] = region.peak_deviation_sigma;
        std::string payload = telemetry_payload(alarm);
        alarm.crc32 = crc32_ieee(payload.data(), payload.size());
        report.alarms.push_back(alarm);
        in_region = false;
    };
    for (std::size_t i = 0; i < power_trace.size(); ++i) {
        bool flagged = dev[i] > limit && dev[i] > 0.0;
        if (flagged) {
            double sigmas = report.robust_sigma > 0.0
                                ? dev[i] / report.robust_sigma
                                : std::numeric_limits<double>::infinity();
            if (!in_region) {
                in_region = true;
                region = {i, i, sigmas};
            } else {
                region.last_index = i;
                region.peak_deviation_sigma = std::max(region.peak_deviation_sigma, sigmas);
            }
        } else {
            flush();
        }
    }
    flush();
    return report;
}

} // namespace skylink
