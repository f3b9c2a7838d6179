// End-to-end pass orchestration: geometry -> PAT -> per-tick channel + AO
// -> transmitter -> detection -> post-processing -> report, key store and
// logs. Everything is a pure function of the scenario (including its
// master seed).

#ifndef SKYLINK_MISSION_HPP
#define SKYLINK_MISSION_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "skylink/pat.hpp"
#include "skylink/postprocessing.hpp"
#include "skylink/scenario.hpp"

namespace skylink {

struct PassReport {
    std::uint64_t session_id = 0;
    std::uint64_t master_seed = 0;
    std::string eavesdropper = "none";

    double pass_duration_s = 0.0;
    double qkd_active_s = 0.0;
    double availability_fraction = 0.0;
    double mean_coupling_eta = 0.0;
    double mean_channel_eta = 0.0;

    std::uint64_t slots_transmitted = 0;
    std::uint64_t sifted_bits = 0;          // before sampling disclosure
    std::uint64_t sifted_bits_remaining = 0; // key material entering reconciliation
    double qber = 0.0;
    std::uint64_t leakage_bits = 0; // sample + parities + verification hash
    std::uint64_t corrected_errors = 0;
    std::int64_t final_key_bits = 0;

    std::map<std::string, double> gains;       // per intensity class
    std::map<std::string, double> class_qbers; // per intensity class
    double y1_lower = 0.0;
    double e1_upper = 1.0;
    bool decoy_warning = false;

    // Secret-key rate scaled from the simulated slot rate to the full
    // mission modulation rate.
    double scaled_slot_rate_hz = 0.0;
    double full_rate_hz = 0.0;
    double projected_key_rate_bps = 0.0;

    double max_quantum_mu = 0.0; // transmitter safety envelope witness
    std::uint64_t alarms = 0;
    std::string abort_reason; // empty on success
};

std::string report_to_json(const PassReport& report);
PassReport report_from_json(const std::string& text);
// Single-row CSV; the header is part of the interface.
std::string report_to_csv(const PassReport& report);
extern const char* const kReportCsvHeader;

// final_key_bits must equal secret_key_length recomputed from the report's
// own fields (or 0 on abort).
bool report_self_consistent(const PassReport& report, const ScenarioConfig& cfg);

struct MissionArtifacts {
    PassReport report;
    PassTimeline timeline;
    std::vector<TelemetryPacket> telemetry;
    std::vector<TranscriptEntry> transcript;
    KeyStoreRecord key_record; // empty key on abort
    bool key_available = false;
};

MissionArtifacts run_end_to_end(const ScenarioConfig& cfg);

// Writes report.json, report.csv, timeline.csv, telemetry.jsonl,
// transcript.jsonl and key.bin (when a key exists) under out_dir.
void write_artifacts(const MissionArtifacts& artifacts, const std::string& out_dir);

void emit_report(const PassReport& report, const std::string& format,
                 const std::string& path);

} // namespace skylink

#endif
