// Downlink composition: transmitted frames + per-slot channel and coupling
// transmittance + threshold detector pair -> detection records. Hosts the
// intercept-resend eavesdropper and the per-photon-number bookkeeping that
// serves as ground truth for decoy-state bounds.

#ifndef SKYLINK_QUANTUM_LINK_HPP
#define SKYLINK_QUANTUM_LINK_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "skylink/transmitter.hpp"
#include "skylink/turbulence.hpp"

namespace skylink {

struct DetectorModel {
    double efficiency = 0.2;
    double dark_count_prob_per_slot = 1e-6;
    double error_prob = 0.005; // intrinsic misalignment error

    void validate() const;
};

enum class DetectionOutcome : std::uint8_t { no_click, click, double_click };

struct DetectionRecord {
    std::uint64_t slot = 0;
    std::uint8_t bob_basis = 0;
    DetectionOutcome outcome = DetectionOutcome::no_click;
    // Assigned bit for click outcomes; double clicks carry a uniformly
    // random bit (squashing rule).
    std::uint8_t bit = 0;
};

// p = 1 - (1 - dark) * exp(-mu * eta_total * efficiency); monotone in mu
// and eta_total.
double click_probability(double mu, double eta_total, const DetectorModel& det);

enum class EavesdropperModel : std::uint8_t { none, intercept_resend };

// Eve measures in a uniformly random basis and resends the eigenstate she
// observed at her chosen intensity. Reference frames pass through
// unchanged.
PulseFrame intercept_resend(const PulseFrame& frame, std::uint64_t seed,
                            double resend_mu = 0.5);

struct LinkConfig {
    DetectorModel detector;
    EavesdropperModel eavesdropper = EavesdropperModel::none;
    double slot_rate_hz = 1e6;  // scaled simulation slot rate
    double eve_resend_mu = 0.5; // signal intensity Eve resends at

    void validate() const;
};

// Ground truth tallies, per intensity class and per photon number actually
// emitted (Poisson-sampled). "sifted" counts basis-matched clicked quantum
// slots; "errors" counts sifted bit mismatches against Alice's bit.
struct PhotonTally {
    static constexpr int kMaxPhotons = 15; // higher counts clamp into the last bin

    struct ClassTally {
        std::uint64_t sent = 0, clicked = 0, sifted = 0, errors = 0;
        std::array<std::uint64_t, kMaxPhotons + 1> sent_n{}, clicked_n{}, sifted_n{},
            error_n{};
    };
    std::array<ClassTally, 3> per_class{}; // indexed by IntensityClass

    const ClassTally& for_class(IntensityClass c) const {
        return per_class[static_cast<int>(c)];
    }
    double gain(IntensityClass c) const;
    double qber(IntensityClass c) const;
    // Yield / error rate conditioned on exactly one photon leaving Alice.
    double true_single_photon_yield() const;
    double true_single_photon_error() const;
};

struct LinkResult {
    std::vector<DetectionRecord> records; // one per quantum frame, slot order
    PhotonTally tally;
};

// Per-slot Monte Carlo through the channel. eta(t) and coupling(t) are
// piecewise-constant series sampled at their own rates; slot i maps to time
// i / slot_rate_hz and both series must cover the last frame's slot.
// Outcome of slot i depends only on frame i, the series values at i, and
// the seed.
LinkResult transmit_and_detect(const std::vector<PulseFrame>& frames,
                               const TransmittanceSeries& eta_series,
                               const TransmittanceSeries& coupling_series,
                               const LinkConfig& cfg, std::uint64_t seed);

// CSV with header `slot,bob_basis,outcome,bit`.
void write_records_csv(std::ostream& out, const std::vector<DetectionRecord>& records);

} // namespace skylink

#endif
