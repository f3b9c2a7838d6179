#include "skylink/quantum_link.hpp"

#include <cmath>
#include <ostream>

#include "skylink/errors.hpp"
#include "skylink/rng.hpp"

namespace skylink {

void DetectorModel::validate() const {
    if (!(efficiency > 0.0) || efficiency > 1.0)
        throw ConfigError("detector.efficiency must lie in (0, 1]");
    if (dark_count_prob_per_slot < 0.0 || dark_count_prob_per_slot >= 1.0)
        throw ConfigError("detector.dark_count_prob_per_slot must lie in [0, 1)");
    if (error_prob < 0.0 || error_prob >= 0.5)
        throw ConfigError("detector.error_prob must lie in [0, 0.5)");
}

void LinkConfig::validate() const {
    detector.validate();
    if (!(slot_rate_hz > 0.0))
        throw ConfigError("link.slot_rate_hz must be > 0");
    if (eve_resend_mu < 0.0)
        throw ConfigError("link.eve_resend_mu must be >= 0");
}

double click_probability(double mu, double eta_total, const DetectorModel& det) {
    det.validate();
    if (mu < 0.0)
        throw DomainError("click_probability: mu must be >= 0");
    if (!(eta_total > 0.0) || eta_total > 1.0)
        throw DomainError("click_probability: eta_total must lie in (0, 1]");
    return 1.0 - (1.0 - det.dark_count_prob_per_slot) *
                     std::exp(-mu * eta_total * det.efficiency);
}

PulseFrame intercept_resend(const PulseFrame& frame, std::uint64_t seed, double resend_mu) {
    if (frame.role != FrameRole::quantum)
        return frame;
    Rng rng(derive_seed(seed, "eve", frame.slot));
    PulseFrame out = frame;
    std::uint8_t eve_basis = static_cast<std::uint8_t>(rng.uniform_int(2));
    std::uint8_t eve_bit =
        (eve_basis == frame.basis) ? frame.bit : static_cast<std::uint8_t>(rng.uniform_int(2));
    out.basis = eve_basis;
    out.bit = eve_bit;
    out.mean_photon_number = resend_mu;
    out.phase_rad = bb84_phase(eve_basis, eve_bit);
    return out;
}

namespace {
std::size_t series_index(std::uint64_t slot, double slot_rate_hz,
                         const TransmittanceSeries& series) {
    double t = static_cast<double>(slot) / slot_rate_hz;
    return static_cast<std::size_t>(t * series.rate_hz);
}
} // namespace

double PhotonTally::gain(IntensityClass c) const {
    const auto& t = for_class(c);
    return t.sent ? static_cast<double>(t.clicked) / static_cast<double>(t.sent) : 0.0;
}

double PhotonTally::qber(IntensityClass c) const {
    const auto& t = for_class(c);
    return t.sifted ? static_cast<double>(t.errors) / static_cast<double>(t.sifted) : 0.0;
}

double PhotonTally::true_single_photon_yield() const {
    std::uint64_t sent = 0, clicked = 0;
    for (const auto& t : per_class) {
        sent += t.sent_n[1];
        clicked += t.clicked_n[1];
    }
    return sent ? static_cast<double>(clicked) / static_cast<double>(sent) : 0.0;
}

double PhotonTally::true_single_photon_error() const {
    std::uint64_t sifted = 0, errors = 0;
    for (const auto& t : per_class) {
        sifted += t.sifted_n[1];
        errors += t.error_n[1];
    }
    return sifted ? static_cast<double>(errors) / static_cast<double>(sifted) : 0.0;
}

LinkResult transmit_and_detect(const std::vector<PulseFrame>& frames,
                               const TransmittanceSeries& eta_series,
                               const TransmittanceSeries& coupling_series,
                               const LinkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (!frames.empty()) {
        std::uint64_t last_slot = frames.back().slot;
        if (series_index(last_slot, cfg.slot_rate_hz, eta_series) >= eta_series.samples.size() ||
            series_index(last_slot, cfg.slot_rate_hz, coupling_series) >=
                coupling_series.samples.size())
            throw ConfigError("transmit_and_detect: transmittance series shorter than the "
                              "frame block");
    }

    LinkResult result;
    result.records.reserve(frames.size());

    for (const PulseFrame& sent : frames) {
        if (sent.role != FrameRole::quantum)
            continue; // bright reference pulses feed tracking, not the QKD detectors

        Rng rng(derive_seed(seed, "slot", sent.slot));

        PulseFrame arriving = sent;
        if (cfg.eavesdropper == EavesdropperModel::intercept_resend)
            arriving = intercept_resend(sent, seed, cfg.eve_resend_mu);

        double eta_ch = eta_series.samples[series_index(sent.slot, cfg.slot_rate_hz, eta_series)];
        double eta_cp =
            coupling_series.samples[series_index(sent.slot, cfg.slot_rate_hz, coupling_series)];
        double eta_total = eta_ch * eta_cp;
        if (eta_total > 1.0) eta_total = 1.0;
        if (eta_total < 0.0) eta_total = 0.0;

        // Physical sampling: Poisson photon number, per-photon survival.
        // P(no signal click) = exp(-mu * eta * efficiency) matches
        // click_probability exactly.
        int n_sent = rng.poisson(arriving.mean_photon_number);
        double p_survive = eta_total * cfg.detector.efficiency;
        int n_arrived = 0;
        for (int p = 0; p < n_sent; ++p)
            if (rng.bernoulli(p_survive)) ++n_arrived;

        std::uint8_t bob_basis = static_cast<std::uint8_t>(rng.uniform_int(2));

        DetectionRecord rec;
        rec.slot = sent.slot;
        rec.bob_basis = bob_basis;

        bool signal_click = n_arrived >= 1;
        std::uint8_t measured_bit = 0;
        if (signal_click) {
            if (bob_basis == arriving.basis) {
                measured_bit = arriving.bit;
                if (cfg.detector.error_prob > 0.0 && rng.bernoulli(cfg.detector.error_prob))
                    measured_bit ^= 1u;
            } else {
                measured_bit = static_cast<std::uint8_t>(rng.uniform_int(2));
            }
        }

        bool dark = cfg.detector.dark_count_prob_per_slot > 0.0 &&
                    rng.bernoulli(cfg.detector.dark_count_prob_per_slot);
        std::uint8_t dark_branch = 0;
        if (dark) dark_branch = static_cast<std::uint8_t>(rng.uniform_int(2));

        if (signal_click && dark && dark_branch != measured_bit) {
            rec.outcome = DetectionOutcome::double_click;
            rec.bit = static_cast<std::uint8_t>(rng.uniform_int(2)); // squashing rule
        } else if (signal_click) {
            rec.outcome = DetectionOutcome::click;
            rec.bit = measured_bit;
        } else if (dark) {
            rec.outcome = DetectionOutcome::click;
            rec.bit = dark_branch;
        } else {
            rec.outcome = DetectionOutcome::no_click;
        }
        result.records.push_back(rec);

        // Ground-truth tally indexed by what Alice actually emitted.
        auto& tally = result.tally.per_class[static_cast<int>(sent.intensity)];
        int bin = n_sent > PhotonTally::kMaxPhotons ? PhotonTally::kMaxPhotons : n_sent;
        tally.sent += 1;
        tally.sent_n[bin] += 1;
        if (rec.outcome != DetectionOutcome::no_click) {
            tally.clicked += 1;
            tally.clicked_n[bin] += 1;
            if (bob_basis == sent.basis) {
                tally.sifted += 1;
                tally.sifted_n[bin] += 1;
                if (rec.bit != sent.bit) {
                    tally.errors += 1;
                    tally.error_n[bin] += 1;
                }
            }
        }
    }
    return result;
}

void write_records_csv(std::ostream& out, const std::vector<DetectionRecord>& records) {
    out << "slot,bob_basis,outcome,bit\n";
    for (const auto& r : records) {
        const char* outcome = r.outcome == DetectionOutcome::no_click ? "no_click"
                              : r.outcome == DetectionOutcome::click  ? "click"
                                                                      : "double_click";
        out << r.slot << ',' << static_cast<int>(r.bob_basis) << ',' << outcome << ',';
        if (r.outcome == DetectionOutcome::no_click)
            out << '-';
        else
            out << static_cast<int>(r.bit);
        out << '\n';
    }
}

} // namespace skylink
