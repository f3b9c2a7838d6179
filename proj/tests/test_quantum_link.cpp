#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bb84_oracle.hpp"
#include "skylink/errors.hpp"
#include "skylink/quantum_link.hpp"
#include "skylink/rng.hpp"

using namespace skylink;

namespace {
TransmittanceSeries constant_series(double value, double duration_s) {
    TransmittanceSeries s;
    s.rate_hz = 1.0;
    s.samples.assign(static_cast<std::size_t>(duration_s) + 2, value);
    s.mean_transmittance = value;
    return s;
}

std::vector<PulseFrame> random_signal_frames(std::size_t n, double mu, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PulseFrame> frames(n);
    for (std::size_t k = 0; k < n; ++k) {
        frames[k].slot = k;
        frames[k].role = FrameRole::quantum;
        frames[k].basis = static_cast<std::uint8_t>(rng.uniform_int(2));
        frames[k].bit = static_cast<std::uint8_t>(rng.uniform_int(2));
        frames[k].intensity = IntensityClass::signal;
        frames[k].mean_photon_number = mu;
        frames[k].phase_rad = bb84_phase(frames[k].basis, frames[k].bit);
    }
    return frames;
}
} // namespace

TEST_CASE("click_probability: closed form") {
    DetectorModel det;
    det.efficiency = 1.0;
    det.dark_count_prob_per_slot = 0.0;
    det.error_prob = 0.0;

    CHECK(click_probability(0.5, 1.0, det) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));

    det.dark_count_prob_per_slot = 1e-3;
    CHECK(click_probability(0.0, 1.0, det) == doctest::Approx(1e-3).epsilon(1e-12));

    // Monotone in mu and eta.
    double prev = 0.0;
    for (double mu = 0.0; mu <= 1.0; mu += 0.05) {
        double p = click_probability(mu, 0.5, det);
        CHECK(p >= prev);
        prev = p;
    }
    prev = 0.0;
    for (double eta = 0.05; eta <= 1.0; eta += 0.05) {
        double p = click_probability(0.5, eta, det);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("Monte-Carlo click rates match the closed form within 3 sigma") {
    struct Point {
        double mu, eta, eff, dark;
    };
    for (const Point& pt : {Point{0.5, 0.04, 0.2, 1e-6}, Point{0.1, 1.0, 1.0, 1e-3},
                            Point{0.8, 0.5, 0.9, 0.0}}) {
        LinkConfig cfg;
        cfg.detector.efficiency = pt.eff;
        cfg.detector.dark_count_prob_per_slot = pt.dark;
        cfg.detector.error_prob = 0.0;
        auto eta = constant_series(pt.eta, 16.0);
        auto coupling = constant_series(1.0, 16.0);

        // Ten chunks of 1e6 independent slots.
        auto frames = random_signal_frames(1000000, pt.mu, 5);
        std::uint64_t clicked = 0, total = 0;
        for (int chunk = 0; chunk < 10; ++chunk) {
            auto result = transmit_and_detect(frames, eta, coupling, cfg, 9000 + chunk);
            clicked += result.tally.for_class(IntensityClass::signal).clicked;
            total += result.tally.for_class(IntensityClass::signal).sent;
        }
        double p = click_probability(pt.mu, pt.eta, cfg.detector);
        double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(total));
        CHECK(std::abs(static_cast<double>(clicked) / static_cast<double>(total) - p) <
              3.0 * sigma);
    }
}

TEST_CASE("noiseless channel: losses cause erasures, never errors") {
    LinkConfig cfg;
    cfg.detector.efficiency = 1.0;
    cfg.detector.dark_count_prob_per_slot = 0.0;
    cfg.detector.error_prob = 0.0;
    auto frames = random_signal_frames(600000, 0.5, 77);
    auto result = transmit_and_detect(frames, constant_series(1.0, 2.0),
                                      constant_series(1.0, 2.0), cfg, 123);

    const auto& t = result.tally.for_class(IntensityClass::signal);
    CHECK(t.sifted > 100000);
    CHECK(t.errors == 0);

    // Same at heavy loss: erasures only.
    auto lossy = transmit_and_detect(frames, constant_series(0.01, 2.0),
                                     constant_series(0.5, 2.0), cfg, 124);
    CHECK(lossy.tally.for_class(IntensityClass::signal).errors == 0);
    CHECK(lossy.tally.for_class(IntensityClass::signal).clicked < t.clicked);
}

TEST_CASE("vacuum frames never click without dark counts") {
    LinkConfig cfg;
    cfg.detector.dark_count_prob_per_slot = 0.0;
    auto frames = random_signal_frames(50000, 0.0, 3);
    for (auto& f : frames) {
        f.intensity = IntensityClass::vacuum;
        f.mean_photon_number = 0.0;
    }
    auto result = transmit_and_detect(frames, constant_series(1.0, 1.0),
                                      constant_series(1.0, 1.0), cfg, 5);
    CHECK(result.tally.for_class(IntensityClass::vacuum).clicked == 0);
}

TEST_CASE("intercept-resend: eigenstate case and conjugate-basis uniformity") {
    Rng rng(1);
    std::size_t matched_same = 0, matched_total = 0;
    std::size_t mismatch_ones = 0, mismatch_total = 0;
    for (std::uint64_t k = 0; k < 1000000; ++k) {
        PulseFrame f;
        f.slot = k;
        f.role = FrameRole::quantum;
        f.basis = static_cast<std::uint8_t>(rng.uniform_int(2));
        f.bit = static_cast<std::uint8_t>(rng.uniform_int(2));
        auto out = intercept_resend(f, 33);
        if (out.basis == f.basis) {
            ++matched_total;
            if (out.bit == f.bit) ++matched_same;
        } else {
            ++mismatch_total;
            if (out.bit == 1) ++mismatch_ones;
        }
    }
    CHECK(matched_same == matched_total); // eigenstate preserved always
    CHECK(static_cast<double>(mismatch_ones) / static_cast<double>(mismatch_total) ==
          doctest::Approx(0.5).epsilon(0.004));

    PulseFrame ref;
    ref.role = FrameRole::reference;
    ref.mean_photon_number = 1000.0;
    auto through = intercept_resend(ref, 33);
    CHECK(through.mean_photon_number == 1000.0);
}

TEST_CASE("intercept-resend QBER matches the enumeration oracle") {
    auto oracle = oracles::enumerate_bb84(true);
    REQUIRE(oracle.qber == doctest::Approx(0.25));
    REQUIRE(oracle.sift_fraction == doctest::Approx(0.5));

    LinkConfig cfg;
    cfg.detector.efficiency = 1.0;
    cfg.detector.dark_count_prob_per_slot = 0.0;
    cfg.detector.error_prob = 0.0;
    cfg.eavesdropper = EavesdropperModel::intercept_resend;

    auto frames = random_signal_frames(900000, 0.5, 17);
    std::uint64_t sifted = 0, errors = 0, clicked = 0;
    for (int chunk = 0; chunk < 6; ++chunk) {
        auto result = transmit_and_detect(frames, constant_series(1.0, 2.0),
                                          constant_series(1.0, 2.0), cfg, 400 + chunk);
        const auto& t = result.tally.for_class(IntensityClass::signal);
        sifted += t.sifted;
        errors += t.errors;
        clicked += t.clicked;
    }
    REQUIRE(sifted >= 1000000);
    CHECK(static_cast<double>(errors) / static_cast<double>(sifted) ==
          doctest::Approx(oracle.qber).epsilon(0.04)); // 0.25 +- 0.01
    CHECK(static_cast<double>(sifted) / static_cast<double>(clicked) ==
          doctest::Approx(oracle.sift_fraction).epsilon(0.01));
}

TEST_CASE("slot outcomes are independent of other frames") {
    LinkConfig cfg;
    auto frames = random_signal_frames(200, 0.5, 2);
    auto eta = constant_series(0.8, 1.0);
    auto coupling = constant_series(0.9, 1.0);
    auto base = transmit_and_detect(frames, eta, coupling, cfg, 42);

    auto altered = frames;
    altered[50].bit ^= 1u;
    altered[50].basis ^= 1u;
    auto rerun = transmit_and_detect(altered, eta, coupling, cfg, 42);

    REQUIRE(base.records.size() == rerun.records.size());
    for (std::size_t k = 0; k < base.records.size(); ++k) {
        if (base.records[k].slot == 50) continue;
        CHECK(base.records[k].bob_basis == rerun.records[k].bob_basis);
        CHECK(base.records[k].outcome == rerun.records[k].outcome);
        CHECK(base.records[k].bit == rerun.records[k].bit);
    }
}

TEST_CASE("double clicks occur with dark counts and squash to uniform bits") {
    LinkConfig cfg;
    cfg.detector.efficiency = 1.0;
    cfg.detector.dark_count_prob_per_slot = 0.3;
    cfg.detector.error_prob = 0.0;
    auto frames = random_signal_frames(200000, 0.9, 11);
    auto result = transmit_and_detect(frames, constant_series(1.0, 1.0),
                                      constant_series(1.0, 1.0), cfg, 77);

    std::uint64_t doubles = 0, double_ones = 0;
    for (const auto& r : result.records) {
        if (r.outcome != DetectionOutcome::double_click) continue;
        ++doubles;
        double_ones += r.bit;
    }
    // signal_click * dark * opposite branch: ~ 0.59 * 0.3 * 0.5 of slots.
    CHECK(doubles > 10000);
    double frac = static_cast<double>(double_ones) / static_cast<double>(doubles);
    CHECK(frac == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("series shorter than the frame block is rejected") {
    LinkConfig cfg;
    auto frames = random_signal_frames(100, 0.5, 2);
    TransmittanceSeries too_short;
    too_short.rate_hz = 1e6;
    too_short.samples.assign(10, 1.0);
    CHECK_THROWS_AS(
        transmit_and_detect(frames, too_short, constant_series(1.0, 1.0), cfg, 1),
        ConfigError);
}

TEST_CASE("records CSV header and squashed bits") {
    LinkConfig cfg;
    auto frames = random_signal_frames(50, 0.5, 2);
    auto result = transmit_and_detect(frames, constant_series(1.0, 1.0),
                                      constant_series(1.0, 1.0), cfg, 3);
    std::ostringstream out;
    write_records_csv(out, result.records);
    CHECK(out.str().rfind("slot,bob_basis,outcome,bit\n", 0) == 0);
}
