#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "gf2_oracle.hpp"
#include "skylink/errors.hpp"
#include "skylink/postprocessing.hpp"
#include "skylink/rng.hpp"

using namespace skylink;

namespace {
PulseFrame quantum_frame(std::uint64_t slot, int basis, int bit,
                         IntensityClass cls = IntensityClass::signal) {
    PulseFrame f;
    f.slot = slot;
    f.role = FrameRole::quantum;
    f.basis = static_cast<std::uint8_t>(basis);
    f.bit = static_cast<std::uint8_t>(bit);
    f.intensity = cls;
    f.mean_photon_number = cls == IntensityClass::vacuum ? 0.0 : 0.5;
    return f;
}

DetectionRecord record_for(std::uint64_t slot, int bob_basis, DetectionOutcome outcome,
                           int bit) {
    DetectionRecord r;
    r.slot = slot;
    r.bob_basis = static_cast<std::uint8_t>(bob_basis);
    r.outcome = outcome;
    r.bit = static_cast<std::uint8_t>(bit);
    return r;
}

KeyMaterial random_key(std::size_t n, std::uint64_t seed) {
    KeyMaterial k;
    k.stage = KeyStage::sifted;
    Rng rng(seed);
    k.bits.resize(n);
    k.source_slots.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        k.bits[i] = static_cast<std::uint8_t>(rng.uniform_int(2));
        k.source_slots[i] = i;
    }
    return k;
}

KeyMaterial flip_fraction(const KeyMaterial& key, double fraction, std::uint64_t seed) {
    KeyMaterial out = key;
    Rng rng(seed);
    for (auto& b : out.bits)
        if (rng.bernoulli(fraction)) b ^= 1u;
    return out;
}
} // namespace

TEST_CASE("sift: hand-built eight-slot fixture") {
    // Slot: basis match?, clicked?, class -> expected kept set {0, 5}.
    std::vector<PulseFrame> frames{
        quantum_frame(0, 0, 1),                          // match, click -> keep
        quantum_frame(1, 0, 0),                          // basis mismatch
        quantum_frame(2, 1, 1),                          // no click
        quantum_frame(3, 1, 0, IntensityClass::decoy),   // decoy class
        quantum_frame(4, 0, 1, IntensityClass::vacuum),  // vacuum class
        quantum_frame(5, 1, 1),                          // match, click -> keep
        quantum_frame(6, 0, 0),                          // no click
        quantum_frame(7, 1, 0),                          // basis mismatch
    };
    std::vector<DetectionRecord> records{
        record_for(0, 0, DetectionOutcome::click, 1),
        record_for(1, 1, DetectionOutcome::click, 0),
        record_for(2, 1, DetectionOutcome::no_click, 0),
        record_for(3, 1, DetectionOutcome::click, 0),
        record_for(4, 0, DetectionOutcome::click, 1),
        record_for(5, 1, DetectionOutcome::double_click, 1),
        record_for(6, 0, DetectionOutcome::no_click, 0),
        record_for(7, 0, DetectionOutcome::click, 0),
    };
    auto sifted = sift(frames, records);
    REQUIRE(sifted.alice.size() == 2);
    CHECK(sifted.alice.source_slots == std::vector<std::uint64_t>{0, 5});
    CHECK(sifted.bob.source_slots == sifted.alice.source_slots);
    CHECK(sifted.alice.bits == std::vector<std::uint8_t>{1, 1});
    CHECK(sifted.bob.bits == std::vector<std::uint8_t>{1, 1});
    CHECK(sifted.alice.stage == KeyStage::sifted);
}

TEST_CASE("sift: keeps everything when all bases match and click") {
    std::vector<PulseFrame> frames;
    std::vector<DetectionRecord> records;
    for (std::uint64_t s = 0; s < 100; ++s) {
        frames.push_back(quantum_frame(s, static_cast<int>(s % 2), 1));
        records.push_back(record_for(s, static_cast<int>(s % 2), DetectionOutcome::click, 1));
    }
    auto sifted = sift(frames, records);
    CHECK(sifted.alice.size() == 100);
    CHECK(sifted.bob.size() == 100);
}

TEST_CASE("sift: uniform random bases keep half") {
    Rng rng(5);
    std::vector<PulseFrame> frames;
    std::vector<DetectionRecord> records;
    const std::size_t n = 1000000;
    for (std::uint64_t s = 0; s < n; ++s) {
        int ab = static_cast<int>(rng.uniform_int(2));
        int bb = static_cast<int>(rng.uniform_int(2));
        frames.push_back(quantum_frame(s, ab, 0));
        records.push_back(record_for(s, bb, DetectionOutcome::click, 0));
    }
    auto sifted = sift(frames, records);
    CHECK(static_cast<double>(sifted.alice.size()) / static_cast<double>(n) ==
          doctest::Approx(0.5).epsilon(0.004));
}

TEST_CASE("sift: misaligned slots raise an alignment error") {
    std::vector<PulseFrame> frames{quantum_frame(0, 0, 0), quantum_frame(1, 0, 0)};
    std::vector<DetectionRecord> records{
        record_for(0, 0, DetectionOutcome::click, 0),
        record_for(2, 0, DetectionOutcome::click, 0), // wrong slot
    };
    CHECK_THROWS_AS(sift(frames, records), AlignmentError);
}

TEST_CASE("estimate_qber: identical keys and exact leakage accounting") {
    auto alice = random_key(1000, 3);
    auto est = estimate_qber(alice, alice, 0.1, 17);
    CHECK(est.qber == 0.0);
    CHECK(est.sample_size == 100);
    CHECK(est.alice_remaining.size() == 900);
    CHECK(est.alice_remaining.leakage_bits == 100);
    CHECK(est.bob_remaining.leakage_bits == 100);
}

TEST_CASE("estimate_qber: adversarial fixture differing exactly in the sample") {
    auto alice = random_key(200, 9);
    // Learn the sampled set from the surviving slot list, then build a key
    // that differs exactly there.
    auto probe = estimate_qber(alice, alice, 0.5, 99);
    std::set<std::uint64_t> kept(probe.alice_remaining.source_slots.begin(),
                                 probe.alice_remaining.source_slots.end());
    auto bob = alice;
    for (std::size_t i = 0; i < bob.size(); ++i)
        if (!kept.count(alice.source_slots[i])) bob.bits[i] ^= 1u;

    auto est = estimate_qber(alice, bob, 0.5, 99);
    CHECK(est.qber == 1.0);
    CHECK(est.alice_remaining.bits == est.bob_remaining.bits);
}

TEST_CASE("estimate_qber: five percent errors estimated within three sigma") {
    auto alice = random_key(100000, 12);
    auto bob = flip_fraction(alice, 0.05, 13);
    auto est = estimate_qber(alice, bob, 0.1, 21);
    CHECK(est.sample_size == 10000);
    CHECK(est.qber == doctest::Approx(0.05).epsilon(0.14)); // +- 0.007 absolute
    CHECK(std::abs(est.qber - 0.05) < 0.007);

    auto tiny = random_key(120, 1);
    CHECK_THROWS_AS(estimate_qber(tiny, tiny, 0.1, 1), DomainError);
}

TEST_CASE("cascade: error-free keys disclose only the pass structure") {
    auto alice = random_key(1024, 31);
    auto result = cascade_correct(alice, alice, 0.05, 4, 7);
    CHECK(result.corrected_errors == 0);
    CHECK(result.corrected_bob.bits == alice.bits);
    // k1 = ceil(0.73/0.05) = 15; block counts 69 + 35 + 18 + 9, plus the
    // 64-bit verification hash.
    CHECK(result.leakage_bits == 69 + 35 + 18 + 9 + 64);
}

TEST_CASE("cascade: single flipped bit is bisected in pass one") {
    auto alice = random_key(1024, 32);
    auto bob = alice;
    bob.bits[371] ^= 1u;
    auto result = cascade_correct(alice, bob, 0.05, 4, 7);
    CHECK(result.corrected_errors == 1);
    CHECK(result.corrected_bob.bits == alice.bits);
    // One bisection of a 15-wide block costs ceil(log2(15)) = 4 parities.
    CHECK(result.leakage_bits == (69 + 35 + 18 + 9) + 4 + 64);
}

TEST_CASE("cascade: 5% errors corrected across seeds with bounded leakage") {
    const std::size_t n = 10000;
    const double h2 = binary_entropy(0.05);
    double leakage_sum = 0.0;
    const int runs = 20;
    for (int run = 0; run < runs; ++run) {
        auto alice = random_key(n, 100 + run);
        auto bob = flip_fraction(alice, 0.05, 200 + run);
        auto result = cascade_correct(alice, bob, 0.05, 4, 300 + run);
        CHECK(result.corrected_bob.bits == alice.bits); // direct comparison
        leakage_sum += static_cast<double>(result.leakage_bits);
    }
    CHECK(leakage_sum / runs <= 1.35 * n * h2);
}

TEST_CASE("cascade: unrecoverable keys abort with a reconciliation error") {
    KeyMaterial alice;
    alice.bits = {0, 0, 0, 0};
    KeyMaterial bob;
    bob.bits = {1, 1, 1, 1}; // even parity everywhere: invisible to parity checks
    CHECK_THROWS_AS(cascade_correct(alice, bob, 0.15, 2, 1), ReconciliationError);
}

TEST_CASE("toeplitz: zero key maps to zero") {
    KeyMaterial key;
    key.bits.assign(128, 0);
    auto out = toeplitz_pa(key, 5, 32);
    CHECK(out.stage == KeyStage::final_key);
    CHECK(out.source_slots.empty());
    for (auto b : out.bits) CHECK(b == 0);
}

TEST_CASE("toeplitz: GF(2) linearity") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        KeyMaterial x, y, xy;
        x.bits.resize(256);
        y.bits.resize(256);
        xy.bits.resize(256);
        for (std::size_t i = 0; i < 256; ++i) {
            x.bits[i] = static_cast<std::uint8_t>(rng.uniform_int(2));
            y.bits[i] = static_cast<std::uint8_t>(rng.uniform_int(2));
            xy.bits[i] = x.bits[i] ^ y.bits[i];
        }
        std::uint64_t seed = 40 + trial;
        auto tx = toeplitz_pa(x, seed, 64);
        auto ty = toeplitz_pa(y, seed, 64);
        auto txy = toeplitz_pa(xy, seed, 64);
        for (std::size_t i = 0; i < 64; ++i)
            CHECK(txy.bits[i] == (tx.bits[i] ^ ty.bits[i]));
    }
}

TEST_CASE("toeplitz: matches the dense GF(2) oracle on a 32x8 fixture") {
    const std::size_t n = 32, m = 8;
    KeyMaterial key = random_key(n, 77);
    const std::uint64_t seed = 1234;
    auto out = toeplitz_pa(key, seed, m);

    // Reproduce the diagonal bit stream the implementation documents:
    // d[k] from successive 64-bit words, LSB first; T(i,j) = d[i - j + n-1].
    Rng rng(derive_seed(seed, "toeplitz"));
    std::vector<std::uint8_t> d(m + n - 1);
    std::uint64_t word = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (k % 64 == 0) word = rng.next_u64();
        d[k] = static_cast<std::uint8_t>((word >> (k % 64)) & 1u);
    }
    std::vector<std::uint8_t> first_col(m), first_row(n);
    for (std::size_t i = 0; i < m; ++i) first_col[i] = d[i + n - 1];
    for (std::size_t j = 0; j < n; ++j) first_row[j] = d[n - 1 - j];
    auto dense = oracles::toeplitz_matrix(first_col, first_row);
    auto expect = oracles::dense_gf2_mul(dense, m, n, key.bits);
    CHECK(out.bits == expect);

    CHECK_THROWS_AS(toeplitz_pa(key, seed, n + 1), DomainError);
}

TEST_CASE("decoy bounds: ideal lossless channel") {
    ProtocolParams params;
    std::map<IntensityClass, double> gains{
        {IntensityClass::signal, 1.0 - std::exp(-0.5)},
        {IntensityClass::decoy, 1.0 - std::exp(-0.1)},
        {IntensityClass::vacuum, 0.0},
    };
    std::map<IntensityClass, double> qbers{
        {IntensityClass::signal, 0.0},
        {IntensityClass::decoy, 0.0},
        {IntensityClass::vacuum, 0.0},
    };
    auto bounds = decoy_bounds(gains, qbers, params);
    CHECK(bounds.y1_lower >= 0.99);
    CHECK(bounds.e1_upper <= 0.01);
    CHECK(!bounds.statistics_warning);
}

TEST_CASE("decoy bounds: missing class statistics rejected") {
    ProtocolParams params;
    std::map<IntensityClass, double> gains{{IntensityClass::signal, 0.1}};
    std::map<IntensityClass, double> qbers{{IntensityClass::signal, 0.0}};
    CHECK_THROWS_AS(decoy_bounds(gains, qbers, params), ConfigError);
}

TEST_CASE("binary entropy and simplified rates") {
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(0.05) == doctest::Approx(0.286397).epsilon(1e-5));

    // 1 - 2 h2(Q) crosses zero at Q = 0.110028 (bisection oracle).
    double lo = 0.05, hi = 0.2;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (ideal_bb84_rate(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(0.110).epsilon(0.01));
    CHECK(std::abs(0.5 * (lo + hi) - 0.110) < 0.001);

    CHECK(rate_with_ec_efficiency(0.05, 1.16) == doctest::Approx(0.3814).epsilon(1e-3));
}

TEST_CASE("secret key length: perfect single-photon regime and clamps") {
    ProtocolParams params;
    DecoyBounds perfect{1.0, 0.0, false};
    std::map<IntensityClass, double> gains{
        {IntensityClass::signal, params.mu_signal * std::exp(-params.mu_signal)},
        {IntensityClass::decoy, 0.0},
        {IntensityClass::vacuum, 0.0},
    };
    CHECK(secret_key_length(10000, 0.0, 0, perfect, gains, params) == 10000);

    // Monotone non-increasing in qber and leakage.
    DecoyBounds typical{0.9, 0.02, false};
    std::map<IntensityClass, double> g2{{IntensityClass::signal, 0.4},
                                        {IntensityClass::decoy, 0.09},
                                        {IntensityClass::vacuum, 0.0}};
    std::int64_t prev = secret_key_length(10000, 0.0, 0, typical, g2, params);
    for (double q : {0.02, 0.05, 0.08, 0.11, 0.12, 0.2}) {
        auto len = secret_key_length(10000, q, 0, typical, g2, params);
        CHECK(len <= prev);
        prev = len;
    }
    CHECK(secret_key_length(10000, 0.12, 0, typical, g2, params) == 0);
    CHECK(secret_key_length(10000, 0.3, 0, typical, g2, params) == 0);

    prev = secret_key_length(10000, 0.01, 0, typical, g2, params);
    for (std::uint64_t leak : {100ull, 1000ull, 5000ull, 100000ull}) {
        auto len = secret_key_length(10000, 0.01, leak, typical, g2, params);
        CHECK(len <= prev);
        prev = len;
    }

    DecoyBounds hopeless{0.9, 0.5, false};
    CHECK(secret_key_length(10000, 0.01, 0, hopeless, g2, params) == 0);
}

TEST_CASE("authentication: round trip, tamper detection, depletion") {
    auto alice_pool = SharedSecret::from_seed(99, 4096);
    auto bob_pool = SharedSecret::from_seed(99, 4096);

    std::vector<std::uint8_t> message{'k', 'e', 'y', ' ', 'b', 'l', 'o', 'c', 'k'};
    auto tag = authenticate(message, alice_pool);
    CHECK(verify(message, tag, bob_pool));

    auto tampered = message;
    tampered[3] ^= 0x01;
    auto tag2 = authenticate(message, alice_pool);
    CHECK(!verify(tampered, tag2, bob_pool));

    std::vector<std::uint8_t> empty;
    auto tag3 = authenticate(empty, alice_pool);
    CHECK(verify(empty, tag3, bob_pool));

    auto small = SharedSecret::from_seed(1, 16);
    std::vector<std::uint8_t> m{1, 2, 3};
    authenticate(m, small);
    CHECK_THROWS_AS(authenticate(m, small), KeyDepletionError);
}

TEST_CASE("authentication: every single-bit flip is caught") {
    Rng rng(1717);
    int trials = 0;
    for (int t = 0; t < 20000; ++t) {
        std::vector<std::uint8_t> message(24);
        for (auto& b : message) b = static_cast<std::uint8_t>(rng.uniform_int(256));
        auto a = SharedSecret::from_seed(5000 + t, 32);
        auto b = SharedSecret::from_seed(5000 + t, 32);
        auto tag = authenticate(message, a);
        auto tampered = message;
        std::size_t bit = static_cast<std::size_t>(rng.uniform_int(24 * 8));
        tampered[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        if (verify(tampered, tag, b)) ++trials;
    }
    CHECK(trials == 0);
}

TEST_CASE("transcript: leakage totals, verification, JSONL shape") {
    Transcript transcript(42, 4096);
    transcript.record("alice->bob", "basis_reveal", {1, 2, 3, 4}, 0);
    transcript.record("bob->alice", "sample_bits", {5, 6}, 16);
    transcript.record("alice->bob", "parities", {7}, 131);
    CHECK(transcript.total_leakage() == 147);
    CHECK(transcript.all_verified());

    std::ostringstream out;
    transcript.write_jsonl(out);
    std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.find("\"direction\":\"alice->bob\"") != std::string::npos);
    CHECK(text.find("\"leakage_delta\":131") != std::string::npos);
}

TEST_CASE("key store: binary round trip and deterministic bytes") {
    KeyStoreRecord rec;
    rec.session_id = 0xABCDEF;
    rec.master_seed = 42;
    rec.qber = 0.0123;
    rec.leakage_bits = 4567;
    Rng rng(3);
    rec.key_bits.resize(1001);
    for (auto& b : rec.key_bits) b = static_cast<std::uint8_t>(rng.uniform_int(2));

    std::stringstream buf1, buf2;
    write_key_store(buf1, rec);
    write_key_store(buf2, rec);
    CHECK(buf1.str() == buf2.str());

    auto back = read_key_store(buf1);
    CHECK(back.session_id == rec.session_id);
    CHECK(back.master_seed == rec.master_seed);
    CHECK(back.qber == rec.qber);
    CHECK(back.leakage_bits == rec.leakage_bits);
    CHECK(back.key_bits == rec.key_bits);

    std::stringstream bad("NOPE");
    CHECK_THROWS_AS(read_key_store(bad), ConfigError);
}
