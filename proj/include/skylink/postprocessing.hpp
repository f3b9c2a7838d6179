// Classical BB84 post-processing: sifting, sampled QBER estimation, Cascade
// reconciliation with exact leakage accounting, Toeplitz privacy
// amplification, vacuum+weak decoy bounds, the secret-key-length formula,
// and authentication of the classical channel from pre-shared randomness.

#ifndef SKYLINK_POSTPROCESSING_HPP
#define SKYLINK_POSTPROCESSING_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "skylink/quantum_link.hpp"
#include "skylink/transmitter.hpp"

namespace skylink {

enum class KeyStage : std::uint8_t { raw, sifted, corrected, final_key };

struct KeyMaterial {
    std::vector<std::uint8_t> bits; // one 0/1 value per entry
    KeyStage stage = KeyStage::raw;
    std::uint64_t leakage_bits = 0;
    std::vector<std::uint64_t> source_slots; // empty at the final stage

    std::size_t size() const { return bits.size(); }
};

// Keeps clicked, basis-matched, quantum, signal-class slots. Outputs carry
// identical slot lists; records must be aligned to frames by slot.
struct SiftResult {
    KeyMaterial alice;
    KeyMaterial bob;
};
SiftResult sift(const std::vector<PulseFrame>& alice_frames,
                const std::vector<DetectionRecord>& bob_records);

// Discloses a seeded random sample of both keys, removes it, and estimates
// the error rate. Sampled bits count as leakage on both keys.
struct QberEstimate {
    double qber = 0.0;
    std::size_t sample_size = 0;
    std::size_t mismatches = 0;
    KeyMaterial alice_remaining;
    KeyMaterial bob_remaining;
};
QberEstimate estimate_qber(const KeyMaterial& alice, const KeyMaterial& bob,
                           double sample_fraction, std::uint64_t seed);

// Interactive Cascade: block parities, binary search on odd blocks, and
// back-tracking across passes. Corrects Bob's key toward Alice's.
// leakage_bits counts every disclosed parity plus the 64-bit verification
// hash. Throws ReconciliationError if the keys still differ after all
// passes.
struct CascadeResult {
    KeyMaterial corrected_bob;
    std::uint64_t leakage_bits = 0; // parities + verification hash
    std::uint64_t corrected_errors = 0;
    int passes = 0;
};
CascadeResult cascade_correct(const KeyMaterial& alice, const KeyMaterial& bob, double qber,
                              int passes, std::uint64_t seed);

// Disclosed 64-bit polynomial verification hash used by cascade_correct.
std::uint64_t key_verification_hash(const std::vector<std::uint8_t>& bits);

// Privacy amplification: out = T x over GF(2) with T a Toeplitz matrix
// whose diagonals come from the seeded generator. Output stage is
// final_key with slots dropped.
KeyMaterial toeplitz_pa(const KeyMaterial& key, std::uint64_t seed, std::size_t out_len);

// Vacuum+weak decoy bounds on the single-photon yield and error rate.
// Requires gains and QBERs for all three intensity classes and mu_v = 0.
struct DecoyBounds {
    double y1_lower = 0.0;
    double e1_upper = 1.0;
    bool statistics_warning = false; // bound went negative beyond tolerance
};
DecoyBounds decoy_bounds(const std::map<IntensityClass, double>& gains,
                         const std::map<IntensityClass, double>& qbers,
                         const ProtocolParams& params);

double binary_entropy(double p);

// Simplified asymptotic rates used for threshold analysis.
double ideal_bb84_rate(double qber);                       // 1 - 2 h2(Q)
double rate_with_ec_efficiency(double qber, double f_ec);  // 1 - (1 + f) h2(Q)

// Asymptotic decoy-state key length. Estimates the single-photon fraction
// of the sifted key from the bounds and signal gain, subtracts one-way
// leakage and the margin, and clamps at zero. Aborts (returns 0) at or
// above the QBER abort threshold.
constexpr double kQberAbortThreshold = 0.12;
std::int64_t secret_key_length(std::int64_t n_sifted, double qber,
                               std::uint64_t leakage_bits, const DecoyBounds& bounds,
                               const std::map<IntensityClass, double>& gains,
                               const ProtocolParams& params,
                               std::uint64_t margin_bits = 0);

// Pre-shared randomness pool with a forward-only cursor; authentication
// never reuses mask bytes and throws KeyDepletionError when exhausted.
class SharedSecret {
public:
    explicit SharedSecret(std::vector<std::uint8_t> bytes);
    static SharedSecret from_seed(std::uint64_t seed, std::size_t pool_bytes);

    std::size_t remaining() const { return bytes_.size() - cursor_; }
    std::uint64_t take_u64(); // consumes 8 bytes

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t cursor_ = 0;
};

// Polynomial-evaluation universal hash over GF(2^61 - 1), masked by a
// one-time value from the shared secret. Every message consumes a fresh
// evaluation point and mask (16 bytes), never reused.
struct AuthTag {
    std::uint64_t value = 0;
};
AuthTag authenticate(const std::vector<std::uint8_t>& message, SharedSecret& secret);
bool verify(const std::vector<std::uint8_t>& message, AuthTag tag, SharedSecret& secret);

// Classical-channel transcript: every message is authenticated against the
// receiver's replica of the pre-shared secret and logged with its leakage
// contribution.
struct TranscriptEntry {
    std::string direction; // "alice->bob" | "bob->alice"
    std::string type;
    std::size_t payload_bytes = 0;
    std::uint64_t leakage_delta = 0;
    std::uint64_t auth_tag = 0;
};

class Transcript {
public:
    Transcript(std::uint64_t auth_seed, std::size_t pool_bytes);

    void record(const std::string& direction, const std::string& type,
                const std::vector<std::uint8_t>& payload, std::uint64_t leakage_delta);
    const std::vector<TranscriptEntry>& entries() const { return entries_; }
    std::uint64_t total_leakage() const;
    bool all_verified() const { return all_verified_; }

    // Line-delimited JSON: {direction, type, payload_size, leakage_delta, tag}.
    void write_jsonl(std::ostream& out) const;

private:
    SharedSecret sender_pool_;
    SharedSecret receiver_pool_;
    std::vector<TranscriptEntry> entries_;
    bool all_verified_ = true;
};

// Key-store file: magic "SKYK", version u32, session id u64, key length in
// bits u64, packed key bytes (LSB first), master seed u64, QBER f64,
// leakage u64. All little-endian.
struct KeyStoreRecord {
    std::uint64_t session_id = 0;
    std::uint64_t master_seed = 0;
    double qber = 0.0;
    std::uint64_t leakage_bits = 0;
    std::vector<std::uint8_t> key_bits;
};
void write_key_store(std::ostream& out, const KeyStoreRecord& record);
KeyStoreRecord read_key_store(std::istream& in);

} // namespace skylink

#endif
