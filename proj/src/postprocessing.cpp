#include "skylink/postprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "skylink/errors.hpp"
#include "skylink/rng.hpp"

namespace skylink {

namespace {
constexpr std::uint64_t kMersenne61 = (1ull << 61) - 1;

std::uint64_t mod_p(std::uint64_t x) {
    std::uint64_t r = (x & kMersenne61) + (x >> 61);
    return r >= kMersenne61 ? r - kMersenne61 : r;
}

std::uint64_t mulmod_p(std::uint64_t a, std::uint64_t b) {
    __uint128_t prod = static_cast<__uint128_t>(a) * b;
    std::uint64_t lo = static_cast<std::uint64_t>(prod & kMersenne61);
    std::uint64_t hi = static_cast<std::uint64_t>(prod >> 61);
    std::uint64_t r = lo + hi;
    return r >= kMersenne61 ? r - kMersenne61 : r;
}

// Horner evaluation of the 56-bit-limb polynomial hash at point r.
std::uint64_t poly_hash(const std::vector<std::uint8_t>& bytes, std::uint64_t r) {
    std::uint64_t h = 0;
    std::uint64_t limb = 0;
    int limb_bytes = 0;
    for (std::uint8_t b : bytes) {
        limb |= static_cast<std::uint64_t>(b) << (8 * limb_bytes);
        if (++limb_bytes == 7) {
            h = mod_p(mulmod_p(h, r) + limb);
            limb = 0;
            limb_bytes = 0;
        }
    }
    if (limb_bytes > 0) h = mod_p(mulmod_p(h, r) + limb);
    h = mod_p(mulmod_p(h, r) + bytes.size());
    return h;
}
} // namespace

SiftResult sift(const std::vector<PulseFrame>& alice_frames,
                const std::vector<DetectionRecord>& bob_records) {
    SiftResult out;
    out.alice.stage = KeyStage::sifted;
    out.bob.stage = KeyStage::sifted;

    // Records exist only for quantum frames, in slot order.
    std::size_t r = 0;
    for (const PulseFrame& frame : alice_frames) {
        if (frame.role != FrameRole::quantum)
            continue;
        if (r >= bob_records.size())
            throw AlignmentError("sift: fewer records than quantum frames");
        const DetectionRecord& rec = bob_records[r++];
        if (rec.slot != frame.slot)
            throw AlignmentError("sift: record slot " + std::to_string(rec.slot) +
                                 " does not match frame slot " + std::to_string(frame.slot));
        if (frame.intensity != IntensityClass::signal)
            continue;
        if (rec.outcome == DetectionOutcome::no_click)
            continue;
        if (rec.bob_basis != frame.basis)
            continue;
        out.alice.bits.push_back(frame.bit);
        out.bob.bits.push_back(rec.bit);
        out.alice.source_slots.push_back(frame.slot);
        out.bob.source_slots.push_back(frame.slot);
    }
    if (r != bob_records.size())
        throw AlignmentError("sift: more records than quantum frames");
    return out;
}

QberEstimate estimate_qber(const KeyMaterial& alice, const KeyMaterial& bob,
                           double sample_fraction, std::uint64_t seed) {
    if (alice.size() != bob.size())
        throw AlignmentError("estimate_qber: key lengths differ");
    const std::size_t n = alice.size();
    if (n < 100)
        throw DomainError("estimate_qber: need at least 100 sifted bits");
    if (!(sample_fraction > 0.0) || sample_fraction >= 1.0)
        throw ConfigError("estimate_qber: sample_fraction must lie in (0, 1)");

    auto m = static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(n)));
    if (m < 50)
        throw DomainError("estimate_qber: sample smaller than 50 bits");

    // Seeded partial Fisher-Yates pick of m disclosure positions.
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    Rng rng(derive_seed(seed, "qber_sample"));
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<std::uint8_t> sampled(n, 0);
    for (std::size_t i = 0; i < m; ++i) sampled[idx[i]] = 1;

    QberEstimate est;
    est.sample_size = m;
    est.alice_remaining.stage = KeyStage::sifted;
    est.bob_remaining.stage = KeyStage::sifted;
    est.alice_remaining.leakage_bits = alice.leakage_bits + m;
    est.bob_remaining.leakage_bits = bob.leakage_bits + m;
    for (std::size_t i = 0; i < n; ++i) {
        if (sampled[i]) {
            if (alice.bits[i] != bob.bits[i]) ++est.mismatches;
        } else {
            est.alice_remaining.bits.push_back(alice.bits[i]);
            est.bob_remaining.bits.push_back(bob.bits[i]);
            if (i < alice.source_slots.size())
                est.alice_remaining.source_slots.push_back(alice.source_slots[i]);
            if (i < bob.source_slots.size())
                est.bob_remaining.source_slots.push_back(bob.source_slots[i]);
        }
    }
    est.qber = static_cast<double>(est.mismatches) / static_cast<double>(m);
    return est;
}

std::uint64_t key_verification_hash(const std::vector<std::uint8_t>& bits) {
    // Fixed evaluation point; packs bits into bytes first.
    std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return poly_hash(bytes, mod_p(0x9E3779B97F4A7C15ull));
}

KeyMaterial toeplitz_pa(const KeyMaterial& key, std::uint64_t seed, std::size_t out_len) {
    const std::size_t n = key.size();
    if (out_len > n)
        throw DomainError("toeplitz_pa: output longer than input key");

    KeyMaterial out;
    out.stage = KeyStage::final_key;
    out.leakage_bits = key.leakage_bits;
    if (out_len == 0) return out;

    // Diagonal bits d[0 .. m+n-2]; entry (i, j) = d[i - j + n - 1]. Row i is
    // then a contiguous slice of the reversed diagonal word array starting
    // at bit (m - 1 - i).
    const std::size_t m = out_len;
    const std::size_t diag_bits = m + n - 1;
    const std::size_t diag_words = (diag_bits + 63) / 64;
    Rng rng(derive_seed(seed, "toeplitz"));
    std::vector<std::uint64_t> diag(diag_words);
    for (auto& w : diag) w = rng.next_u64();

    auto diag_bit = [&](std::size_t k) -> std::uint64_t {
        return (diag[k / 64] >> (k % 64)) & 1u;
    };
    const std::size_t rev_words = diag_words + 1;
    std::vector<std::uint64_t> rev(rev_words, 0);
    for (std::size_t k = 0; k < diag_bits; ++k) {
        std::size_t t = diag_bits - 1 - k;
        if (diag_bit(k)) rev[t / 64] |= 1ull << (t % 64);
    }

    const std::size_t key_words = (n + 63) / 64;
    std::vector<std::uint64_t> kw(key_words, 0);
    for (std::size_t j = 0; j < n; ++j)
        if (key.bits[j]) kw[j / 64] |= 1ull << (j % 64);

    out.bits.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t start = m - 1 - i;
        const std::size_t sw = start / 64;
        const unsigned sb = start % 64;
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < key_words; ++w) {
            std::uint64_t chunk = rev[sw + w] >> sb;
            if (sb != 0 && sw + w + 1 < rev_words) chunk |= rev[sw + w + 1] << (64 - sb);
            if (w == key_words - 1 && n % 64 != 0) chunk &= (1ull << (n % 64)) - 1;
            acc ^= chunk & kw[w];
        }
        out.bits[i] = static_cast<std::uint8_t>(__builtin_popcountll(acc) & 1);
    }
    return out;
}

DecoyBounds decoy_bounds(const std::map<IntensityClass, double>& gains,
                         const std::map<IntensityClass, double>& qbers,
                         const ProtocolParams& params) {
    for (auto c : {IntensityClass::signal, IntensityClass::decoy, IntensityClass::vacuum}) {
        if (!gains.count(c) || !qbers.count(c))
            throw ConfigError(std::string("decoy_bounds: missing statistics for class ") +
                              to_string(c));
    }
    if (params.mu_vacuum != 0.0)
        throw ConfigError("decoy_bounds: vacuum+weak analysis requires mu_v = 0");
    const double mu = params.mu_signal;
    const double nu = params.mu_decoy;

    const double q_mu = gains.at(IntensityClass::signal);
    const double q_nu = gains.at(IntensityClass::decoy);
    const double e_nu = qbers.at(IntensityClass::decoy);
    const double y0 = std::clamp(gains.at(IntensityClass::vacuum), 0.0, 1.0);

    DecoyBounds out;
    double y1 = mu / (mu * nu - nu * nu) *
                (q_nu * std::exp(nu) - q_mu * std::exp(mu) * (nu * nu) / (mu * mu) -
                 (mu * mu - nu * nu) / (mu * mu) * y0);
    if (y1 < -1e-6) out.statistics_warning = true;
    out.y1_lower = std::clamp(y1, 0.0, 1.0);

    if (out.y1_lower <= 0.0) {
        out.e1_upper = 1.0; // no single-photon yield bound: assume the worst
        return out;
    }
    double e1 = (e_nu * q_nu * std::exp(nu) - 0.5 * y0) / (out.y1_lower * nu);
    if (e1 < -1e-6) out.statistics_warning = true;
    out.e1_upper = std::clamp(e1, 0.0, 1.0);
    return out;
}

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double ideal_bb84_rate(double qber) { return 1.0 - 2.0 * binary_entropy(qber); }

double rate_with_ec_efficiency(double qber, double f_ec) {
    return 1.0 - (1.0 + f_ec) * binary_entropy(qber);
}

std::int64_t secret_key_length(std::int64_t n_sifted, double qber,
                               std::uint64_t leakage_bits, const DecoyBounds& bounds,
                               const std::map<IntensityClass, double>& gains,
                               const ProtocolParams& params, std::uint64_t margin_bits) {
    if (n_sifted <= 0) return 0;
    if (qber >= kQberAbortThreshold) return 0;
    if (bounds.e1_upper >= 0.5) return 0;

    const double q_mu = gains.at(IntensityClass::signal);
    if (q_mu <= 0.0) return 0;

    // Single-photon fraction of the sifted signal key under the yield bound.
    const double mu = params.mu_signal;
    const double p1 = mu * std::exp(-mu);
    double single_fraction = bounds.y1_lower * p1 / q_mu;
    if (single_fraction > 1.0) single_fraction = 1.0;

    double n_single = static_cast<double>(n_sifted) * single_fraction;
    double length = n_single * (1.0 - binary_entropy(bounds.e1_upper)) -
                    static_cast<double>(leakage_bits) - static_cast<double>(margin_bits);
    if (length <= 0.0) return 0;
    return static_cast<std::int64_t>(std::floor(length));
}

SharedSecret::SharedSecret(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

SharedSecret SharedSecret::from_seed(std::uint64_t seed, std::size_t pool_bytes) {
    Rng rng(derive_seed(seed, "preshared_pool"));
    std::vector<std::uint8_t> bytes(pool_bytes);
    for (std::size_t i = 0; i < pool_bytes; i += 8) {
        std::uint64_t w = rng.next_u64();
        for (std::size_t b = 0; b < 8 && i + b < pool_bytes; ++b)
            bytes[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
    }
    return SharedSecret(std::move(bytes));
}

std::uint64_t SharedSecret::take_u64() {
    if (cursor_ + 8 > bytes_.size())
        throw KeyDepletionError("shared secret exhausted: refuse to reuse mask bits");
    std::uint64_t w = 0;
    for (int b = 0; b < 8; ++b)
        w |= static_cast<std::uint64_t>(bytes_[cursor_ + b]) << (8 * b);
    cursor_ += 8;
    return w;
}

namespace {
// Fresh evaluation point per message, drawn like the mask from the shared
// pool; both parties consume identically.
std::uint64_t eval_point(SharedSecret& secret) {
    return 2 + mod_p(secret.take_u64()) % (kMersenne61 - 2);
}
} // namespace

AuthTag authenticate(const std::vector<std::uint8_t>& message, SharedSecret& secret) {
    std::uint64_t r = eval_point(secret);
    std::uint64_t mask = mod_p(secret.take_u64());
    return AuthTag{mod_p(poly_hash(message, r) + mask)};
}

bool verify(const std::vector<std::uint8_t>& message, AuthTag tag, SharedSecret& secret) {
    return authenticate(message, secret).value == tag.value;
}

Transcript::Transcript(std::uint64_t auth_seed, std::size_t pool_bytes)
    : sender_pool_(SharedSecret::from_seed(auth_seed, pool_bytes)),
      receiver_pool_(SharedSecret::from_seed(auth_seed, pool_bytes)) {}

void Transcript::record(const std::string& direction, const std::string& type,
                        const std::vector<std::uint8_t>& payload,
                        std::uint64_t leakage_delta) {
    AuthTag tag = authenticate(payload, sender_pool_);
    if (!verify(payload, tag, receiver_pool_)) all_verified_ = false;
    entries_.push_back({direction, type, payload.size(), leakage_delta, tag.value});
}

std::uint64_t Transcript::total_leakage() const {
    std::uint64_t total = 0;
    for (const auto& e : entries_) total += e.leakage_delta;
    return total;
}

void Transcript::write_jsonl(std::ostream& out) const {
    for (const auto& e : entries_) {
        nlohmann::json j;
        j["direction"] = e.direction;
        j["type"] = e.type;
        j["payload_size"] = e.payload_bytes;
        j["leakage_delta"] = e.leakage_delta;
        j["tag"] = e.auth_tag;
        out << j.dump() << '\n';
    }
}

namespace {
template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
constexpr std::uint32_t kKeyStoreVersion = 1;
} // namespace

void write_key_store(std::ostream& out, const KeyStoreRecord& record) {
    out.write("SKYK", 4);
    put<std::uint32_t>(out, kKeyStoreVersion);
    put<std::uint64_t>(out, record.session_id);
    put<std::uint64_t>(out, record.key_bits.size());
    std::vector<std::uint8_t> packed((record.key_bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < record.key_bits.size(); ++i)
        if (record.key_bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
    put<std::uint64_t>(out, record.master_seed);
    put<double>(out, record.qber);
    put<std::uint64_t>(out, record.leakage_bits);
}

KeyStoreRecord read_key_store(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "SKYK")
        throw ConfigError("key store: bad magic");
    if (get<std::uint32_t>(in) != kKeyStoreVersion)
        throw ConfigError("key store: unsupported version");
    KeyStoreRecord rec;
    rec.session_id = get<std::uint64_t>(in);
    auto bit_count = get<std::uint64_t>(in);
    std::vector<std::uint8_t> packed((bit_count + 7) / 8);
    in.read(reinterpret_cast<char*>(packed.data()),
            static_cast<std::streamsize>(packed.size()));
    rec.key_bits.resize(bit_count);
    for (std::uint64_t i = 0; i < bit_count; ++i)
        rec.key_bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    rec.master_seed = get<std::uint64_t>(in);
    rec.qber = get<double>(in);
    rec.leakage_bits = get<std::uint64_t>(in);
    if (!in)
        throw ConfigError("key store: truncated record");
    return rec;
}

} // namespace skylink
