#include <algorithm>
#include <cmath>
#include <numeric>

#include "skylink/errors.hpp"
#include "skylink/postprocessing.hpp"
#include "skylink/rng.hpp"

namespace skylink {

namespace {

// One Cascade pass: a permutation of key positions cut into equal blocks.
struct Pass {
    std::size_t block_size = 0;
    std::vector<std::uint32_t> perm;      // j -> key position
    std::vector<std::uint32_t> block_of;  // key position -> block index
    std::vector<std::uint8_t> mismatch;   // block parity differs from Alice's
    bool active = false;

    std::size_t block_count() const { return (perm.size() + block_size - 1) / block_size; }
    std::size_t block_begin(std::size_t b) const { return b * block_size; }
    std::size_t block_end(std::size_t b) const {
        return std::min(perm.size(), (b + 1) * block_size);
    }
};

struct Session {
    const std::vector<std::uint8_t>& alice;
    std::vector<std::uint8_t>& bob;
    std::vector<Pass>& passes;
    std::uint64_t disclosed = 0;
    std::uint64_t corrected = 0;

    std::uint8_t alice_parity(const Pass& p, std::size_t lo, std::size_t hi) {
        // Every parity Alice reveals costs one bit.
        ++disclosed;
        unsigned acc = 0;
        for (std::size_t j = lo; j < hi; ++j) acc ^= alice[p.perm[j]];
        return static_cast<std::uint8_t>(acc & 1u);
    }

    std::uint8_t bob_parity(const Pass& p, std::size_t lo, std::size_t hi) const {
        unsigned acc = 0;
        for (std::size_t j = lo; j < hi; ++j) acc ^= bob[p.perm[j]];
        return static_cast<std::uint8_t>(acc & 1u);
    }

    // Binary search inside block b of pass pi; corrects exactly one bit and
    // toggles the containing block's mismatch flag in every active pass.
    void bisect(std::size_t pi, std::size_t b) {
        Pass& p = passes[pi];
        std::size_t lo = p.block_begin(b), hi = p.block_end(b);
        while (hi - lo > 1) {
            std::size_t mid = lo + (hi - lo + 1) / 2;
            if (alice_parity(p, lo, mid) != bob_parity(p, lo, mid))
                hi = mid;
            else
                lo = mid;
        }
        std::uint32_t pos = p.perm[lo];
        bob[pos] ^= 1u;
        ++corrected;
        for (Pass& q : passes)
            if (q.active) q.mismatch[q.block_of[pos]] ^= 1u;
    }

    // Clear every mismatched block among active passes, smallest blocks
    // first (passes are ordered by increasing block size).
    void drain() {
        bool again = true;
        while (again) {
            again = false;
            for (std::size_t pi = 0; pi < passes.size() && !again; ++pi) {
                Pass& p = passes[pi];
                if (!p.active) continue;
                for (std::size_t b = 0; b < p.block_count(); ++b) {
                    if (!p.mismatch[b]) continue;
                    bisect(pi, b);
                    again = true;
                    break;
                }
            }
        }
    }
};

} // namespace

CascadeResult cascade_correct(const KeyMaterial& alice, const KeyMaterial& bob, double qber,
                              int pass_count, std::uint64_t seed) {
    if (alice.size() != bob.size())
        throw AlignmentError("cascade_correct: key lengths differ");
    const std::size_t n = alice.size();
    if (n < 2)
        throw DomainError("cascade_correct: key too short");
    if (!(qber > 0.0) || qber > 0.15)
        throw DomainError("cascade_correct: qber must lie in (0, 0.15]");
    if (pass_count < 2)
        throw ConfigError("cascade_correct: at least two passes required");

    CascadeResult result;
    result.corrected_bob = bob;
    result.corrected_bob.stage = KeyStage::corrected;
    result.passes = pass_count;

    std::vector<Pass> passes(static_cast<std::size_t>(pass_count));
    const std::size_t k1 =
        std::min<std::size_t>(n, std::max<std::size_t>(2, static_cast<std::size_t>(
                                                              std::ceil(0.73 / qber))));
    for (int p = 0; p < pass_count; ++p) {
        Pass& pass = passes[static_cast<std::size_t>(p)];
        pass.block_size = std::min<std::size_t>(n, k1 << p);
        pass.perm.resize(n);
        std::iota(pass.perm.begin(), pass.perm.end(), 0u);
        if (p > 0) {
            Rng rng(derive_seed(seed, "cascade_perm", static_cast<std::uint64_t>(p)));
            for (std::size_t i = n - 1; i > 0; --i) {
                std::size_t j = static_cast<std::size_t>(rng.uniform_int(i + 1));
                std::swap(pass.perm[i], pass.perm[j]);
            }
        }
        pass.block_of.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            pass.block_of[pass.perm[j]] = static_cast<std::uint32_t>(j / pass.block_size);
    }

    Session session{alice.bits, result.corrected_bob.bits, passes, 0, 0};
    for (auto& pass : passes) {
        // Top-level parity exchange for the newly active pass.
        pass.mismatch.assign(pass.block_count(), 0);
        pass.active = true;
        for (std::size_t b = 0; b < pass.block_count(); ++b) {
            std::uint8_t pa = session.alice_parity(pass, pass.block_begin(b), pass.block_end(b));
            std::uint8_t pb = session.bob_parity(pass, pass.block_begin(b), pass.block_end(b));
            pass.mismatch[b] = pa ^ pb;
        }
        session.drain();
    }

    result.leakage_bits = session.disclosed + 64; // plus the verification hash
    result.corrected_errors = session.corrected;
    result.corrected_bob.leakage_bits = bob.leakage_bits + result.leakage_bits;

    if (key_verification_hash(result.corrected_bob.bits) != key_verification_hash(alice.bits) ||
        result.corrected_bob.bits != alice.bits)
        throw ReconciliationError("cascade_correct: verification hash mismatch after " +
                                  std::to_string(pass_count) + " passes");
    return result;
}

} // namespace skylink
