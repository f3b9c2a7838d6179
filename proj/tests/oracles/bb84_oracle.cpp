#include "bb84_oracle.hpp"

#include <utility>
#include <vector>

namespace oracles {

namespace {
// Measurement of state (basis, bit) in meas_basis: list of (outcome bit,
// integer weight) with total weight 2, so probabilities stay rational.
std::vector<std::pair<int, int>> measure(int state_basis, int state_bit, int meas_basis) {
    if (meas_basis == state_basis) return {{state_bit, 2}};
    return {{0, 1}, {1, 1}};
}
} // namespace

Bb84Enumeration enumerate_bb84(bool eve_present) {
    long long sifted = 0, errors = 0, total = 0;

    for (int alice_basis = 0; alice_basis < 2; ++alice_basis) {
        for (int alice_bit = 0; alice_bit < 2; ++alice_bit) {
            for (int bob_basis = 0; bob_basis < 2; ++bob_basis) {
                if (eve_present) {
                    for (int eve_basis = 0; eve_basis < 2; ++eve_basis) {
                        for (auto [eve_bit, we] : measure(alice_basis, alice_bit, eve_basis)) {
                            // Eve resends the eigenstate she observed.
                            for (auto [bob_bit, wb] : measure(eve_basis, eve_bit, bob_basis)) {
                                int w = we * wb;
                                total += w;
                                if (bob_basis != alice_basis) continue;
                                sifted += w;
                                if (bob_bit != alice_bit) errors += w;
                            }
                        }
                    }
                } else {
                    for (auto [bob_bit, wb] : measure(alice_basis, alice_bit, bob_basis)) {
                        total += wb;
                        if (bob_basis != alice_basis) continue;
                        sifted += wb;
                        if (bob_bit != alice_bit) errors += wb;
                    }
                }
            }
        }
    }

    Bb84Enumeration r;
    r.sift_fraction = static_cast<double>(sifted) / static_cast<double>(total);
    r.qber = sifted ? static_cast<double>(errors) / static_cast<double>(sifted) : 0.0;
    return r;
}

} // namespace oracles
