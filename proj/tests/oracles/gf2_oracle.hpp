// Textbook dense GF(2) matrix-vector product, the reference for the
// bit-packed Toeplitz hashing in the main code path.

#ifndef SKYLINK_TESTS_GF2_ORACLE_HPP
#define SKYLINK_TESTS_GF2_ORACLE_HPP

#include <cstdint>
#include <vector>

namespace oracles {

// matrix is rows x cols, row-major, one byte per entry (0/1).
std::vector<std::uint8_t> dense_gf2_mul(const std::vector<std::uint8_t>& matrix,
                                        std::size_t rows, std::size_t cols,
                                        const std::vector<std::uint8_t>& vec);

// Dense Toeplitz matrix from its first column (length rows) and first row
// (length cols); entry (i, j) = col[i - j] for i >= j else row[j - i].
std::vector<std::uint8_t> toeplitz_matrix(const std::vector<std::uint8_t>& first_col,
                                          const std::vector<std::uint8_t>& first_row);

} // namespace oracles

#endif
