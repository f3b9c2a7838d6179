// Zernike polynomials in Noll ordering, evaluated from per-mode radial
// coefficient tables. Modes are orthonormal over the unit disk with the
// sqrt(n+1) / sqrt(2(n+1)) convention.

#ifndef SKYLINK_ZERNIKE_HPP
#define SKYLINK_ZERNIKE_HPP

#include <vector>

namespace skylink {

struct NollMode {
    int n = 0;        // radial order
    int m_abs = 0;    // azimuthal order
    bool is_sin = false;
};

// Noll index -> (n, |m|, sin/cos). j = 1 is piston.
NollMode noll_mode(int noll_j);

// Evaluator with cached radial coefficients for one mode.
class ZernikePoly {
public:
    explicit ZernikePoly(int noll_j);
    double operator()(double rho, double theta) const;
    int noll_index() const { return j_; }

private:
    int j_;
    NollMode mode_;
    double norm_;
    std::vector<double> radial_coeffs_; // coefficient of rho^(n-2s) at index s
};

} // namespace skylink

#endif
