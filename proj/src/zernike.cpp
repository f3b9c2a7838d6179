#include "skylink/zernike.hpp"

#include <cmath>

#include "skylink/errors.hpp"

namespace skylink {

NollMode noll_mode(int noll_j) {
    if (noll_j < 1)
        throw ConfigError("noll_mode: index starts at 1");
    int n = 0;
    int k = noll_j;
    while (k > n + 1) {
        k -= n + 1;
        ++n;
    }
    NollMode mode;
    mode.n = n;
    mode.m_abs = (n % 2 == 0) ? 2 * (k / 2) : 2 * ((k - 1) / 2) + 1;
    mode.is_sin = (noll_j % 2 == 1) && mode.m_abs != 0;
    return mode;
}

ZernikePoly::ZernikePoly(int noll_j) : j_(noll_j), mode_(noll_mode(noll_j)) {
    const int n = mode_.n;
    const int m = mode_.m_abs;
    norm_ = (m == 0) ? std::sqrt(n + 1.0) : std::sqrt(2.0 * (n + 1.0));

    // c_0 = n! / (((n+m)/2)! ((n-m)/2)!), then the term ratio
    // c_{s+1} = -c_s ((n+m)/2 - s)((n-m)/2 - s) / ((n - s)(s + 1)).
    const int p = (n + m) / 2;
    const int q = (n - m) / 2;
    double c = 1.0;
    for (int i = p + 1; i <= n; ++i) c *= i;
    for (int i = 2; i <= q; ++i) c /= i;
    radial_coeffs_.resize(q + 1);
    for (int s = 0; s <= q; ++s) {
        radial_coeffs_[s] = c;
        c *= -static_cast<double>((p - s) * (q - s)) /
             (static_cast<double>(n - s) * (s + 1));
    }
}

double ZernikePoly::operator()(double rho, double theta) const {
    const int m = mode_.m_abs;
    // Horner in rho^2 over powers n, n-2, ..., m.
    double rho2 = rho * rho;
    double radial = 0.0;
    for (double coeff : radial_coeffs_) radial = radial * rho2 + coeff;
    for (int i = 0; i < m; ++i) radial *= rho;

    if (m == 0) return norm_ * radial;
    return norm_ * radial * (mode_.is_sin ? std::sin(m * theta) : std::cos(m * theta));
}

} // namespace skylink
