#include "zernike_oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {
double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

void noll_to_nm(int j, int& n, int& m_abs, bool& use_sin) {
    if (j < 1) throw std::invalid_argument("noll index starts at 1");
    n = 0;
    int remaining = j;
    while (remaining > n + 1) {
        remaining -= n + 1;
        n += 1;
    }
    int k = remaining; // 1-based position within radial order n
    if (n % 2 == 0)
        m_abs = 2 * (k / 2);
    else
        m_abs = 2 * ((k - 1) / 2) + 1;
    use_sin = (j % 2 == 1) && m_abs != 0;
}
} // namespace

double zernike_value(int noll_j, double rho, double theta) {
    int n, m;
    bool use_sin;
    noll_to_nm(noll_j, n, m, use_sin);

    double radial = 0.0;
    for (int s = 0; s <= (n - m) / 2; ++s) {
        double num = (s % 2 ? -1.0 : 1.0) * factorial(n - s);
        double den = factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s);
        radial += num / den * std::pow(rho, n - 2 * s);
    }

    double norm = (m == 0) ? std::sqrt(n + 1.0) : std::sqrt(2.0 * (n + 1.0));
    if (m == 0) return norm * radial;
    return norm * radial * (use_sin ? std::sin(m * theta) : std::cos(m * theta));
}

std::vector<double> zernike_project(const skylink::WavefrontScreen& screen, int mode_count) {
    const int n = screen.grid_n;
    const double radius = 0.5 * screen.aperture_diameter_m;
    if (!(radius > 0.0))
        throw std::invalid_argument("zernike_project: screen has no pupil");

    // Sample each mode on the pupil pixels.
    std::vector<std::size_t> pix;
    std::vector<double> rho, theta;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!screen.in_pupil(i, j)) continue;
            pix.push_back(static_cast<std::size_t>(i) * n + j);
            double x = screen.coord_m(j), y = screen.coord_m(i);
            rho.push_back(std::sqrt(x * x + y * y) / radius);
            theta.push_back(std::atan2(y, x));
        }
    }
    const std::size_t npix = pix.size();
    std::vector<std::vector<double>> basis(mode_count, std::vector<double>(npix));
    for (int k = 0; k < mode_count; ++k)
        for (std::size_t p = 0; p < npix; ++p)
            basis[k][p] = zernike_value(k + 2, rho[p], theta[p]); // piston excluded

    // Gram system G c = b makes the projection exact for in-span screens.
    std::vector<double> g(static_cast<std::size_t>(mode_count) * mode_count, 0.0);
    std::vector<double> b(mode_count, 0.0);
    for (int a = 0; a < mode_count; ++a) {
        for (int c = a; c < mode_count; ++c) {
            double dot = 0.0;
            for (std::size_t p = 0; p < npix; ++p) dot += basis[a][p] * basis[c][p];
            g[static_cast<std::size_t>(a) * mode_count + c] = dot;
            g[static_cast<std::size_t>(c) * mode_count + a] = dot;
        }
        double dot = 0.0;
        for (std::size_t p = 0; p < npix; ++p) dot += basis[a][p] * screen.phase_rad[pix[p]];
        b[a] = dot;
    }

    // Gaussian elimination with partial pivoting.
    std::vector<double> c(b);
    for (int col = 0; col < mode_count; ++col) {
        int piv = col;
        for (int r = col + 1; r < mode_count; ++r)
            if (std::abs(g[static_cast<std::size_t>(r) * mode_count + col]) >
                std::abs(g[static_cast<std::size_t>(piv) * mode_count + col]))
                piv = r;
        if (piv != col) {
            for (int cc = 0; cc < mode_count; ++cc)
                std::swap(g[static_cast<std::size_t>(col) * mode_count + cc],
                          g[static_cast<std::size_t>(piv) * mode_count + cc]);
            std::swap(c[col], c[piv]);
        }
        double d = g[static_cast<std::size_t>(col) * mode_count + col];
        if (std::abs(d) < 1e-14)
            throw std::runtime_error("zernike_project: singular Gram matrix");
        for (int r = col + 1; r < mode_count; ++r) {
            double f = g[static_cast<std::size_t>(r) * mode_count + col] / d;
            if (f == 0.0) continue;
            for (int cc = col; cc < mode_count; ++cc)
                g[static_cast<std::size_t>(r) * mode_count + cc] -=
                    f * g[static_cast<std::size_t>(col) * mode_count + cc];
            c[r] -= f * c[col];
        }
    }
    for (int row = mode_count - 1; row >= 0; --row) {
        double acc = c[row];
        for (int cc = row + 1; cc < mode_count; ++cc)
            acc -= g[static_cast<std::size_t>(row) * mode_count + cc] * c[cc];
        c[row] = acc / g[static_cast<std::size_t>(row) * mode_count + row];
    }
    return c;
}

} // namespace oracles
