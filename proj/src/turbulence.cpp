#include "skylink/turbulence.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>

#include "skylink/detail/fft.hpp"
#include "skylink/errors.hpp"
#include "skylink/rng.hpp"

namespace skylink {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

// Kolmogorov phase PSD, spatial frequency f in cycles/m.
double kolmogorov_psd(double f, double r0_m) {
    return 0.023 * std::pow(r0_m, -5.0 / 3.0) * std::pow(f, -11.0 / 3.0);
}
} // namespace

void TurbulenceProfile::validate() const {
    if (!(r0_zenith_m > 0.0))
        throw ConfigError("turbulence.r0_zenith_m must be > 0");
    if (!(reference_wavelength_m > 0.0))
        throw ConfigError("turbulence.reference_wavelength_m must be > 0");
    if (wind_speed_mps < 0.0)
        throw ConfigError("turbulence.wind_speed_mps must be >= 0");
    if (scintillation_index_zenith < 0.0)
        throw ConfigError("turbulence.scintillation_index_zenith must be >= 0");
}

double fried_parameter_m(const TurbulenceProfile& profile, double zenith_angle_deg,
                         double wavelength_m) {
    profile.validate();
    if (zenith_angle_deg < 0.0 || zenith_angle_deg >= 90.0)
        throw DomainError("fried_parameter: zenith angle must lie in [0, 90) deg");
    if (!(wavelength_m > 0.0))
        throw DomainError("fried_parameter: wavelength must be > 0");
    double lambda_scale = std::pow(wavelength_m / profile.reference_wavelength_m, 6.0 / 5.0);
    double cz = std::cos(zenith_angle_deg * kPi / 180.0);
    return profile.r0_zenith_m * lambda_scale * std::pow(cz, 3.0 / 5.0);
}

WavefrontScreen generate_phase_screen(int grid_n, double pixel_m, double r0_m,
                                      std::uint64_t seed, int subharmonic_levels) {
    if (grid_n < 16 || !detail::is_power_of_two(grid_n))
        throw ConfigError("generate_phase_screen: grid_n must be a power of two >= 16");
    if (!(pixel_m > 0.0) || !(r0_m > 0.0))
        throw ConfigError("generate_phase_screen: pixel_m and r0_m must be > 0");
    if (subharmonic_levels < 0)
        throw ConfigError("generate_phase_screen: subharmonic_levels must be >= 0");

    const int n = grid_n;
    const double del_f = 1.0 / (n * pixel_m); // frequency spacing, cycles/m
    // DFT bins inside this ring carry the steepest part of the f^{-11/3}
    // spectrum; they are zeroed here and covered by stratified cells below.
    const int ring = 3;
    Rng rng(derive_seed(seed, "phase_screen"));

    // FFT part: complex Gaussian spectrum shaped by the cell-averaged
    // Kolmogorov PSD. Midpoint sampling under-integrates the convex
    // spectrum by ~0.7/q^2 per ring, which adds up over the whole grid, so
    // each bin takes the mean PSD over its frequency cell. DC, the
    // low-frequency ring and the Nyquist row/column are zeroed; keeping
    // screens Nyquist-free makes evolve_screen shifts exactly real and
    // composable.
    const int sub = 5;
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        int qy = (i <= n / 2) ? i : i - n;
        for (int j = 0; j < n; ++j) {
            int qx = (j <= n / 2) ? j : j - n;
            double re = rng.normal();
            double im = rng.normal();
            bool zeroed = std::max(std::abs(qx), std::abs(qy)) <= ring ||
                          std::abs(qx) == n / 2 || std::abs(qy) == n / 2;
            if (zeroed) {
                spec[static_cast<std::size_t>(i) * n + j] = 0.0;
                continue;
            }
            double psd = 0.0;
            for (int sy = 0; sy < sub; ++sy) {
                double fy = (qy + (sy + 0.5) / sub - 0.5) * del_f;
                for (int sx = 0; sx < sub; ++sx) {
                    double fx = (qx + (sx + 0.5) / sub - 0.5) * del_f;
                    psd += kolmogorov_psd(std::hypot(fx, fy), r0_m);
                }
            }
            psd /= sub * sub;
            double amp = std::sqrt(psd) * del_f;
            spec[static_cast<std::size_t>(i) * n + j] = std::complex<double>(re * amp, im * amp);
        }
    }
    detail::fft2(spec, n, +1);

    auto screen = WavefrontScreen::flat(n, pixel_m);
    screen.r0_m = r0_m;
    screen.seed = seed;
    for (std::size_t k = 0; k < screen.phase_rad.size(); ++k)
        screen.phase_rad[k] = spec[k].real();

    // Low-frequency cells: the zeroed ring around DC plus subharmonic
    // levels tiling the DC cell, each level a 3x3 refinement of the cell
    // above it. One sinusoid per cell, frequency drawn uniformly inside
    // the cell and energy fixed at the cell RMS, so the ensemble-mean
    // structure function equals the continuum integral over the covered
    // support. The f^{1/3} convergence of the low-frequency contribution
    // is slow, hence the deep default level count.
    struct Cell {
        double fx, fy, width;
    };
    std::vector<Cell> cells;
    for (int iy = -ring; iy <= ring; ++iy)
        for (int ix = -ring; ix <= ring; ++ix)
            if (ix != 0 || iy != 0) cells.push_back({ix * del_f, iy * del_f, del_f});
    for (int level = 1; level <= subharmonic_levels; ++level) {
        double del_fp = del_f / std::pow(3.0, level);
        for (int iy = -1; iy <= 1; ++iy)
            for (int ix = -1; ix <= 1; ++ix)
                if (ix != 0 || iy != 0) cells.push_back({ix * del_fp, iy * del_fp, del_fp});
    }

    std::vector<std::complex<double>> ex(n), ey(n);
    for (const Cell& cell : cells) {
        double fx = cell.fx + (rng.uniform() - 0.5) * cell.width;
        double fy = cell.fy + (rng.uniform() - 0.5) * cell.width;
        double amp = std::sqrt(2.0 * kolmogorov_psd(std::hypot(fx, fy), r0_m)) * cell.width;
        std::complex<double> cn = std::polar(amp, kTwoPi * rng.uniform());
        for (int m = 0; m < n; ++m) {
            double x = m * pixel_m;
            ex[m] = std::polar(1.0, kTwoPi * fx * x);
            ey[m] = std::polar(1.0, kTwoPi * fy * x);
        }
        for (int i = 0; i < n; ++i) {
            std::complex<double> row = cn * ey[i];
            for (int j = 0; j < n; ++j)
                screen.at(i, j) += (row * ex[j]).real();
        }
    }

    // Spectral cleanup: project out DC and the Nyquist row/column that the
    // non-periodic cells leak into, keeping evolution closed; zeroing DC
    // also enforces the zero-mean contract.
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] = screen.phase_rad[k];
    detail::fft2(spec, n, -1);
    for (int i = 0; i < n; ++i) {
        spec[static_cast<std::size_t>(i) * n + n / 2] = 0.0;
        spec[static_cast<std::size_t>(n / 2) * n + i] = 0.0;
    }
    spec[0] = 0.0;
    detail::fft2(spec, n, +1);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    for (std::size_t k = 0; k < spec.size(); ++k)
        screen.phase_rad[k] = spec[k].real() * inv_n2;

    return screen;
}

WavefrontScreen evolve_screen(const WavefrontScreen& screen, double wind_speed_mps,
                              double dt_s) {
    if (dt_s < 0.0)
        throw DomainError("evolve_screen: dt_s must be >= 0");
    if (dt_s == 0.0 || wind_speed_mps == 0.0)
        return screen;
    if (!detail::is_power_of_two(screen.grid_n))
        throw ConfigError("evolve_screen: grid_n must be a power of two");

    const int n = screen.grid_n;
    const double shift_px = wind_speed_mps * dt_s / screen.pixel_m;
    WavefrontScreen out = screen;

    double nearest = std::round(shift_px);
    if (std::abs(shift_px - nearest) < 1e-12) {
        // Integer shift: exact circular permutation of columns.
        auto k = static_cast<long long>(nearest);
        long long m = ((k % n) + n) % n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out.at(i, j) = screen.at(i, static_cast<int>(((j - m) % n + n) % n));
        return out;
    }

    // Fractional shift via a spectral phase ramp per row.
    std::vector<std::complex<double>> line(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> ramp(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) {
        int qs = (q <= n / 2) ? q : q - n;
        ramp[q] = std::polar(1.0, -kTwoPi * qs * shift_px / n);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) line[j] = screen.at(i, j);
        detail::fft(line, -1);
        for (int q = 0; q < n; ++q) line[q] *= ramp[q];
        detail::fft(line, +1);
        for (int j = 0; j < n; ++j) out.at(i, j) = line[j].real() / n;
    }
    return out;
}

TransmittanceSeries scintillation_series(double mean_eta, double scint_index,
                                         double rate_hz, double duration_s,
                                         int beam_count, std::uint64_t seed) {
    if (!(mean_eta > 0.0) || mean_eta > 1.0)
        throw ConfigError("scintillation_series: mean_eta must lie in (0, 1]");
    if (scint_index < 0.0)
        throw ConfigError("scintillation_series: scint_index must be >= 0");
    if (!(rate_hz > 0.0) || !(duration_s > 0.0))
        throw ConfigError("scintillation_series: rate and duration must be > 0");
    if (beam_count < 1)
        throw ConfigError("scintillation_series: beam_count must be >= 1");
    if (std::log1p(scint_index) > 5.0)
        throw ConfigError("scintillation_series: scint_index too large for the "
                          "lognormal parameterization (ln-domain variance > 5)");

    auto count = static_cast<std::size_t>(std::llround(rate_hz * duration_s));
    if (count == 0) count = 1;

    TransmittanceSeries series;
    series.rate_hz = rate_hz;
    series.mean_transmittance = mean_eta;
    series.samples.resize(count);

    Rng rng(derive_seed(seed, "scintillation"));
    for (std::size_t k = 0; k < count; ++k) {
        double acc = 0.0;
        for (int b = 0; b < beam_count; ++b)
            acc += rng.lognormal_mean_nv(mean_eta, scint_index);
        series.samples[k] = acc / beam_count;
    }
    return series;
}

void write_series_csv(std::ostream& out, const TransmittanceSeries& series) {
    out << "t_s,transmittance\n";
    for (std::size_t k = 0; k < series.samples.size(); ++k)
        out << (static_cast<double>(k) / series.rate_hz) << ',' << series.samples[k] << '\n';
}

FrozenFlowStrip::FrozenFlowStrip(int grid_n, double pixel_m, double r0_m,
                                 double wind_speed_mps, double duration_s,
                                 std::uint64_t seed, double aperture_diameter_m)
    : grid_n_(grid_n),
      pixel_m_(pixel_m),
      r0_m_(r0_m),
      wind_speed_mps_(wind_speed_mps),
      seed_(seed),
      aperture_diameter_m_(aperture_diameter_m) {
    if (grid_n < 16 || !detail::is_power_of_two(grid_n))
        throw ConfigError("FrozenFlowStrip: grid_n must be a power of two >= 16");
    if (!(pixel_m > 0.0) || !(r0_m > 0.0))
        throw ConfigError("FrozenFlowStrip: pixel_m and r0_m must be > 0");
    if (wind_speed_mps < 0.0 || !(duration_s > 0.0))
        throw ConfigError("FrozenFlowStrip: wind must be >= 0 and duration > 0");

    double travel_px = wind_speed_mps * duration_s / pixel_m;
    cols_ = grid_n;
    while (cols_ < static_cast<double>(grid_n) + travel_px + 2.0) cols_ *= 2;

    const int rows = grid_n;
    const double del_fx = 1.0 / (cols_ * pixel_m);
    const double del_fy = 1.0 / (rows * pixel_m);
    const double avg_limit = 6.0 * std::max(del_fx, del_fy);
    Rng rng(derive_seed(seed, "flow_strip"));

    // Cell-averaged PSD near the origin where the spectrum is steep,
    // center-sampled elsewhere. Rectangular cells del_fx x del_fy.
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(rows) * cols_);
    const int sub = 7;
    for (int i = 0; i < rows; ++i) {
        int qy = (i <= rows / 2) ? i : i - rows;
        double fy = qy * del_fy;
        for (int j = 0; j < cols_; ++j) {
            int qx = (j <= cols_ / 2) ? j : j - cols_;
            double fx = qx * del_fx;
            double re = rng.normal();
            double im = rng.normal();
            if (qx == 0 && qy == 0) {
                spec[static_cast<std::size_t>(i) * cols_ + j] = 0.0;
                continue;
            }
            double f = std::hypot(fx, fy);
            double psd;
            if (f < avg_limit) {
                psd = 0.0;
                for (int sy = 0; sy < sub; ++sy) {
                    double oy = fy + ((sy + 0.5) / sub - 0.5) * del_fy;
                    for (int sx = 0; sx < sub; ++sx) {
                        double ox = fx + ((sx + 0.5) / sub - 0.5) * del_fx;
                        double ff = std::hypot(ox, oy);
                        if (ff < 1e-12) ff = 1e-12;
                        psd += kolmogorov_psd(ff, r0_m);
                    }
                }
                psd /= sub * sub;
            } else {
                psd = kolmogorov_psd(f, r0_m);
            }
            double amp = std::sqrt(psd * del_fx * del_fy);
            spec[static_cast<std::size_t>(i) * cols_ + j] =
                std::complex<double>(re * amp, im * amp);
        }
    }
    detail::fft2_rect(spec, rows, cols_, +1);

    strip_.resize(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) strip_[k] = spec[k].real();

    if (aperture_diameter_m_ > 0.0) {
        auto proto = WavefrontScreen::flat(grid_n_, pixel_m_);
        proto.set_pupil(aperture_diameter_m_);
        mask_ = proto.mask;
    } else {
        mask_.assign(static_cast<std::size_t>(grid_n_) * grid_n_, 1);
    }
}

WavefrontScreen FrozenFlowStrip::sample(double t_s) const {
    auto screen = WavefrontScreen::flat(grid_n_, pixel_m_);
    screen.aperture_diameter_m = aperture_diameter_m_;
    screen.mask = mask_;
    screen.r0_m = r0_m_;
    screen.seed = seed_;
    sample_into(t_s, screen);
    return screen;
}

void FrozenFlowStrip::sample_into(double t_s, WavefrontScreen& screen) const {
    if (t_s < 0.0)
        throw DomainError("FrozenFlowStrip: time must be >= 0");
    double offset = wind_speed_mps_ * t_s / pixel_m_;
    auto c0 = static_cast<long long>(std::floor(offset));
    double frac = offset - static_cast<double>(c0);
    if (c0 + grid_n_ + 1 >= cols_)
        throw DomainError("FrozenFlowStrip: sampled beyond the synthesized duration");

    for (int i = 0; i < grid_n_; ++i) {
        const double* row = &strip_[static_cast<std::size_t>(i) * cols_ + c0];
        double* out = &screen.phase_rad[static_cast<std::size_t>(i) * grid_n_];
        for (int j = 0; j < grid_n_; ++j)
            out[j] = (1.0 - frac) * row[j] + frac * row[j + 1];
    }
}

} // namespace skylink
