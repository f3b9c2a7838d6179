#include "skylink/adaptive_optics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>

#include "skylink/errors.hpp"
#include "skylink/rng.hpp"
#include "skylink/zernike.hpp"

namespace skylink {

namespace {

// Dense symmetric positive-definite helpers for the K x K normal equations.

// Lower-triangular Cholesky factor; throws ReconstructionError on failure.
std::vector<double> cholesky(const std::vector<double>& a, int k, double condition) {
    std::vector<double> l(a.size(), 0.0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[static_cast<std::size_t>(i) * k + j];
            for (int p = 0; p < j; ++p)
                sum -= l[static_cast<std::size_t>(i) * k + p] * l[static_cast<std::size_t>(j) * k + p];
            if (i == j) {
                if (sum <= 0.0)
                    throw ReconstructionError(
                        "reconstructor response matrix is rank deficient (condition estimate " +
                        std::to_string(condition) + ")");
                l[static_cast<std::size_t>(i) * k + j] = std::sqrt(sum);
            } else {
                l[static_cast<std::size_t>(i) * k + j] =
                    sum / l[static_cast<std::size_t>(j) * k + j];
            }
        }
    }
    return l;
}

void solve_cholesky(const std::vector<double>& l, int k, std::vector<double>& x) {
    for (int i = 0; i < k; ++i) {
        double sum = x[i];
        for (int j = 0; j < i; ++j) sum -= l[static_cast<std::size_t>(i) * k + j] * x[j];
        x[i] = sum / l[static_cast<std::size_t>(i) * k + i];
    }
    for (int i = k - 1; i >= 0; --i) {
        double sum = x[i];
        for (int j = i + 1; j < k; ++j) sum -= l[static_cast<std::size_t>(j) * k + i] * x[j];
        x[i] = sum / l[static_cast<std::size_t>(i) * k + i];
    }
}

// Largest/smallest eigenvalue ratio of the normal matrix by power
// iteration; used only for diagnostics in error messages.
double condition_of_normal(const std::vector<double>& a, int k) {
    auto matvec = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (int i = 0; i < k; ++i) {
            double s = 0.0;
            for (int j = 0; j < k; ++j) s += a[static_cast<std::size_t>(i) * k + j] * v[j];
            out[i] = s;
        }
    };
    std::vector<double> v(k, 1.0), tmp(k);
    double lmax = 0.0;
    for (int it = 0; it < 60; ++it) {
        matvec(v, tmp);
        double norm = 0.0;
        for (double x : tmp) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) v[i] = tmp[i] / norm;
        lmax = norm;
    }
    // Smallest eigenvalue via shifted power iteration on (lmax I - A).
    std::vector<double> w(k);
    for (int i = 0; i < k; ++i) w[i] = (i % 2) ? 1.0 : -1.0;
    double shift_ev = 0.0;
    for (int it = 0; it < 200; ++it) {
        matvec(w, tmp);
        for (int i = 0; i < k; ++i) tmp[i] = lmax * w[i] - tmp[i];
        double norm = 0.0;
        for (double x : tmp) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        for (int i = 0; i < k; ++i) w[i] = tmp[i] / norm;
        shift_ev = norm;
    }
    double lmin = lmax - shift_ev;
    if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(lmax / lmin); // condition of R itself
}

} // namespace

std::size_t SlopeMeasurement::valid_count() const {
    std::size_t n = 0;
    for (auto v : validity) n += v;
    return n;
}

void LoopConfig::validate() const {
    if (!(rate_hz > 0.0))
        throw ConfigError("loop.rate_hz must be > 0");
    if (!(gain > 0.0) || gain > 1.0)
        throw ConfigError("loop.gain must lie in (0, 1]");
    if (dm_mode_count < 2)
        throw ConfigError("loop.dm_mode_count must cover at least tip and tilt");
    if (!(mode_radius_ratio > 0.0))
        throw ConfigError("loop.mode_radius_ratio must be > 0");
}

ZernikeBasis::ZernikeBasis(const WavefrontScreen& geometry, int mode_count)
    : mode_count_(mode_count) {
    if (mode_count < 1)
        throw ConfigError("ZernikeBasis: mode_count must be >= 1");
    if (!(geometry.aperture_diameter_m > 0.0))
        throw ConfigError("ZernikeBasis: screen has no pupil attached");

    const int n = geometry.grid_n;
    const double radius = 0.5 * geometry.aperture_diameter_m;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (geometry.in_pupil(i, j))
                pupil_idx_.push_back(static_cast<std::uint32_t>(i) * n + j);

    pupil_values_.reserve(mode_count);
    for (int k = 0; k < mode_count; ++k) {
        ZernikePoly poly(k + 2); // piston excluded
        std::vector<double> values(pupil_idx_.size());
        for (std::size_t p = 0; p < pupil_idx_.size(); ++p) {
            int i = static_cast<int>(pupil_idx_[p]) / n;
            int j = static_cast<int>(pupil_idx_[p]) % n;
            double x = geometry.coord_m(j), y = geometry.coord_m(i);
            values[p] = poly(std::hypot(x, y) / radius, std::atan2(y, x));
        }
        pupil_values_.push_back(std::move(values));
    }
}

void ZernikeBasis::accumulate(WavefrontScreen& screen, const ModalCoefficients& c,
                              double sign) const {
    if (c.values.size() > pupil_values_.size())
        throw ConfigError("ZernikeBasis: more coefficients than basis modes");
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        double w = sign * c.values[k];
        if (w == 0.0) continue;
        const auto& vals = pupil_values_[k];
        for (std::size_t p = 0; p < pupil_idx_.size(); ++p)
            screen.phase_rad[pupil_idx_[p]] += w * vals[p];
    }
}

CouplingKernel::CouplingKernel(const WavefrontScreen& geometry, double mode_radius_ratio) {
    if (!(mode_radius_ratio > 0.0))
        throw ConfigError("CouplingKernel: mode_radius_ratio must be > 0");
    if (!(geometry.aperture_diameter_m > 0.0))
        throw ConfigError("CouplingKernel: screen has no pupil attached");
    const int n = geometry.grid_n;
    const double radius = 0.5 * geometry.aperture_diameter_m;
    const double w = mode_radius_ratio * radius;
    for (int i = 0; i < n; ++i) {
        double y = geometry.coord_m(i);
        for (int j = 0; j < n; ++j) {
            if (!geometry.in_pupil(i, j)) continue;
            double x = geometry.coord_m(j);
            pupil_idx_.push_back(static_cast<std::uint32_t>(i) * n + j);
            mode_.push_back(std::exp(-(x * x + y * y) / (w * w)));
        }
    }
    const double px2 = geometry.pixel_m * geometry.pixel_m;
    double pupil_area = static_cast<double>(pupil_idx_.size()) * px2;
    double mode_norm = M_PI * w * w / 2.0;
    norm_ = px2 * px2 / (pupil_area * mode_norm);
}

double CouplingKernel::efficiency(const WavefrontScreen& screen) const {
    double re = 0.0, im = 0.0;
    for (std::size_t p = 0; p < pupil_idx_.size(); ++p) {
        double phi = screen.phase_rad[pupil_idx_[p]];
        re += std::cos(phi) * mode_[p];
        im += std::sin(phi) * mode_[p];
    }
    double eta = (re * re + im * im) * norm_;
    return eta > 1.0 ? 1.0 : eta;
}

SlopeMeasurement shwfs_measure(const WavefrontScreen& screen, int subap_n,
                               double noise_rad, std::uint64_t seed) {
    const int n = screen.grid_n;
    if (subap_n < 1 || n % subap_n != 0)
        throw ConfigError("shwfs_measure: subap_n must divide the screen grid");
    if (noise_rad < 0.0)
        throw ConfigError("shwfs_measure: noise_rad must be >= 0");

    const int s = n / subap_n; // pixels per subaperture side
    SlopeMeasurement out;
    out.subap_n = subap_n;
    out.subap_width_m = s * screen.pixel_m;
    out.x_slopes.assign(static_cast<std::size_t>(subap_n) * subap_n, 0.0);
    out.y_slopes.assign(static_cast<std::size_t>(subap_n) * subap_n, 0.0);
    out.validity.assign(static_cast<std::size_t>(subap_n) * subap_n, 0);

    const double inv_2px = 1.0 / (2.0 * screen.pixel_m);
    const double inv_px = 1.0 / screen.pixel_m;
    Rng rng(derive_seed(seed, "shwfs"));

    for (int si = 0; si < subap_n; ++si) {
        for (int sj = 0; sj < subap_n; ++sj) {
            double gx = 0.0, gy = 0.0;
            int inside = 0;
            for (int i = si * s; i < (si + 1) * s; ++i) {
                for (int j = sj * s; j < (sj + 1) * s; ++j) {
                    if (!screen.in_pupil(i, j)) continue;
                    ++inside;
                    // Centered differences, one-sided at the grid edges.
                    if (j == 0)
                        gx += (screen.at(i, 1) - screen.at(i, 0)) * inv_px;
                    else if (j == n - 1)
                        gx += (screen.at(i, n - 1) - screen.at(i, n - 2)) * inv_px;
                    else
                        gx += (screen.at(i, j + 1) - screen.at(i, j - 1)) * inv_2px;
                    if (i == 0)
                        gy += (screen.at(1, j) - screen.at(0, j)) * inv_px;
                    else if (i == n - 1)
                        gy += (screen.at(n - 1, j) - screen.at(n - 2, j)) * inv_px;
                    else
                        gy += (screen.at(i + 1, j) - screen.at(i - 1, j)) * inv_2px;
                }
            }
            std::size_t idx = static_cast<std::size_t>(si) * subap_n + sj;
            if (2 * inside >= s * s) {
                out.validity[idx] = 1;
                out.x_slopes[idx] = gx / inside * out.subap_width_m;
                out.y_slopes[idx] = gy / inside * out.subap_width_m;
                if (noise_rad > 0.0) {
                    out.x_slopes[idx] += rng.normal(0.0, noise_rad);
                    out.y_slopes[idx] += rng.normal(0.0, noise_rad);
                }
            }
        }
    }
    return out;
}

Reconstructor::Reconstructor(const WavefrontScreen& geometry, int subap_n, int mode_count)
    : subap_n_(subap_n), mode_count_(mode_count) {
    if (mode_count < 1)
        throw ConfigError("Reconstructor: mode_count must be >= 1");

    // Reference measurement fixes the valid-subaperture layout.
    WavefrontScreen probe = geometry;
    std::fill(probe.phase_rad.begin(), probe.phase_rad.end(), 0.0);
    SlopeMeasurement ref = shwfs_measure(probe, subap_n, 0.0, 0);
    const std::size_t valid = ref.valid_count();
    if (static_cast<std::size_t>(mode_count) > valid)
        throw ConfigError("Reconstructor: mode_count exceeds valid slope count / 2");
    slope_dim_ = 2 * valid;

    // Interaction matrix: poke each mode with unit amplitude and record the
    // measured slopes.
    ZernikeBasis basis(geometry, mode_count);
    response_.assign(slope_dim_ * mode_count, 0.0);
    for (int k = 0; k < mode_count; ++k) {
        WavefrontScreen poke = probe;
        ModalCoefficients c = ModalCoefficients::zeros(mode_count);
        c.values[k] = 1.0;
        basis.accumulate(poke, c, +1.0);
        SlopeMeasurement m = shwfs_measure(poke, subap_n, 0.0, 0);
        std::size_t row = 0;
        for (std::size_t idx = 0; idx < m.validity.size(); ++idx) {
            if (!ref.validity[idx]) continue;
            response_[row * mode_count + k] = m.x_slopes[idx];
            response_[(row + valid) * mode_count + k] = m.y_slopes[idx];
            ++row;
        }
    }

    // Normal equations R^T R.
    std::vector<double> normal(static_cast<std::size_t>(mode_count) * mode_count, 0.0);
    for (std::size_t r = 0; r < slope_dim_; ++r) {
        const double* row = &response_[r * mode_count];
        for (int i = 0; i < mode_count; ++i) {
            if (row[i] == 0.0) continue;
            for (int j = i; j < mode_count; ++j)
                normal[static_cast<std::size_t>(i) * mode_count + j] += row[i] * row[j];
        }
    }
    for (int i = 0; i < mode_count; ++i)
        for (int j = 0; j < i; ++j)
            normal[static_cast<std::size_t>(i) * mode_count + j] =
                normal[static_cast<std::size_t>(j) * mode_count + i];

    condition_ = condition_of_normal(normal, mode_count);
    normal_chol_ = cholesky(normal, mode_count, condition_);
}

ModalCoefficients Reconstructor::reconstruct(const SlopeMeasurement& slopes) const {
    if (slopes.subap_n != subap_n_)
        throw ConfigError("reconstruct: slope grid does not match the calibration");

    // Stack valid x then y slopes in calibration order and form R^T s.
    std::vector<double> rhs(mode_count_, 0.0);
    std::size_t row = 0;
    const std::size_t valid = slope_dim_ / 2;
    for (std::size_t idx = 0; idx < slopes.validity.size(); ++idx) {
        if (!slopes.validity[idx]) continue;
        if (row >= valid)
            throw ConfigError("reconstruct: validity layout does not match the calibration");
        const double sx = slopes.x_slopes[idx];
        const double sy = slopes.y_slopes[idx];
        const double* rx = &response_[row * mode_count_];
        const double* ry = &response_[(row + valid) * mode_count_];
        for (int k = 0; k < mode_count_; ++k) rhs[k] += sx * rx[k] + sy * ry[k];
        ++row;
    }
    solve_cholesky(normal_chol_, mode_count_, rhs);
    return ModalCoefficients{std::move(rhs)};
}

ModalCoefficients reconstruct(const SlopeMeasurement& slopes, int mode_count,
                              const WavefrontScreen& geometry) {
    return Reconstructor(geometry, slopes.subap_n, mode_count).reconstruct(slopes);
}

WavefrontScreen apply_correction(const WavefrontScreen& screen,
                                 const ModalCoefficients& correction) {
    ZernikeBasis basis(screen, static_cast<int>(correction.values.size()));
    return apply_correction(screen, correction, basis);
}

WavefrontScreen apply_correction(const WavefrontScreen& screen,
                                 const ModalCoefficients& correction,
                                 const ZernikeBasis& basis) {
    WavefrontScreen out = screen;
    basis.accumulate(out, correction, -1.0);
    return out;
}

double coupling_efficiency(const WavefrontScreen& screen, double mode_radius_ratio) {
    if (!(mode_radius_ratio > 0.0))
        throw ConfigError("coupling_efficiency: mode_radius_ratio must be > 0");
    if (!(screen.aperture_diameter_m > 0.0))
        throw ConfigError("coupling_efficiency: screen has no pupil attached");

    const int n = screen.grid_n;
    const double radius = 0.5 * screen.aperture_diameter_m;
    const double w = mode_radius_ratio * radius;

    // Overlap integral against the back-propagated Gaussian mode; the mode
    // norm over the full plane is pi w^2 / 2 in closed form.
    std::complex<double> overlap(0.0, 0.0);
    std::size_t pupil_count = 0;
    for (int i = 0; i < n; ++i) {
        double y = screen.coord_m(i);
        for (int j = 0; j < n; ++j) {
            if (!screen.in_pupil(i, j)) continue;
            double x = screen.coord_m(j);
            double mode = std::exp(-(x * x + y * y) / (w * w));
            double phi = screen.at(i, j);
            overlap += std::complex<double>(std::cos(phi) * mode, std::sin(phi) * mode);
            ++pupil_count;
        }
    }
    if (pupil_count == 0) return 0.0;

    const double px2 = screen.pixel_m * screen.pixel_m;
    const double pupil_area = static_cast<double>(pupil_count) * px2;
    const double mode_norm = M_PI * w * w / 2.0;
    double eta = std::norm(overlap) * px2 * px2 / (pupil_area * mode_norm);
    return eta > 1.0 ? 1.0 : eta;
}

std::vector<LoopSample> run_closed_loop(
    const std::function<WavefrontScreen(int)>& screen_at, int step_count,
    const LoopConfig& cfg, int subap_n, double noise_rad, std::uint64_t seed) {
    cfg.validate();
    if (step_count < 1)
        throw ConfigError("run_closed_loop: step_count must be >= 1");

    WavefrontScreen first = screen_at(0);
    Reconstructor rec(first, subap_n, cfg.dm_mode_count);
    ZernikeBasis basis(first, cfg.dm_mode_count);
    CouplingKernel kernel(first, cfg.mode_radius_ratio);

    ModalCoefficients command = ModalCoefficients::zeros(cfg.dm_mode_count);
    std::vector<LoopSample> telemetry;
    telemetry.reserve(step_count);
    for (int t = 0; t < step_count; ++t) {
        WavefrontScreen residual = (t == 0) ? first : screen_at(t);
        basis.accumulate(residual, command, -1.0);

        LoopSample sample;
        sample.residual_rms_rad = residual.rms_in_pupil();
        sample.coupling_eta = kernel.efficiency(residual);
        telemetry.push_back(sample);

        SlopeMeasurement slopes =
            shwfs_measure(residual, subap_n, noise_rad, derive_seed(seed, "loop_wfs", t));
        ModalCoefficients delta = rec.reconstruct(slopes);
        for (int k = 0; k < cfg.dm_mode_count; ++k)
            command.values[k] += cfg.gain * delta.values[k];
    }
    return telemetry;
}

std::vector<LoopSample> run_closed_loop(const std::vector<WavefrontScreen>& screens,
                                        const LoopConfig& cfg, int subap_n,
                                        double noise_rad, std::uint64_t seed) {
    if (screens.empty())
        throw ConfigError("run_closed_loop: empty screen sequence");
    return run_closed_loop([&](int t) { return screens[static_cast<std::size_t>(t)]; },
                           static_cast<int>(screens.size()), cfg, subap_n, noise_rad, seed);
}

void write_loop_csv(std::ostream& out, const std::vector<LoopSample>& telemetry) {
    out << "step,residual_rms_rad,coupling_eta\n";
    for (std::size_t k = 0; k < telemetry.size(); ++k)
        out << k << ',' << telemetry[k].residual_rms_rad << ',' << telemetry[k].coupling_eta
            << '\n';
}

} // namespace skylink
