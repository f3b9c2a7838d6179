// SH-WFS measurement, modal least-squares reconstruction, tip-tilt + DM
// correction and single-mode-fiber coupling, wired into a one-frame-delay
// integrator loop.
//
// Modal coefficient vectors exclude piston: entry k corresponds to Noll
// mode k + 2, so tip/tilt are always the first two entries.

#ifndef SKYLINK_ADAPTIVE_OPTICS_HPP
#define SKYLINK_ADAPTIVE_OPTICS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "skylink/wavefront.hpp"

namespace skylink {

struct SlopeMeasurement {
    int subap_n = 0;
    double subap_width_m = 0.0;
    // Row-major subap_n x subap_n grids; slopes are mean phase gradient
    // times the subaperture width (rad per subaperture width).
    std::vector<double> x_slopes;
    std::vector<double> y_slopes;
    std::vector<std::uint8_t> validity; // 1 = at least half the pixels in the pupil

    std::size_t valid_count() const;
};

struct ModalCoefficients {
    std::vector<double> values;

    static ModalCoefficients zeros(int mode_count) {
        return ModalCoefficients{std::vector<double>(mode_count, 0.0)};
    }
};

struct LoopConfig {
    double rate_hz = 2000.0;
    double gain = 0.5;
    int dm_mode_count = 36;          // corrected Noll modes 2..37
    double mode_radius_ratio = 0.892; // SMF mode field radius / pupil radius

    void validate() const;
};

// Zernike modes sampled on a screen's pupil grid (zero outside the pupil).
class ZernikeBasis {
public:
    // Geometry (grid size, pixel pitch, pupil) is taken from the screen.
    ZernikeBasis(const WavefrontScreen& geometry, int mode_count);

    int mode_count() const { return mode_count_; }

    // screen += sign * sum_k c_k Z_k on the pupil.
    void accumulate(WavefrontScreen& screen, const ModalCoefficients& c, double sign) const;

private:
    int mode_count_;
    std::vector<std::uint32_t> pupil_idx_;
    std::vector<std::vector<double>> pupil_values_; // per mode, packed over the pupil
};

// Precomputed fiber-mode overlap kernel for repeated coupling evaluations
// on one geometry.
class CouplingKernel {
public:
    CouplingKernel(const WavefrontScreen& geometry, double mode_radius_ratio);
    double efficiency(const WavefrontScreen& screen) const;

private:
    std::vector<std::uint32_t> pupil_idx_;
    std::vector<double> mode_;
    double norm_ = 1.0;
};

// Mean-gradient SH-WFS with additive Gaussian slope noise (std noise_rad in
// slope units). subap_n must divide the screen grid. noise_rad = 0 gives
// the exact subaperture-mean gradients.
SlopeMeasurement shwfs_measure(const WavefrontScreen& screen, int subap_n,
                               double noise_rad, std::uint64_t seed);

// Least-squares modal reconstructor. The response matrix is calibrated by
// measuring each basis mode through shwfs_measure, so reconstruction is
// exact for in-span noiseless inputs.
class Reconstructor {
public:
    Reconstructor(const WavefrontScreen& geometry, int subap_n, int mode_count);

    ModalCoefficients reconstruct(const SlopeMeasurement& slopes) const;
    double condition_estimate() const { return condition_; }

private:
    int subap_n_;
    int mode_count_;
    std::size_t slope_dim_;
    std::vector<double> response_;   // slope_dim_ x mode_count_
    std::vector<double> normal_chol_; // Cholesky factor of R^T R
    double condition_ = 0.0;
};

// Convenience wrapper building a one-shot reconstructor for the geometry.
ModalCoefficients reconstruct(const SlopeMeasurement& slopes, int mode_count,
                              const WavefrontScreen& geometry);

// Output phase = input - sum_k c_k Z_k on the pupil.
WavefrontScreen apply_correction(const WavefrontScreen& screen,
                                 const ModalCoefficients& correction);
WavefrontScreen apply_correction(const WavefrontScreen& screen,
                                 const ModalCoefficients& correction,
                                 const ZernikeBasis& basis);

// Overlap of exp(i*phase) with a Gaussian fiber mode of field radius
// mode_radius_ratio * pupil radius, normalized so a flat wavefront at the
// optimal ratio couples at ~0.81. Always in [0, 1]; invariant under piston.
double coupling_efficiency(const WavefrontScreen& screen, double mode_radius_ratio);

struct LoopSample {
    double residual_rms_rad = 0.0;
    double coupling_eta = 0.0;
};

// Closed integrator loop c += gain * reconstruct(measure(residual)) with a
// one-frame delay. screen_at(step) supplies the incoming turbulence for
// each step; it must be a pure function of its argument for the loop to be
// deterministic per seed.
std::vector<LoopSample> run_closed_loop(
    const std::function<WavefrontScreen(int)>& screen_at, int step_count,
    const LoopConfig& cfg, int subap_n, double noise_rad, std::uint64_t seed);

// Spec-shaped overload over a pre-built screen sequence.
std::vector<LoopSample> run_closed_loop(const std::vector<WavefrontScreen>& screens,
                                        const LoopConfig& cfg, int subap_n,
                                        double noise_rad, std::uint64_t seed);

// CSV with header `step,residual_rms_rad,coupling_eta`.
void write_loop_csv(std::ostream& out, const std::vector<LoopSample>& telemetry);

} // namespace skylink

#endif
