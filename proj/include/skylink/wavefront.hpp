#ifndef SKYLINK_WAVEFRONT_HPP
#define SKYLINK_WAVEFRONT_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace skylink {

// Gridded optical phase over the receive pupil. Phase values exist on the
// whole grid; the mask marks pixels inside the circular pupil once one has
// been attached with set_pupil().
struct WavefrontScreen {
    int grid_n = 0;
    double pixel_m = 0.0;
    double aperture_diameter_m = 0.0; // 0 until a pupil is attached
    std::vector<double> phase_rad;    // row-major grid_n x grid_n
    std::vector<std::uint8_t> mask;   // 1 = inside pupil

    // Generation provenance, kept for the binary export header.
    double r0_m = 0.0;
    std::uint64_t seed = 0;

    static WavefrontScreen flat(int grid_n, double pixel_m);

    double& at(int row, int col) { return phase_rad[static_cast<std::size_t>(row) * grid_n + col]; }
    double at(int row, int col) const { return phase_rad[static_cast<std::size_t>(row) * grid_n + col]; }
    bool in_pupil(int row, int col) const { return mask[static_cast<std::size_t>(row) * grid_n + col] != 0; }

    // Pixel-center coordinate of column/row index, metres from grid center.
    double coord_m(int index) const {
        return (static_cast<double>(index) - 0.5 * (grid_n - 1)) * pixel_m;
    }

    // Attach a centred circular pupil of the given diameter (must fit on the
    // grid). Phase values are untouched.
    void set_pupil(double aperture_diameter_m);

    std::size_t pupil_pixel_count() const;
    double mean_in_pupil() const;
    // RMS about the pupil mean (piston removed).
    double rms_in_pupil() const;
};

// Binary grid file: header {grid_n: u32, pixel_m: f64, r0_m: f64, seed: u64}
// followed by grid_n*grid_n row-major little-endian 64-bit floats.
void write_screen(std::ostream& out, const WavefrontScreen& screen);
WavefrontScreen read_screen(std::istream& in);

} // namespace skylink

#endif
