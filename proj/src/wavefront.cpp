#include "skylink/wavefront.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "skylink/errors.hpp"

namespace skylink {

WavefrontScreen WavefrontScreen::flat(int grid_n, double pixel_m) {
    if (grid_n <= 0 || !(pixel_m > 0.0))
        throw ConfigError("WavefrontScreen: grid_n and pixel_m must be positive");
    WavefrontScreen s;
    s.grid_n = grid_n;
    s.pixel_m = pixel_m;
    s.phase_rad.assign(static_cast<std::size_t>(grid_n) * grid_n, 0.0);
    s.mask.assign(static_cast<std::size_t>(grid_n) * grid_n, 1);
    return s;
}

void WavefrontScreen::set_pupil(double diameter_m) {
    if (!(diameter_m > 0.0))
        throw ConfigError("set_pupil: diameter must be > 0");
    if (diameter_m > grid_n * pixel_m)
        throw ConfigError("set_pupil: pupil does not fit on the grid");
    aperture_diameter_m = diameter_m;
    double r2 = 0.25 * diameter_m * diameter_m;
    for (int i = 0; i < grid_n; ++i) {
        double y = coord_m(i);
        for (int j = 0; j < grid_n; ++j) {
            double x = coord_m(j);
            mask[static_cast<std::size_t>(i) * grid_n + j] = (x * x + y * y <= r2) ? 1 : 0;
        }
    }
}

std::size_t WavefrontScreen::pupil_pixel_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
}

double WavefrontScreen::mean_in_pupil() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < phase_rad.size(); ++k) {
        if (mask[k]) {
            sum += phase_rad[k];
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double WavefrontScreen::rms_in_pupil() const {
    double mean = mean_in_pupil();
    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < phase_rad.size(); ++k) {
        if (mask[k]) {
            double d = phase_rad[k] - mean;
            ss += d * d;
            ++n;
        }
    }
    return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

namespace {
template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
} // namespace

void write_screen(std::ostream& out, const WavefrontScreen& screen) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(screen.grid_n));
    put<double>(out, screen.pixel_m);
    put<double>(out, screen.r0_m);
    put<std::uint64_t>(out, screen.seed);
    out.write(reinterpret_cast<const char*>(screen.phase_rad.data()),
              static_cast<std::streamsize>(screen.phase_rad.size() * sizeof(double)));
}

WavefrontScreen read_screen(std::istream& in) {
    auto n = static_cast<int>(get<std::uint32_t>(in));
    double pixel = get<double>(in);
    auto screen = WavefrontScreen::flat(n, pixel);
    screen.r0_m = get<double>(in);
    screen.seed = get<std::uint64_t>(in);
    in.read(reinterpret_cast<char*>(screen.phase_rad.data()),
            static_cast<std::streamsize>(screen.phase_rad.size() * sizeof(double)));
    if (!in)
        throw ConfigError("read_screen: truncated or unreadable screen file");
    return screen;
}

} // namespace skylink
