// LEO pass trajectories over the ground station and the static link budget.
//
// The pass model is a circular orbit whose ground track passes the station
// at a configurable maximum elevation; no ephemeris, Earth rotation or
// refraction. That is all the downstream PAT and channel models need.

#ifndef SKYLINK_PASS_GEOMETRY_HPP
#define SKYLINK_PASS_GEOMETRY_HPP

#include <iosfwd>
#include <vector>

namespace skylink {

struct OrbitConfig {
    double altitude_km = 500.0;
    double max_elevation_deg = 90.0;
    double earth_radius_km = 6371.0;

    void validate() const;
};

struct StationConfig {
    double aperture_diameter_m = 0.80;
    double elevation_mask_deg = 0.0;
    int uplink_beam_count = 4;

    void validate() const;
};

struct PassSample {
    double t_s = 0.0;
    double elevation_deg = 0.0;
    double azimuth_deg = 0.0;
    double slant_range_km = 0.0;
};

// Station-to-satellite range for a spherical Earth:
//   R = sqrt((Re sin e)^2 + 2 Re h + h^2) - Re sin e.
// Strictly decreasing in elevation; R(90 deg) = h.
double slant_range_km(double elevation_deg, const OrbitConfig& orbit);

// Elevation profile of one overhead pass, sampled every step_s seconds and
// restricted to elevation >= station.elevation_mask_deg. The profile is
// symmetric about the culmination point and entirely deterministic. Returns
// an empty vector when the pass never clears the mask.
std::vector<PassSample> propagate_pass(const OrbitConfig& orbit,
                                       const StationConfig& station,
                                       double step_s);

// Orbital angular rate (rad/s) seen from the Earth's center.
double orbital_rate_rad_s(const OrbitConfig& orbit);

// Static (non-turbulent) link loss in dB: flat-top footprint area ratio plus
// airmass-scaled atmospheric absorption. Requires elevation > 0 whenever
// zenith_atm_loss_db > 0 (the airmass diverges at the horizon).
double static_loss_db(const PassSample& sample, double divergence_full_angle_rad,
                      const StationConfig& station, double zenith_atm_loss_db);

// CSV with header `t_s,elevation_deg,azimuth_deg,slant_range_km`.
void write_pass_csv(std::ostream& out, const std::vector<PassSample>& pass);

} // namespace skylink

#endif
