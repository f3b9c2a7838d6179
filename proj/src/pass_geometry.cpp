#include "skylink/pass_geometry.hpp"

#include <cmath>
#include <ostream>

#include "skylink/errors.hpp"

namespace skylink {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMuEarth_m3s2 = 3.986004418e14;

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

// Earth-central angle between station and sub-satellite point at a given
// elevation, from the law of sines in the station/satellite/center triangle.
double central_angle_rad(double elevation_deg, const OrbitConfig& orbit) {
    double e = deg2rad(elevation_deg);
    double r = slant_range_km(elevation_deg, orbit);
    double s = r * std::cos(e) / (orbit.earth_radius_km + orbit.altitude_km);
    if (s > 1.0) s = 1.0;
    return std::asin(s);
}
} // namespace

void OrbitConfig::validate() const {
    if (!(altitude_km > 0.0))
        throw ConfigError("orbit.altitude_km must be > 0");
    if (!(max_elevation_deg > 0.0) || max_elevation_deg > 90.0)
        throw ConfigError("orbit.max_elevation_deg must lie in (0, 90]");
    if (!(earth_radius_km > 0.0))
        throw ConfigError("orbit.earth_radius_km must be > 0");
}

void StationConfig::validate() const {
    if (!(aperture_diameter_m > 0.0))
        throw ConfigError("station.aperture_diameter_m must be > 0");
    if (elevation_mask_deg < 0.0)
        throw ConfigError("station.elevation_mask_deg must be >= 0");
    if (uplink_beam_count < 1)
        throw ConfigError("station.uplink_beam_count must be >= 1");
}

double slant_range_km(double elevation_deg, const OrbitConfig& orbit) {
    orbit.validate();
    if (elevation_deg < 0.0 || elevation_deg > 90.0)
        throw DomainError("slant_range: elevation outside [0, 90] deg");
    double re = orbit.earth_radius_km;
    double h = orbit.altitude_km;
    double se = std::sin(deg2rad(elevation_deg));
    return std::sqrt(re * se * re * se + 2.0 * re * h + h * h) - re * se;
}

double orbital_rate_rad_s(const OrbitConfig& orbit) {
    double a_m = (orbit.earth_radius_km + orbit.altitude_km) * 1000.0;
    return std::sqrt(kMuEarth_m3s2 / (a_m * a_m * a_m));
}

std::vector<PassSample> propagate_pass(const OrbitConfig& orbit,
                                       const StationConfig& station,
                                       double step_s) {
    orbit.validate();
    station.validate();
    if (!(step_s > 0.0))
        throw ConfigError("propagate_pass: step_s must be > 0");

    std::vector<PassSample> out;
    if (orbit.max_elevation_deg < station.elevation_mask_deg)
        return out; // pass never clears the mask: no visibility

    // Ground track modeled as a great circle offset from the station by the
    // culmination central angle beta0; cos(beta(t)) = cos(beta0) cos(w t).
    double beta0 = central_angle_rad(orbit.max_elevation_deg, orbit);
    double beta_mask = central_angle_rad(station.elevation_mask_deg, orbit);
    double w = orbital_rate_rad_s(orbit);

    double ratio = std::cos(beta_mask) / std::cos(beta0);
    if (ratio > 1.0) ratio = 1.0;
    double t_half = std::acos(ratio) / w;
    auto half_steps = static_cast<long>(std::floor(t_half / step_s + 1e-12));

    double re = orbit.earth_radius_km;
    double rs = re + orbit.altitude_km;
    double cb0 = std::cos(beta0);
    double sb0 = std::sin(beta0);
    double mask = station.elevation_mask_deg;

    out.reserve(static_cast<std::size_t>(2 * half_steps + 1));
    for (long k = -half_steps; k <= half_steps; ++k) {
        double t = static_cast<double>(k) * step_s;
        double c = std::cos(w * t);
        double s = std::sin(w * t);
        // Satellite on the unit sphere; station at (1,0,0) with local
        // east = (0,1,0), north = (0,0,1).
        double px = cb0 * c, py = sb0 * c, pz = s;
        double vx = rs * px - re, vy = rs * py, vz = rs * pz;
        double range = std::sqrt(vx * vx + vy * vy + vz * vz);
        double elev = rad2deg(std::asin(vx / range));
        if (elev < mask)
            continue;
        double az = rad2deg(std::atan2(vy, vz));
        if (az < 0.0) az += 360.0;
        out.push_back({static_cast<double>(k + half_steps) * step_s, elev, az, range});
    }
    return out;
}

double static_loss_db(const PassSample& sample, double divergence_full_angle_rad,
                      const StationConfig& station, double zenith_atm_loss_db) {
    if (!(divergence_full_angle_rad > 0.0))
        throw DomainError("static_loss_db: divergence must be > 0");
    if (!(sample.slant_range_km > 0.0))
        throw DomainError("static_loss_db: slant range must be > 0");
    if (zenith_atm_loss_db < 0.0)
        throw DomainError("static_loss_db: zenith_atm_loss_db must be >= 0");

    double footprint_m = divergence_full_angle_rad * sample.slant_range_km * 1000.0;
    double capture = station.aperture_diameter_m / footprint_m;
    if (capture > 1.0) capture = 1.0;
    double geometric_db = -20.0 * std::log10(capture);

    double atmospheric_db = 0.0;
    if (zenith_atm_loss_db > 0.0) {
        if (sample.elevation_deg <= 0.0)
            throw DomainError("static_loss_db: airmass undefined at elevation <= 0");
        atmospheric_db = zenith_atm_loss_db / std::sin(deg2rad(sample.elevation_deg));
    }
    return geometric_db + atmospheric_db;
}

void write_pass_csv(std::ostream& out, const std::vector<PassSample>& pass) {
    out << "t_s,elevation_deg,azimuth_deg,slant_range_km\n";
    for (const auto& p : pass) {
        out << p.t_s << ',' << p.elevation_deg << ',' << p.azimuth_deg << ','
            << p.slant_range_km << '\n';
    }
}

} // namespace skylink
