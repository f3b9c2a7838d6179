// Independent two-body pass oracle. Integrates the equations of motion
// numerically instead of using the simulator's closed-form geometry, so the
// two can cross-check each other.

#ifndef SKYLINK_TESTS_ORBIT_ORACLE_HPP
#define SKYLINK_TESTS_ORBIT_ORACLE_HPP

namespace oracles {

// Seconds spent above `mask_deg` elevation for a circular pass culminating
// at `max_elevation_deg`, from RK4 integration of r'' = -mu r / |r|^3.
double pass_duration_two_body_s(double altitude_km, double max_elevation_deg,
                                double mask_deg, double earth_radius_km,
                                double step_s);

} // namespace oracles

#endif
