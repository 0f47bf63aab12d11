// Ring constellation geometry: propagation, line-of-sight tests and
// ground-station visibility sessions.
//
// Units at this interface: km, seconds, degrees. Orbits are circular
// two-body Keplerian; ground stations sit on a spherical Earth that rotates
// at the sidereal rate, with the inertial and Earth-fixed frames aligned at
// t = 0.
#pragma once

#include <iosfwd>
#include <vector>

#include "qkdring/vec3.hpp"

namespace qkdring::geometry {

enum class ConstellationKind {
    Type1Polar,       // one satellite per polar plane, common argument of latitude
    Type2Equatorial,  // all satellites in one equatorial orbit
};

struct ConstellationSpec {
    ConstellationKind kind = ConstellationKind::Type2Equatorial;
    int num_sats = 12;
    double altitude_km = 500.0;
    double epoch_s = 0.0;
    double atm_shell_km = 100.0;
    // Argument of latitude (Type-1) or along-track phase of satellite 0
    // (Type-2) at the epoch.
    double initial_phase_deg = 0.0;

    void validate() const;
    double orbit_radius_km() const;
    /// Orbital angular rate, rad/s.
    double mean_motion() const;
    double period_s() const;
};

struct SatellitePosition {
    int sat_index = 0;
    Vec3 position_km;
    double time_s = 0.0;
};

struct GroundStation {
    int id = 1;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;

    void validate() const;
    /// Local zenith unit vector in the inertial frame at time t.
    Vec3 zenith(double t_s) const;
    Vec3 position_km(double t_s) const;
};

struct VisibilitySession {
    int gs_id = 0;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    int serving_sat = -1;
    double min_zenith_deg = 0.0;

    double duration_s() const { return t_end_s - t_start_s; }
};

inline constexpr double kDefaultMaxZenithDeg = 70.0;

std::vector<SatellitePosition> propagate(const ConstellationSpec& spec, double t_s);
SatellitePosition propagate_one(const ConstellationSpec& spec, int sat_index, double t_s);

/// Minimum distance from the Earth's centre to the segment joining a and b.
/// Equals |a x b| / |a - b| when the perpendicular foot lies inside the
/// segment, otherwise the nearer endpoint radius. Throws on coincident points.
double intersat_clearance(const SatellitePosition& a, const SatellitePosition& b);

bool has_line_of_sight(const SatellitePosition& a, const SatellitePosition& b, double atm_shell_km);

/// Smallest ring size whose adjacent chords clear R_E + h_atm.
int min_ring_size(double altitude_km, double atm_shell_km);

/// Chord length between ring members `ring_distance` apart on a circle of
/// radius R with N equally spaced members.
double ring_chord_km(double radius_km, int num_sats, int ring_distance);

/// Zenith angle (degrees, in [0, 180]) of a satellite seen from a ground station.
double zenith_angle(const SatellitePosition& sat, const GroundStation& gs, double t_s);

/// Serving satellite (argmin zenith among visible ones, lowest index on ties)
/// or -1 when none is visible.
struct ServingState {
    int sat = -1;
    double zenith_deg = 180.0;
};
ServingState serving_satellite(const ConstellationSpec& spec, const GroundStation& gs, double t_s,
                               double max_zenith_deg = kDefaultMaxZenithDeg);

/// Maximal intervals with a constant visible serving satellite, in time order.
/// Edges are refined by bisection to dt/128.
std::vector<VisibilitySession> find_sessions(const ConstellationSpec& spec, const GroundStation& gs, double t0_s,
                                             double t1_s, double dt_s,
                                             double max_zenith_deg = kDefaultMaxZenithDeg);

double visibility_fraction(const std::vector<VisibilitySession>& sessions, double t_total_s);

/// Slant range from a ground station to a satellite at the given zenith angle.
double slant_range_km(double altitude_km, double zenith_deg);

void write_positions_csv(std::ostream& out, const std::vector<SatellitePosition>& positions);

}  // namespace qkdring::geometry
