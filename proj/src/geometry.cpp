#include "qkdring/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"

namespace qkdring::geometry {

void ConstellationSpec::validate() const {
    require(num_sats >= 3, "constellation.num_sats must be >= 3 (got " + std::to_string(num_sats) + ")");
    require(altitude_km > 0.0, "constellation.altitude_km must be > 0");
    require(atm_shell_km >= 0.0, "constellation.atm_shell_km must be >= 0");
    require(altitude_km > atm_shell_km, "constellation orbit must lie above the atmospheric shell (altitude_km > atm_shell_km)");
    require(std::isfinite(epoch_s) && std::isfinite(initial_phase_deg), "constellation epoch/phase must be finite");
}

double ConstellationSpec::orbit_radius_km() const { return kEarthRadiusKm + altitude_km; }

double ConstellationSpec::mean_motion() const {
    const double r = orbit_radius_km();
    return std::sqrt(kEarthMuKm3PerS2 / (r * r * r));
}

double ConstellationSpec::period_s() const { return kTwoPi / mean_motion(); }

void GroundStation::validate() const {
    require(latitude_deg >= -90.0 && latitude_deg <= 90.0, "ground station latitude must lie in [-90, 90]");
    require(longitude_deg >= -180.0 && longitude_deg < 180.0, "ground station longitude must lie in [-180, 180)");
}

Vec3 GroundStation::zenith(double t_s) const {
    const double lat = latitude_deg * kDegToRad;
    const double lon = longitude_deg * kDegToRad + kEarthRotationRadPerS * t_s;
    return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

Vec3 GroundStation::position_km(double t_s) const { return zenith(t_s) * kEarthRadiusKm; }

SatellitePosition propagate_one(const ConstellationSpec& spec, int sat_index, double t_s) {
    const double r = spec.orbit_radius_km();
    const double slot = kTwoPi * static_cast<double>(sat_index) / static_cast<double>(spec.num_sats);
    const double u = spec.initial_phase_deg * kDegToRad + spec.mean_motion() * (t_s - spec.epoch_s);

    Vec3 p;
    if (spec.kind == ConstellationKind::Type1Polar) {
        // plane RAAN = slot, inclination 90 deg
        p = {std::cos(slot) * std::cos(u), std::sin(slot) * std::cos(u), std::sin(u)};
    } else {
        const double phase = u + slot;
        p = {std::cos(phase), std::sin(phase), 0.0};
    }
    return {sat_index, p * r, t_s};
}

std::vector<SatellitePosition> propagate(const ConstellationSpec& spec, double t_s) {
    spec.validate();
    require(t_s >= spec.epoch_s, "propagation time precedes the constellation epoch");
    std::vector<SatellitePosition> out;
    out.reserve(static_cast<std::size_t>(spec.num_sats));
    for (int i = 0; i < spec.num_sats; ++i) out.push_back(propagate_one(spec, i, t_s));
    return out;
}

double intersat_clearance(const SatellitePosition& a, const SatellitePosition& b) {
    const Vec3 d = b.position_km - a.position_km;
    const double len2 = dot(d, d);
    if (!(len2 > 0.0)) throw ValidationError("intersat_clearance: coincident satellite positions");
    // foot of the perpendicular from the origin, parameterised along a -> b
    const double s = -dot(a.position_km, d) / len2;
    if (s <= 0.0 || s >= 1.0) return std::min(norm(a.position_km), norm(b.position_km));
    return norm(cross(a.position_km, b.position_km)) / std::sqrt(len2);
}

bool has_line_of_sight(const SatellitePosition& a, const SatellitePosition& b, double atm_shell_km) {
    return intersat_clearance(a, b) > kEarthRadiusKm + atm_shell_km;
}

int min_ring_size(double altitude_km, double atm_shell_km) {
    require(atm_shell_km >= 0.0, "min_ring_size: atm_shell_km must be >= 0");
    require(altitude_km > atm_shell_km, "min_ring_size: altitude must exceed the atmospheric shell");
    const double r = kEarthRadiusKm + altitude_km;
    const double limit = kEarthRadiusKm + atm_shell_km;
    for (int n = 3;; ++n) {
        if (r * std::cos(kPi / n) > limit) return n;
    }
}

double ring_chord_km(double radius_km, int num_sats, int ring_distance) {
    return 2.0 * radius_km * std::sin(kPi * ring_distance / num_sats);
}

double zenith_angle(const SatellitePosition& sat, const GroundStation& gs, double t_s) {
    const Vec3 n = gs.zenith(t_s);
    const Vec3 los = sat.position_km - n * kEarthRadiusKm;
    const double range = norm(los);
    if (!(range > 0.0)) throw ValidationError("zenith_angle: satellite coincides with the ground station");
    const double c = std::clamp(dot(los, n) / range, -1.0, 1.0);
    return std::acos(c) * kRadToDeg;
}

ServingState serving_satellite(const ConstellationSpec& spec, const GroundStation& gs, double t_s,
                               double max_zenith_deg) {
    ServingState best;
    for (int i = 0; i < spec.num_sats; ++i) {
        const double z = zenith_angle(propagate_one(spec, i, t_s), gs, t_s);
        if (z <= max_zenith_deg && z < best.zenith_deg) best = {i, z};
    }
    return best;
}

namespace {

// Locates the instant in (lo, hi] where the serving satellite stops being
// `before`.
double bisect_transition(const ConstellationSpec& spec, const GroundStation& gs, double lo, double hi, int before,
                         double max_zenith_deg, double tol) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (serving_satellite(spec, gs, mid, max_zenith_deg).sat == before)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double refine_min_zenith(const ConstellationSpec& spec, const GroundStation& gs, int sat, double lo, double hi) {
    auto f = [&](double t) { return zenith_angle(propagate_one(spec, sat, t), gs, t); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 60 && b - a > 1e-6; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - g * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + g * (b - a); fd = f(d);
        }
    }
    return std::min({fc, fd, f(lo), f(hi)});
}

}  // namespace

std::vector<VisibilitySession> find_sessions(const ConstellationSpec& spec, const GroundStation& gs, double t0_s,
                                             double t1_s, double dt_s, double max_zenith_deg) {
    spec.validate();
    gs.validate();
    require(t1_s > t0_s, "find_sessions: t1 must exceed t0");
    require(dt_s > 0.0, "find_sessions: dt must be positive");
    const double tol = dt_s / 128.0;

    std::vector<VisibilitySession> sessions;
    VisibilitySession open;
    bool is_open = false;
    double open_min_t = 0.0;

    auto close = [&](double t_end) {
        open.t_end_s = t_end;
        const double lo = std::max(open.t_start_s, open_min_t - dt_s);
        const double hi = std::min(open.t_end_s, open_min_t + dt_s);
        open.min_zenith_deg = std::min(open.min_zenith_deg, refine_min_zenith(spec, gs, open.serving_sat, lo, hi));
        if (open.t_end_s > open.t_start_s) sessions.push_back(open);
        is_open = false;
    };

    ServingState prev = serving_satellite(spec, gs, t0_s, max_zenith_deg);
    double prev_t = t0_s;
    if (prev.sat >= 0) {
        open = {gs.id, t0_s, t0_s, prev.sat, prev.zenith_deg};
        open_min_t = t0_s;
        is_open = true;
    }

    const auto steps = static_cast<long long>(std::ceil((t1_s - t0_s) / dt_s));
    for (long long n = 1; n <= steps; ++n) {
        const double t = std::min(t1_s, t0_s + static_cast<double>(n) * dt_s);
        const ServingState cur = serving_satellite(spec, gs, t, max_zenith_deg);
        if (cur.sat != prev.sat) {
            const double edge = bisect_transition(spec, gs, prev_t, t, prev.sat, max_zenith_deg, tol);
            if (is_open) close(edge);
            if (cur.sat >= 0) {
                open = {gs.id, edge, edge, cur.sat, cur.zenith_deg};
                open_min_t = t;
                is_open = true;
            }
        } else if (is_open && cur.zenith_deg < open.min_zenith_deg) {
            open.min_zenith_deg = cur.zenith_deg;
            open_min_t = t;
        }
        prev = cur;
        prev_t = t;
    }
    if (is_open) close(t1_s);
    return sessions;
}

double visibility_fraction(const std::vector<VisibilitySession>& sessions, double t_total_s) {
    require(t_total_s > 0.0, "visibility_fraction: T_total must be positive");
    double covered = 0.0;
    for (const auto& s : sessions) covered += s.duration_s();
    return std::clamp(covered / t_total_s, 0.0, 1.0);
}

double slant_range_km(double altitude_km, double zenith_deg) {
    const double r = kEarthRadiusKm + altitude_km;
    const double z = zenith_deg * kDegToRad;
    const double s = std::sin(z);
    return std::sqrt(r * r - kEarthRadiusKm * kEarthRadiusKm * s * s) - kEarthRadiusKm * std::cos(z);
}

void write_positions_csv(std::ostream& out, const std::vector<SatellitePosition>& positions) {
    out << "time_s,sat_index,x_km,y_km,z_km\n";
    for (const auto& p : positions) {
        out << fmt::format("{:.17g},{},{:.17g},{:.17g},{:.17g}\n", p.time_s, p.sat_index, p.position_km.x,
                           p.position_km.y, p.position_km.z);
    }
}

}  // namespace qkdring::geometry
