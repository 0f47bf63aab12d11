#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"
#include "qkdring/geometry.hpp"

using namespace qkdring;
using namespace qkdring::geometry;

namespace {

ConstellationSpec random_spec(gen::Rng& g) {
    ConstellationSpec s;
    s.kind = g.coin() ? ConstellationKind::Type1Polar : ConstellationKind::Type2Equatorial;
    s.num_sats = g.integer(3, 60);
    s.altitude_km = g.uniform(200.0, 2000.0);
    s.initial_phase_deg = g.uniform(0.0, 360.0);
    return s;
}

double latitude_deg(const Vec3& p) { return std::asin(p.z / norm(p)) * kRadToDeg; }

// Adjacent chords all clear the shell at every sampled instant of one period.
bool ring_clears(ConstellationKind kind, int n, double h, double shell) {
    ConstellationSpec s;
    s.kind = kind;
    s.num_sats = n;
    s.altitude_km = h;
    s.atm_shell_km = shell;
    const double period = s.period_s();
    for (int step = 0; step < 360; ++step) {
        const double t = period * (step + 0.37) / 360.0;
        const auto pos = propagate(s, t);
        for (int i = 0; i < n; ++i)
            if (!has_line_of_sight(pos[i], pos[(i + 1) % n], shell)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("propagated radius is conserved") {
    gen::Rng g(11);
    for (int trial = 0; trial < 300; ++trial) {
        const ConstellationSpec s = random_spec(g);
        const double t = g.uniform(0.0, 5e5);
        for (const auto& p : propagate(s, t))
            CHECK(std::abs(norm(p.position_km) - s.orbit_radius_km()) <= 1e-6 * s.orbit_radius_km());
    }
}

TEST_CASE("type-1 satellites share a common latitude") {
    gen::Rng g(12);
    for (int trial = 0; trial < 200; ++trial) {
        ConstellationSpec s = random_spec(g);
        s.kind = ConstellationKind::Type1Polar;
        const auto pos = propagate(s, g.uniform(0.0, 1e5));
        const double lat0 = latitude_deg(pos.front().position_km);
        for (const auto& p : pos) CHECK(std::abs(latitude_deg(p.position_km) - lat0) <= 1e-9);
    }
}

TEST_CASE("ring chord matches propagated separation") {
    gen::Rng g(13);
    for (int trial = 0; trial < 100; ++trial) {
        ConstellationSpec s = random_spec(g);
        s.kind = ConstellationKind::Type2Equatorial;
        const auto pos = propagate(s, g.uniform(0.0, 1e4));
        const int d = g.integer(1, s.num_sats - 1);
        const double direct = norm(pos[0].position_km - pos[d].position_km);
        CHECK(ring_chord_km(s.orbit_radius_km(), s.num_sats, d) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("clearance of a chord") {
    const SatellitePosition a{0, {7000.0, 0.0, 0.0}, 0.0};
    const SatellitePosition b{1, {0.0, 7000.0, 0.0}, 0.0};
    CHECK(intersat_clearance(a, b) == doctest::Approx(7000.0 / std::sqrt(2.0)));
    // perpendicular foot outside the segment: nearer endpoint radius
    const SatellitePosition c{2, {7000.0, 100.0, 0.0}, 0.0};
    const SatellitePosition d{3, {9000.0, 100.0, 0.0}, 0.0};
    CHECK(intersat_clearance(c, d) == doctest::Approx(norm(c.position_km)));
    CHECK_THROWS_AS(intersat_clearance(a, a), ValidationError);
}

TEST_CASE("min_ring_size agrees with brute-force clearance") {
    for (double h : {500.0, 800.0}) {
        const int n_min = min_ring_size(h, 100.0);
        for (int n = 3; n <= 40; ++n) {
            CAPTURE(n);
            const bool ok = ring_clears(ConstellationKind::Type2Equatorial, n, h, 100.0);
            CHECK(ok == (n >= n_min));
        }
    }
    CHECK(min_ring_size(500.0, 100.0) == 10);
}

TEST_CASE("rings at or above the minimum size persist for both types") {
    const int n_min = min_ring_size(500.0, 100.0);
    for (int n : {n_min, n_min + 1, 16, 24}) {
        CHECK(ring_clears(ConstellationKind::Type1Polar, n, 500.0, 100.0));
        CHECK(ring_clears(ConstellationKind::Type2Equatorial, n, 500.0, 100.0));
    }
}

TEST_CASE("slant range against the law of cosines") {
    gen::Rng g(14);
    for (int trial = 0; trial < 200; ++trial) {
        const double h = g.uniform(200.0, 2000.0);
        const double z = g.uniform(0.0, 89.0);
        const double L = slant_range_km(h, z);
        // |r_sat|^2 = R^2 + L^2 + 2 R L cos(z)
        const double r = kEarthRadiusKm + h;
        CHECK(kEarthRadiusKm * kEarthRadiusKm + L * L + 2.0 * kEarthRadiusKm * L * std::cos(z * kDegToRad) ==
              doctest::Approx(r * r).epsilon(1e-12));
    }
    CHECK(slant_range_km(500.0, 0.0) == doctest::Approx(500.0));
}

TEST_CASE("overhead satellite has zero zenith angle") {
    ConstellationSpec s;
    s.kind = ConstellationKind::Type2Equatorial;
    s.num_sats = 12;
    GroundStation gs{1, 0.0, 0.0};
    const auto p = propagate_one(s, 0, 0.0);
    CHECK(zenith_angle(p, gs, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(norm(gs.zenith(1234.0)) == doctest::Approx(1.0));
}

TEST_CASE("sessions are maximal") {
    gen::Rng g(15);
    for (int trial = 0; trial < 12; ++trial) {
        ConstellationSpec s = random_spec(g);
        s.altitude_km = 500.0;
        s.num_sats = g.integer(4, 30);
        GroundStation gs{1, g.uniform(-60.0, 60.0), g.uniform(-180.0, 179.0)};
        const double t0 = 0.0, t1 = 20000.0, dt = 5.0;
        const auto sessions = find_sessions(s, gs, t0, t1, dt);
        const double probe = 2.0 * dt / 128.0;
        for (const auto& ses : sessions) {
            CHECK(ses.t_end_s > ses.t_start_s);
            const double mid = 0.5 * (ses.t_start_s + ses.t_end_s);
            CHECK(serving_satellite(s, gs, mid).sat == ses.serving_sat);
            if (ses.t_start_s - probe > t0) CHECK(serving_satellite(s, gs, ses.t_start_s - probe).sat != ses.serving_sat);
            if (ses.t_end_s + probe < t1) CHECK(serving_satellite(s, gs, ses.t_end_s + probe).sat != ses.serving_sat);
            CHECK(ses.min_zenith_deg <= kDefaultMaxZenithDeg + 1e-9);
        }
        for (std::size_t j = 1; j < sessions.size(); ++j) CHECK(sessions[j].t_start_s >= sessions[j - 1].t_end_s - 1e-9);
        const double rho = visibility_fraction(sessions, t1 - t0);
        CHECK(rho >= 0.0);
        CHECK(rho <= 1.0);
    }
}

TEST_CASE("zenith pass lasts about five minutes") {
    ConstellationSpec s;
    s.kind = ConstellationKind::Type1Polar;
    s.num_sats = 3;
    GroundStation gs{1, 0.0, 0.0};
    // satellite 0 crosses the station's meridian overhead at t = 0
    const auto sessions = find_sessions(s, gs, -1000.0, 1000.0, 1.0);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].duration_s() > 280.0);
    CHECK(sessions[0].duration_s() < 310.0);
}

TEST_CASE("invalid inputs are rejected") {
    ConstellationSpec s;
    s.num_sats = 2;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.num_sats = 12;
    s.atm_shell_km = 600.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    GroundStation gs{1, 95.0, 0.0};
    CHECK_THROWS_AS(gs.validate(), ValidationError);
    gs = {1, 0.0, 180.0};
    CHECK_THROWS_AS(gs.validate(), ValidationError);
}
