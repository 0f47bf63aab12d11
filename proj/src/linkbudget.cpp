#include "qkdring/linkbudget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"

namespace qkdring::linkbudget {

void OpticalParams::validate() const {
    require(wavelength_m > 0.0, "optics.wavelength must be > 0");
    require(beam_divergence_rad > 0.0, "optics.beam_divergence must be > 0");
    require(gs_tx_diameter_m > 0.0 && sat_tx_diameter_m > 0.0 && sat_rx_diameter_m > 0.0,
            "optics aperture diameters must be > 0");
    require(gs_beam_waist_m > 0.0, "optics.gs_beam_waist must be > 0");
    require(pointing_jitter_rad >= 0.0, "optics.pointing_jitter must be >= 0");
    require(optics_efficiency > 0.0 && optics_efficiency <= 1.0, "optics.optics_efficiency must lie in (0, 1]");
    require(atm_attenuation_db_per_km >= 0.0, "optics.atm_attenuation_db_per_km must be >= 0");
    require(extinction_layer_km >= 0.0, "optics.extinction_layer_km must be >= 0");
    require(max_zenith_deg > 0.0 && max_zenith_deg < 90.0, "optics.max_zenith_deg must lie in (0, 90)");
}

void TurbulenceProfile::validate() const {
    require(wind_speed_mps >= 0.0, "turbulence.wind_speed_mps must be >= 0");
    require(cn2_ground >= 0.0, "turbulence.cn2_ground must be >= 0");
    require(gs_altitude_m >= 0.0, "turbulence.gs_altitude_m must be >= 0");
    require(top_altitude_m > gs_altitude_m, "turbulence.top_altitude_m must exceed the station altitude");
}

double to_db(double efficiency) { return -10.0 * std::log10(efficiency); }
double from_db(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

double free_space_loss(double wavelength_m, double path_m) {
    require(wavelength_m > 0.0 && path_m > 0.0, "free_space_loss: wavelength and path must be positive");
    const double x = wavelength_m / (4.0 * kPi * path_m);
    return x * x;
}

AntennaGains antenna_gains(const OpticalParams& params) {
    params.validate();
    const double div = params.beam_divergence_rad;
    const double radius = 0.5 * params.sat_rx_diameter_m;
    const double area = kPi * radius * radius;
    const double lam = params.wavelength_m;
    return {8.0 / (div * div), 4.0 * kPi * area / (lam * lam)};
}

double cn2(double h, const TurbulenceProfile& p) {
    if (!p.enabled) return 0.0;
    const double v = p.wind_speed_mps / 27.0;
    const double x = 1e-5 * h;
    const double x2 = x * x, x4 = x2 * x2, x8 = x4 * x4;
    return 0.00594 * v * v * x8 * x2 * std::exp(-h / 1000.0) + 2.7e-16 * std::exp(-h / 1500.0) +
           p.cn2_ground * std::exp(-h / 100.0);
}

double cn2_path_integral(const TurbulenceProfile& profile, double top_m) {
    profile.validate();
    if (!profile.enabled) return 0.0;
    const double h0 = profile.gs_altitude_m;
    require(top_m > h0, "turbulence integral: upper limit must exceed the station altitude");
    using Integrator = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto f = [&](double h) { return cn2(h, profile); };
    // break at the ground-layer and tropopause scale heights
    const double cuts[] = {h0, h0 + 500.0, h0 + 2000.0, 8000.0, 15000.0, top_m};
    double total = 0.0;
    double lo = h0;
    for (double hi : cuts) {
        hi = std::min(hi, top_m);
        if (hi <= lo) continue;
        total += Integrator::integrate(f, lo, hi, 15, 1e-9);
        lo = hi;
    }
    return total;
}

namespace {

double r0_from_integral(double integral, double wavelength_m, double zenith_rad) {
    if (!(integral > 0.0)) return std::numeric_limits<double>::infinity();
    const double k = kTwoPi / wavelength_m;
    return std::pow(0.423 * k * k * integral / std::cos(zenith_rad), -3.0 / 5.0);
}

}  // namespace

double fried_r0(const TurbulenceProfile& profile, double wavelength_m, double zenith_rad, double top_m) {
    require(zenith_rad >= 0.0 && zenith_rad < kPi / 2.0, "fried_r0: zenith angle must lie in [0, 90) deg");
    require(wavelength_m > 0.0, "fried_r0: wavelength must be positive");
    return r0_from_integral(cn2_path_integral(profile, top_m), wavelength_m, zenith_rad);
}

UplinkModel::UplinkModel(OpticalParams params, TurbulenceProfile profile, double sat_altitude_m)
    : params_(params), profile_(profile), altitude_m_(sat_altitude_m) {
    params_.validate();
    profile_.validate();
    require(sat_altitude_m > 0.0, "uplink: satellite altitude must be positive");
    zenith_integral_ = cn2_path_integral(profile_, profile_.top_altitude_m);
}

double UplinkModel::fried_r0(double zenith_rad) const {
    return r0_from_integral(zenith_integral_, params_.wavelength_m, zenith_rad);
}

UplinkBreakdown UplinkModel::evaluate(double zenith_rad) const {
    const double max_zenith = params_.max_zenith_deg * kDegToRad;
    if (!(zenith_rad >= 0.0) || zenith_rad > max_zenith + 1e-12)
        throw ValidationError(fmt::format("uplink: zenith angle {:.6g} deg outside [0, {:.6g}] deg",
                                          zenith_rad * kRadToDeg, params_.max_zenith_deg));
    const double lam = params_.wavelength_m;
    const double sec = 1.0 / std::cos(zenith_rad);

    UplinkBreakdown b;
    b.slant_range_m = 1e3 * geometry::slant_range_km(altitude_m_ * 1e-3, zenith_rad * kRadToDeg);
    b.optics = params_.optics_efficiency;
    b.extinction = std::pow(from_db(params_.zenith_extinction_db()), sec);
    b.free_space = free_space_loss(lam, b.slant_range_m);
    const AntennaGains g = antenna_gains(params_);
    b.gain_tx = g.transmit;
    b.gain_rx = g.receive;

    // Long-term beam: diffraction spread of the station beam plus the
    // turbulent spread 2.1 lambda L / (pi r0) (diameter, halved to a radius).
    b.fried_r0_m = fried_r0(zenith_rad);
    if (std::isfinite(b.fried_r0_m)) {
        const double w0 = params_.gs_beam_waist_m;
        const double zr = kPi * w0 * w0 / lam;
        const double L = b.slant_range_m;
        const double w_diff2 = w0 * w0 * (1.0 + (L / zr) * (L / zr));
        const double spread = 0.5 * 2.1 * lam * L / (kPi * b.fried_r0_m);
        const double w_lt2 = w_diff2 + spread * spread;
        const double a = 0.5 * params_.sat_rx_diameter_m;
        b.turbulence = -std::expm1(-2.0 * a * a / w_lt2) / -std::expm1(-2.0 * a * a / w_diff2);
    } else {
        b.turbulence = 1.0;
    }
    b.total = b.optics * b.extinction * b.free_space * b.gain_tx * b.gain_rx * b.turbulence;
    return b;
}

double uplink_efficiency(double zenith_rad, double sat_altitude_m, const OpticalParams& params,
                         const TurbulenceProfile& profile) {
    return UplinkModel(params, profile, sat_altitude_m).efficiency(zenith_rad);
}

IslBreakdown isl_breakdown(double path_m, const OpticalParams& params) {
    params.validate();
    require(path_m > 0.0, "isl_efficiency: path length must be positive");
    const double lam = params.wavelength_m;
    const double w0 = lam / (kPi * 0.5 * params.beam_divergence_rad);
    const double zr = kPi * w0 * w0 / lam;
    const double a = 0.5 * params.sat_rx_diameter_m;

    IslBreakdown b;
    b.beam_radius_m = w0 * std::sqrt(1.0 + (path_m / zr) * (path_m / zr));
    b.geometric = -std::expm1(-2.0 * (a / b.beam_radius_m) * (a / b.beam_radius_m));
    const AntennaGains g = antenna_gains(params);
    const double s2 = params.pointing_jitter_rad * params.pointing_jitter_rad;
    b.pointing = std::exp(-g.transmit * s2) * std::exp(-g.receive * s2);
    b.optics = params.optics_efficiency;
    b.total = b.optics * b.geometric * b.pointing;
    return b;
}

double isl_efficiency(double path_m, const OpticalParams& params) { return isl_breakdown(path_m, params).total; }

std::vector<LossSample> session_loss_profile(const geometry::VisibilitySession& session,
                                             const geometry::ConstellationSpec& spec,
                                             const geometry::GroundStation& gs, const UplinkModel& uplink,
                                             double dt_s) {
    require(dt_s > 0.0, "session_loss_profile: dt must be positive");
    require(session.t_end_s > session.t_start_s, "session_loss_profile: empty session");
    std::vector<LossSample> out;
    const double span = session.duration_s();
    const auto n = static_cast<long long>(std::ceil(span / dt_s - 1e-9));
    out.reserve(static_cast<std::size_t>(n));
    const double max_zenith = uplink.params().max_zenith_deg;
    for (long long j = 0; j < n; ++j) {
        const double a = session.t_start_s + static_cast<double>(j) * dt_s;
        const double b = std::min(session.t_end_s, a + dt_s);
        const double t = 0.5 * (a + b);
        const auto sat = geometry::propagate_one(spec, session.serving_sat, t);
        const double z = std::min(geometry::zenith_angle(sat, gs, t), max_zenith);
        LossSample s;
        s.time_s = t;
        s.zenith_deg = z;
        s.path_length_km = geometry::slant_range_km(spec.altitude_km, z);
        s.efficiency = uplink.efficiency(z * kDegToRad);
        s.loss_db = to_db(s.efficiency);
        s.duration_s = b - a;
        out.push_back(s);
    }
    return out;
}

TfLinkEfficiency effective_tf_link(double ul, double isl, TfLinkMode mode) {
    require(ul > 0.0 && ul <= 1.0 && isl > 0.0 && isl <= 1.0, "effective_tf_link: efficiencies must lie in (0, 1]");
    if (mode == TfLinkMode::LiteralMax) {
        const double e = std::max(ul, isl);
        const double arm = std::sqrt(e);
        return {e, arm, arm};
    }
    return {ul * isl, ul, isl};
}

void write_loss_csv(std::ostream& out, const std::vector<LossSample>& samples) {
    out << "time_s,zenith_deg,path_km,loss_db\n";
    for (const auto& s : samples)
        out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", s.time_s, s.zenith_deg, s.path_length_km, s.loss_db);
}

}  // namespace qkdring::linkbudget
