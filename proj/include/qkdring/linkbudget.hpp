// Optical channel efficiencies for ground-to-satellite uplinks and
// inter-satellite links.
//
// Everything here is SI (metres, radians). Efficiencies are linear power
// transmittances in (0, 1]; loss_db = -10 log10(efficiency).
//
// Beam convention: beam_divergence_rad is the FULL far-field 1/e^2
// divergence angle, so a Gaussian beam of waist w0 has
// divergence = 2 * lambda / (pi * w0) and far-field radius w(L) ~ (divergence / 2) * L.
// The transmitter gain G_t = 8 / divergence^2 uses the same full angle.
#pragma once

#include <iosfwd>
#include <vector>

#include "qkdring/geometry.hpp"

namespace qkdring::linkbudget {

struct OpticalParams {
    double wavelength_m = 850e-9;
    double beam_divergence_rad = 15e-6;
    double gs_tx_diameter_m = 0.54;
    double sat_tx_diameter_m = 0.30;
    double sat_rx_diameter_m = 0.30;
    double gs_beam_waist_m = 0.27;
    double pointing_jitter_rad = 1e-6;
    double optics_efficiency = 0.5;
    // Specific extinction, integrated over an equivalent homogeneous layer of
    // `extinction_layer_km` along the vertical; scaled by sec(zenith).
    double atm_attenuation_db_per_km = 1.55;
    double extinction_layer_km = 20.0;
    double max_zenith_deg = 70.0;

    void validate() const;
    double zenith_extinction_db() const { return atm_attenuation_db_per_km * extinction_layer_km; }
};

enum class TurbulenceModel { HufnagelValley };

struct TurbulenceProfile {
    TurbulenceModel model = TurbulenceModel::HufnagelValley;
    bool enabled = true;
    double wind_speed_mps = 21.0;
    double cn2_ground = 1.7e-14;  // m^(-2/3)
    double gs_altitude_m = 0.0;
    double top_altitude_m = 20000.0;

    void validate() const;
    static TurbulenceProfile none() {
        TurbulenceProfile p;
        p.enabled = false;
        return p;
    }
};

struct LossSample {
    double time_s = 0.0;
    double zenith_deg = 0.0;
    double path_length_km = 0.0;
    double efficiency = 1.0;
    double loss_db = 0.0;
    double duration_s = 0.0;  // time represented by this sample
};

double to_db(double efficiency);
double from_db(double loss_db);

double free_space_loss(double wavelength_m, double path_m);

struct AntennaGains {
    double transmit = 0.0;
    double receive = 0.0;
};
/// G_t = 8 / divergence^2, G_r = 4 pi A_r / lambda^2 with A_r the satellite receive aperture.
AntennaGains antenna_gains(const OpticalParams& params);

/// Hufnagel-Valley refractive-index structure parameter at altitude h (m).
double cn2(double altitude_m, const TurbulenceProfile& profile);

/// Integral of C_n^2 from the station altitude to `top_m` (adaptive Gauss-Kronrod).
double cn2_path_integral(const TurbulenceProfile& profile, double top_m);

/// Fried coherence length for a slant path. Returns +infinity when the
/// turbulence integral vanishes.
double fried_r0(const TurbulenceProfile& profile, double wavelength_m, double zenith_rad, double top_m);

struct UplinkBreakdown {
    double slant_range_m = 0.0;
    double optics = 1.0;
    double extinction = 1.0;
    double free_space = 1.0;
    double gain_tx = 1.0;
    double gain_rx = 1.0;
    double turbulence = 1.0;
    double fried_r0_m = 0.0;
    double total = 1.0;
};

/// Uplink efficiency model. Caches the zenith turbulence integral, so a
/// single instance can be shared read-only across threads.
class UplinkModel {
public:
    UplinkModel(OpticalParams params, TurbulenceProfile profile, double sat_altitude_m);

    UplinkBreakdown evaluate(double zenith_rad) const;
    double efficiency(double zenith_rad) const { return evaluate(zenith_rad).total; }
    double fried_r0(double zenith_rad) const;

    const OpticalParams& params() const { return params_; }
    const TurbulenceProfile& profile() const { return profile_; }
    double sat_altitude_m() const { return altitude_m_; }

private:
    OpticalParams params_;
    TurbulenceProfile profile_;
    double altitude_m_;
    double zenith_integral_;  // integral of C_n^2 dh along the vertical
};

double uplink_efficiency(double zenith_rad, double sat_altitude_m, const OpticalParams& params,
                         const TurbulenceProfile& profile);

struct IslBreakdown {
    double geometric = 1.0;
    double pointing = 1.0;
    double optics = 1.0;
    double beam_radius_m = 0.0;
    double total = 1.0;
};

IslBreakdown isl_breakdown(double path_m, const OpticalParams& params);
double isl_efficiency(double path_m, const OpticalParams& params);

/// Uplink loss samples across a session, one per dt (midpoint of each
/// sub-interval; the final sample may cover a shorter interval).
std::vector<LossSample> session_loss_profile(const geometry::VisibilitySession& session,
                                             const geometry::ConstellationSpec& spec,
                                             const geometry::GroundStation& gs, const UplinkModel& uplink,
                                             double dt_s);

enum class TfLinkMode {
    LiteralMax,      // one effective efficiency max{eta_UL, eta_ISL}
    AsymmetricArms,  // arms carried separately into the key-rate model
};

/// Efficiency seen by a twin-field link whose arms are an uplink and an ISL.
/// In LiteralMax mode `end_to_end` is max{ul, isl} and the arms are the
/// symmetric split sqrt(end_to_end); in AsymmetricArms mode the arms are the
/// physical (ul, isl) pair and `end_to_end` is their product.
struct TfLinkEfficiency {
    double end_to_end = 1.0;
    double arm_a = 1.0;
    double arm_b = 1.0;
};
TfLinkEfficiency effective_tf_link(double ul, double isl, TfLinkMode mode = TfLinkMode::LiteralMax);

void write_loss_csv(std::ostream& out, const std::vector<LossSample>& samples);

}  // namespace qkdring::linkbudget
