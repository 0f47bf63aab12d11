// Finite-key secret-key length for sending-or-not-sending twin-field QKD.
//
// Statistics are expected values of a threshold-detector click model: two
// coherent pulses (one per sender) with uniformly random relative phase meet
// on a 50:50 beamsplitter at the measuring node; each output port clicks with
// probability 1 - (1 - P_dc) exp(-mean photon number). Only single-click
// ("effective") events are kept. Misalignment e_opt lowers the interference
// visibility of every two-pulse event to 1 - 2 e_opt.
#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace qkdring::keyrate {

double binary_entropy(double x);

struct SnsParams {
    double mu_z = 0.45;    // signal intensity in Z windows
    double mu1 = 0.05;     // weak decoy
    double mu2 = 0.4;      // strong decoy
    double p_send = 0.03;  // sending probability inside Z windows
    double p_z = 0.9;      // Z-window probability
    double p0 = 0.2;       // X-window vacuum probability
    double p1 = 0.75;      // X-window mu1 probability
    double delta = 0.4;    // phase-slice width (rad); accepted |phase difference| <= delta/2 around 0 and pi

    void validate() const;
    bool feasible() const noexcept;
    double p2() const { return 1.0 - p0 - p1; }

    static constexpr std::size_t kDim = 8;
    std::array<double, kDim> to_array() const;
    static SnsParams from_array(const std::array<double, kDim>& v);
};

struct SecurityEpsilons {
    double eps_cor = 1e-10;
    double eps_pa = 1e-10;
    double eps_hat = 1e-10;
    double eps_bar = 1e-10;
    double eps_n1 = 1e-10;

    void validate() const;
    /// Union bound over the secrecy failure events.
    double eps_sec() const { return eps_pa + eps_hat + eps_bar + eps_n1; }
    double eps_tol() const { return eps_cor + eps_sec(); }
};

struct ChannelModel {
    double efficiency = 1.0;  // end-to-end sender-to-sender transmittance
    // Per-arm transmittances; when empty both arms are sqrt(efficiency).
    std::optional<std::array<double, 2>> arms;
    double detector_efficiency = 0.5;
    double dark_count_prob = 1e-9;
    double optical_error = 0.05;
    double rep_rate_hz = 1e9;
    double error_correction_factor = 1.11;

    void validate() const;
    std::array<double, 2> arm_efficiencies() const;
};

/// Pulses sent while the arms had the given transmittances.
struct Exposure {
    double arm_a = 1.0;
    double arm_b = 1.0;
    double pulses = 0.0;
};

/// Merges exposures whose arm transmittances agree to `rel_tol`
/// (pulse-weighted means). Output order is by increasing arm_a.
std::vector<Exposure> compress_exposures(std::span<const Exposure> in, double rel_tol = 1e-3);

struct ObservedStats {
    SnsParams params;
    double n_pulses = 0.0;

    // Z windows (both parties chose Z)
    double pairs_zz = 0.0;
    double clicks_z_none = 0.0;    // neither sent
    double clicks_z_single = 0.0;  // exactly one sent
    double clicks_z_both = 0.0;    // both sent

    // X windows (both chose X); ox/oy count both orders
    double pairs_oo = 0.0, clicks_oo = 0.0;
    double pairs_ox = 0.0, clicks_ox = 0.0;
    double pairs_oy = 0.0, clicks_oy = 0.0;
    double pairs_xx_slice = 0.0, clicks_xx_slice = 0.0, errors_xx_slice = 0.0;

    double clicks_z_total() const { return clicks_z_none + clicks_z_single + clicks_z_both; }
    double errors_z() const { return clicks_z_none + clicks_z_both; }
    double qber_z() const;

    void validate() const;
    ObservedStats& operator+=(const ObservedStats& o);
};

/// Single-click probability for mean photon numbers (at the measuring node,
/// after detector efficiency) m_a and m_b with uniformly random relative
/// phase. Interference visibility is 1 - 2 e_opt.
double single_click_probability(double m_a, double m_b, double dark_count, double visibility = 1.0);

struct SliceProbabilities {
    double click = 0.0;  // exactly one port clicks
    double error = 0.0;  // only the port expected to stay dark clicks
};

/// Per-pair probabilities for pulses whose relative phase lies within the
/// accepted slice (uniform over a window of width delta around 0 or pi).
SliceProbabilities slice_probabilities(double m_a, double m_b, double dark_count, double optical_error, double delta);

ObservedStats expected_statistics(const ChannelModel& channel, const SnsParams& params, double n_pulses);
ObservedStats expected_statistics(const ChannelModel& device, std::span<const Exposure> exposures,
                                  const SnsParams& params);

/// Confidence bounds turning an observed count into bounds on its expectation.
class ConcentrationBound {
public:
    virtual ~ConcentrationBound() = default;
    virtual double lower(double observed, double eps) const = 0;
    virtual double upper(double observed, double eps) const = 0;
    /// Random-sampling deviation of the phase-flip rate between X and Z
    /// windows; zero when fluctuations are ignored.
    virtual double sampling_gap(double n, double k, double rate, double eps) const = 0;
};

/// Multiplicative Chernoff bounds in closed form, beta = ln(1/eps):
///   E >= x - beta/2 - sqrt(2 beta x + beta^2/4),  E <= x + beta + sqrt(2 beta x + beta^2),
/// plus the standard hypergeometric sampling gap for the phase-flip rate.
class ChernoffBound final : public ConcentrationBound {
public:
    double lower(double observed, double eps) const override;
    double upper(double observed, double eps) const override;
    double sampling_gap(double n, double k, double rate, double eps) const override;
};

/// Asymptotic limit: observed counts are taken as their expectations.
class NoFluctuations final : public ConcentrationBound {
public:
    double lower(double observed, double) const override { return observed; }
    double upper(double observed, double) const override { return observed; }
    double sampling_gap(double, double, double, double) const override { return 0.0; }
};

enum class BoundMode { Finite, Asymptotic };

const ConcentrationBound& bound_for(BoundMode mode);

struct UntaggedEstimate {
    double s1_lower = 0.0;       // single-photon yield (one sender, one photon)
    double n1_lower = 0.0;       // untagged Z bits
    double e1ph_x_upper = 0.0;   // phase-flip rate in the X slice
    double e1ph_upper = 0.0;     // phase-flip rate of the untagged Z bits
};

UntaggedEstimate estimate_untagged(const ObservedStats& stats, const SecurityEpsilons& eps,
                                   BoundMode mode = BoundMode::Finite);

enum class CorrectionForm {
    Literal,  // 2 log2[(2/eps_cor) (2/(sqrt2 eps_PA eps_hat))]
    Split,    // log2(2/eps_cor) + 2 log2(1/(sqrt2 eps_PA eps_hat))
};

double correction_bits(const SecurityEpsilons& eps, CorrectionForm form = CorrectionForm::Literal);

struct SklBreakdown {
    double n_pulses = 0.0;
    double n_raw = 0.0;
    double qber_z = 0.0;
    double n1_lower = 0.0;
    double e1ph_upper = 0.0;
    double lambda_ec = 0.0;
    double correction = 0.0;
    double raw_bits = 0.0;  // before clamping at zero
    double skl_bits = 0.0;
};

struct SklOptions {
    BoundMode mode = BoundMode::Finite;
    CorrectionForm correction = CorrectionForm::Literal;
};

SklBreakdown skl(const ObservedStats& stats, const ChannelModel& channel, const SecurityEpsilons& eps,
                 const SklOptions& options = {});

struct OptimizerOptions {
    int starts = 3;
    int evaluations_per_start = 400;
    double initial_log_step = 0.7;
    double min_log_step = 1e-4;
    SklOptions skl;
};

struct OptimizationResult {
    SnsParams params;
    SklBreakdown breakdown;
    bool positive_key = false;
    int evaluations = 0;
};

/// The coarse grid every optimisation starts from. The optimiser's result is
/// never worse than the best point of this grid.
std::vector<SnsParams> default_parameter_grid();

OptimizationResult optimize_sns(const ChannelModel& channel, double duration_s, const SecurityEpsilons& eps,
                                const OptimizerOptions& options = {});
OptimizationResult optimize_sns(const ChannelModel& device, std::span<const Exposure> exposures,
                                const SecurityEpsilons& eps, const OptimizerOptions& options = {});

enum class Pooling {
    Daily,       // every same-link sample of the window forms one finite-key block
    PerSession,  // each session is its own block; key lengths add
};

struct LinkAccumulation {
    OptimizationResult result;  // PerSession: breakdown fields are sums, params from the longest session
    double block_size = 0.0;
    std::size_t bins = 0;  // distinct efficiency bins after compression
};

/// Finite-key key length of one link over a window, from per-sample
/// exposures grouped by session.
LinkAccumulation accumulate_link(const std::vector<std::vector<Exposure>>& sessions, const ChannelModel& device,
                                 const SecurityEpsilons& eps, const OptimizerOptions& options = {},
                                 Pooling pooling = Pooling::Daily, double bin_rel_tol = 1e-3);

struct RateTableRow {
    double loss_db = 0.0;
    double duration_s = 0.0;
    OptimizationResult result;
};

/// CSV: loss_db, duration_s, skl_bits, n1, e1ph, qber_z, then the eight parameters.
void write_rate_table(std::ostream& out, const std::vector<RateTableRow>& rows);

}  // namespace qkdring::keyrate
