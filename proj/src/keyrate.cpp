#include "qkdring/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"

namespace qkdring::keyrate {

double binary_entropy(double x) {
    require(x >= 0.0 && x <= 1.0, fmt::format("binary_entropy: argument {} outside [0, 1]", x));
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

namespace {

bool open_unit(double p) { return p > 0.0 && p < 1.0; }

}  // namespace

bool SnsParams::feasible() const noexcept {
    return mu1 > 0.0 && mu2 > mu1 && mu_z > 0.0 && std::isfinite(mu_z) && std::isfinite(mu2) && open_unit(p_send) &&
           open_unit(p_z) && open_unit(p0) && open_unit(p1) && p0 + p1 < 1.0 && delta > 0.0 && delta < kPi;
}

void SnsParams::validate() const {
    require(mu1 > 0.0 && mu2 > mu1, "sns: intensities must satisfy 0 < mu1 < mu2");
    require(mu_z > 0.0 && std::isfinite(mu_z) && std::isfinite(mu2), "sns: intensities must be positive and finite");
    require(open_unit(p_send) && open_unit(p_z) && open_unit(p0) && open_unit(p1),
            "sns: probabilities must lie in (0, 1)");
    require(p0 + p1 < 1.0, "sns: p0 + p1 must leave a positive mu2 probability");
    require(delta > 0.0 && delta < kPi, "sns: phase-slice width must lie in (0, pi)");
}

std::array<double, SnsParams::kDim> SnsParams::to_array() const {
    return {mu_z, mu1, mu2, p_send, p_z, p0, p1, delta};
}

SnsParams SnsParams::from_array(const std::array<double, kDim>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

void SecurityEpsilons::validate() const {
    for (double e : {eps_cor, eps_pa, eps_hat, eps_bar, eps_n1})
        require(open_unit(e), "security: every epsilon must lie in (0, 1)");
}

void ChannelModel::validate() const {
    if (arms) {
        for (double a : *arms) require(a >= 0.0 && a <= 1.0, "channel: arm efficiencies must lie in [0, 1]");
    } else {
        require(efficiency >= 0.0 && efficiency <= 1.0, "channel: efficiency must lie in [0, 1]");
    }
    require(detector_efficiency > 0.0 && detector_efficiency <= 1.0, "channel: detector_efficiency must lie in (0, 1]");
    require(dark_count_prob >= 0.0 && dark_count_prob < 1.0, "channel: dark_count_prob must lie in [0, 1)");
    require(optical_error >= 0.0 && optical_error <= 0.5, "channel: optical_error must lie in [0, 0.5]");
    require(rep_rate_hz > 0.0, "channel: rep_rate_hz must be > 0");
    require(error_correction_factor >= 1.0, "channel: error_correction_factor must be >= 1");
}

std::array<double, 2> ChannelModel::arm_efficiencies() const {
    if (arms) return *arms;
    const double a = std::sqrt(efficiency);
    return {a, a};
}

std::vector<Exposure> compress_exposures(std::span<const Exposure> in, double rel_tol) {
    std::vector<Exposure> sorted;
    sorted.reserve(in.size());
    for (const auto& e : in)
        if (e.pulses > 0.0) sorted.push_back(e);
    std::sort(sorted.begin(), sorted.end(), [](const Exposure& x, const Exposure& y) {
        return x.arm_a != y.arm_a ? x.arm_a < y.arm_a : x.arm_b < y.arm_b;
    });

    std::vector<Exposure> out;
    double first_a = 0.0, first_b = 0.0;
    for (const auto& e : sorted) {
        const bool merge = !out.empty() && std::abs(e.arm_a - first_a) <= rel_tol * first_a &&
                           std::abs(e.arm_b - first_b) <= rel_tol * first_b;
        if (!merge) {
            out.push_back(e);
            first_a = e.arm_a;
            first_b = e.arm_b;
            continue;
        }
        Exposure& m = out.back();
        const double w = m.pulses + e.pulses;
        m.arm_a = (m.arm_a * m.pulses + e.arm_a * e.pulses) / w;
        m.arm_b = (m.arm_b * m.pulses + e.arm_b * e.pulses) / w;
        m.pulses = w;
    }
    return out;
}

double ObservedStats::qber_z() const {
    const double n = clicks_z_total();
    return n > 0.0 ? errors_z() / n : 0.0;
}

void ObservedStats::validate() const {
    params.validate();
    const double pairs[] = {pairs_zz, pairs_oo, pairs_ox, pairs_oy, pairs_xx_slice};
    for (double p : pairs) require(p >= 0.0 && std::isfinite(p), "statistics: pair counts must be finite and >= 0");
    auto check = [](double clicks, double total, const char* what) {
        if (!(clicks >= 0.0) || clicks > total * (1.0 + 1e-12) + 1e-300)
            throw ValidationError(fmt::format("statistics: non-physical {} count", what));
    };
    check(clicks_z_none + clicks_z_single + clicks_z_both, pairs_zz, "Z-window click");
    check(clicks_oo, pairs_oo, "vacuum-decoy click");
    check(clicks_ox, pairs_ox, "mu1-decoy click");
    check(clicks_oy, pairs_oy, "mu2-decoy click");
    check(clicks_xx_slice, pairs_xx_slice, "phase-slice click");
    check(errors_xx_slice, clicks_xx_slice, "phase-slice error");
}

ObservedStats& ObservedStats::operator+=(const ObservedStats& o) {
    n_pulses += o.n_pulses;
    pairs_zz += o.pairs_zz;
    clicks_z_none += o.clicks_z_none;
    clicks_z_single += o.clicks_z_single;
    clicks_z_both += o.clicks_z_both;
    pairs_oo += o.pairs_oo;
    clicks_oo += o.clicks_oo;
    pairs_ox += o.pairs_ox;
    clicks_ox += o.clicks_ox;
    pairs_oy += o.pairs_oy;
    clicks_oy += o.clicks_oy;
    pairs_xx_slice += o.pairs_xx_slice;
    clicks_xx_slice += o.clicks_xx_slice;
    errors_xx_slice += o.errors_xx_slice;
    return *this;
}

double single_click_probability(double m_a, double m_b, double d, double visibility) {
    // Port means are (m_a + m_b)/2 +- V sqrt(m_a m_b) cos(phi); averaging the
    // "exactly one port clicks" probability over phi gives a Bessel I0 term.
    const double g = visibility * std::sqrt(m_a * m_b);
    const double s = 0.5 * (m_a + m_b);
    const double one_port = std::exp(-(s - g)) * (std::cyl_bessel_i(0.0, g) * std::exp(-g));
    return 2.0 * (1.0 - d) * one_port - 2.0 * (1.0 - d) * (1.0 - d) * std::exp(-(m_a + m_b));
}

SliceProbabilities slice_probabilities(double m_a, double m_b, double d, double e_opt, double delta) {
    const double g = (1.0 - 2.0 * e_opt) * std::sqrt(m_a * m_b);
    const double s = 0.5 * (m_a + m_b);
    const double both_dark = (1.0 - d) * (1.0 - d) * std::exp(-2.0 * s);
    auto click = [&](double phi) {
        const double c = g * std::cos(phi);
        return (1.0 - d) * (std::exp(-(s - c)) + std::exp(-(s + c))) - 2.0 * both_dark;
    };
    auto error = [&](double phi) {
        const double c = g * std::cos(phi);
        return (1.0 - (1.0 - d) * std::exp(-(s - c))) * (1.0 - d) * std::exp(-(s + c));
    };
    using GL = boost::math::quadrature::gauss<double, 16>;
    const double half = 0.5 * delta;
    return {GL::integrate(click, 0.0, half) / half, GL::integrate(error, 0.0, half) / half};
}

namespace {

ObservedStats stats_for(const ChannelModel& dev, double arm_a, double arm_b, const SnsParams& q, double n) {
    const double d = dev.dark_count_prob;
    const double v = 1.0 - 2.0 * dev.optical_error;
    const double a = arm_a * dev.detector_efficiency;
    const double b = arm_b * dev.detector_efficiency;
    auto single = [&](double ma, double mb) { return single_click_probability(ma, mb, d, v); };
    ObservedStats s;
    s.params = q;
    s.n_pulses = n;

    const double nzz = n * q.p_z * q.p_z;
    const double p = q.p_send;
    s.pairs_zz = nzz;
    s.clicks_z_none = nzz * (1.0 - p) * (1.0 - p) * single(0.0, 0.0);
    s.clicks_z_single = nzz * p * (1.0 - p) * (single(a * q.mu_z, 0.0) + single(0.0, b * q.mu_z));
    s.clicks_z_both = nzz * p * p * single(a * q.mu_z, b * q.mu_z);

    const double nxx = n * (1.0 - q.p_z) * (1.0 - q.p_z);
    const double p2 = q.p2();
    s.pairs_oo = nxx * q.p0 * q.p0;
    s.clicks_oo = s.pairs_oo * single(0.0, 0.0);
    s.pairs_ox = nxx * 2.0 * q.p0 * q.p1;
    s.clicks_ox = nxx * q.p0 * q.p1 * (single(a * q.mu1, 0.0) + single(0.0, b * q.mu1));
    s.pairs_oy = nxx * 2.0 * q.p0 * p2;
    s.clicks_oy = nxx * q.p0 * p2 * (single(a * q.mu2, 0.0) + single(0.0, b * q.mu2));
    s.pairs_xx_slice = nxx * q.p1 * q.p1 * q.delta / kPi;
    const SliceProbabilities sl = slice_probabilities(a * q.mu1, b * q.mu1, d, dev.optical_error, q.delta);
    s.clicks_xx_slice = s.pairs_xx_slice * sl.click;
    s.errors_xx_slice = s.pairs_xx_slice * sl.error;
    return s;
}

}  // namespace

ObservedStats expected_statistics(const ChannelModel& channel, const SnsParams& params, double n_pulses) {
    channel.validate();
    params.validate();
    require(n_pulses >= 1.0, "expected_statistics: n_pulses must be >= 1");
    const auto arms = channel.arm_efficiencies();
    return stats_for(channel, arms[0], arms[1], params, n_pulses);
}

ObservedStats expected_statistics(const ChannelModel& device, std::span<const Exposure> exposures,
                                  const SnsParams& params) {
    device.validate();
    params.validate();
    ObservedStats total;
    total.params = params;
    for (const auto& e : exposures) {
        require(e.arm_a >= 0.0 && e.arm_a <= 1.0 && e.arm_b >= 0.0 && e.arm_b <= 1.0 && e.pulses >= 0.0,
                "expected_statistics: exposure outside physical range");
        if (e.pulses == 0.0) continue;
        total += stats_for(device, e.arm_a, e.arm_b, params, e.pulses);
    }
    return total;
}

double ChernoffBound::lower(double x, double eps) const {
    const double beta = std::log(1.0 / eps);
    return std::max(0.0, x - 0.5 * beta - std::sqrt(2.0 * beta * x + 0.25 * beta * beta));
}

double ChernoffBound::upper(double x, double eps) const {
    const double beta = std::log(1.0 / eps);
    return x + beta + std::sqrt(2.0 * beta * x + beta * beta);
}

double ChernoffBound::sampling_gap(double n, double k, double rate, double eps) const {
    if (!(n > 0.0) || !(k > 0.0)) return std::numeric_limits<double>::infinity();
    const double lam = std::clamp(rate, 1e-12, 0.5);
    const double arg = (n + k) / (n * k * lam * (1.0 - lam) * eps * eps);
    return std::sqrt((n + k) * (1.0 - lam) * lam / (n * k * std::log(2.0)) * std::log2(arg));
}

const ConcentrationBound& bound_for(BoundMode mode) {
    static const ChernoffBound chernoff;
    static const NoFluctuations none;
    return mode == BoundMode::Finite ? static_cast<const ConcentrationBound&>(chernoff) : none;
}

UntaggedEstimate estimate_untagged(const ObservedStats& stats, const SecurityEpsilons& eps, BoundMode mode) {
    stats.validate();
    eps.validate();
    const ConcentrationBound& cb = bound_for(mode);
    const SnsParams& q = stats.params;
    UntaggedEstimate out;
    if (!(stats.pairs_oo > 0.0 && stats.pairs_ox > 0.0 && stats.pairs_oy > 0.0)) return out;

    const double e = eps.eps_n1;
    const double s_oo_u = cb.upper(stats.clicks_oo, e) / stats.pairs_oo;
    const double s_oo_l = cb.lower(stats.clicks_oo, e) / stats.pairs_oo;
    const double s_ox_l = cb.lower(stats.clicks_ox, e) / stats.pairs_ox;
    const double s_oy_u = cb.upper(stats.clicks_oy, e) / stats.pairs_oy;

    const double m1 = q.mu1, m2 = q.mu2;
    const double s1 = (m2 * m2 * std::exp(m1) * s_ox_l - m1 * m1 * std::exp(m2) * s_oy_u - (m2 * m2 - m1 * m1) * s_oo_u) /
                      (m1 * m2 * (m2 - m1));
    out.s1_lower = std::max(0.0, s1);
    if (out.s1_lower == 0.0) return out;

    const double mu = q.mu_z;
    const double expected_n1 = stats.pairs_zz * 2.0 * q.p_send * (1.0 - q.p_send) * mu * std::exp(-mu) * out.s1_lower;
    out.n1_lower = cb.lower(expected_n1, e);

    if (!(stats.pairs_xx_slice > 0.0)) {
        out.e1ph_x_upper = out.e1ph_upper = 0.5;
        return out;
    }
    // Phase-flip rate from the mu1-mu1 slice: subtract the vacuum part, then
    // attribute the remaining errors to the single-photon component.
    const double w1 = 2.0 * m1 * std::exp(-2.0 * m1);
    const double t_u = cb.upper(stats.errors_xx_slice, eps.eps_bar) / stats.pairs_xx_slice;
    const double ex = (t_u - 0.5 * std::exp(-2.0 * m1) * s_oo_l) / (w1 * out.s1_lower);
    out.e1ph_x_upper = std::clamp(ex, 0.0, 0.5);

    const double n_x1 = stats.pairs_xx_slice * w1 * out.s1_lower;
    const double gap = cb.sampling_gap(n_x1, out.n1_lower, out.e1ph_x_upper, eps.eps_bar);
    out.e1ph_upper = std::min(0.5, out.e1ph_x_upper + gap);
    return out;
}

double correction_bits(const SecurityEpsilons& eps, CorrectionForm form) {
    eps.validate();
    if (form == CorrectionForm::Literal) {
        const double v = 2.0 * std::log2((2.0 / eps.eps_cor) * (2.0 / (std::sqrt(2.0) * eps.eps_pa * eps.eps_hat)));
        if (std::isfinite(v)) return v;
        // product overflows for extremely small epsilons
        return 2.0 * (std::log2(2.0 / eps.eps_cor) + 1.0 - std::log2(std::sqrt(2.0) * eps.eps_pa * eps.eps_hat));
    }
    return std::log2(2.0 / eps.eps_cor) + 2.0 * std::log2(1.0 / (std::sqrt(2.0) * eps.eps_pa * eps.eps_hat));
}

SklBreakdown skl(const ObservedStats& stats, const ChannelModel& channel, const SecurityEpsilons& eps,
                 const SklOptions& options) {
    const UntaggedEstimate u = estimate_untagged(stats, eps, options.mode);
    SklBreakdown b;
    b.n_pulses = stats.n_pulses;
    b.n_raw = stats.clicks_z_total();
    b.qber_z = stats.qber_z();
    b.n1_lower = u.n1_lower;
    b.e1ph_upper = u.e1ph_upper;
    b.lambda_ec = channel.error_correction_factor * b.n_raw * binary_entropy(std::min(b.qber_z, 1.0));
    b.correction = correction_bits(eps, options.correction);
    if (b.n1_lower > 0.0)
        b.raw_bits = b.n1_lower * (1.0 - binary_entropy(b.e1ph_upper)) - b.lambda_ec - b.correction;
    else
        b.raw_bits = -b.lambda_ec - b.correction;
    b.skl_bits = std::max(0.0, b.raw_bits);
    return b;
}

// --- optimiser -------------------------------------------------------------

std::vector<SnsParams> default_parameter_grid() {
    std::vector<SnsParams> grid;
    for (double mu_z : {0.2, 0.35, 0.5})
        for (double mu1 : {0.03, 0.1})
            for (double mu2 : {0.25, 0.45})
                for (double p : {0.02, 0.05, 0.1})
                    for (double pz : {0.7, 0.9})
                        for (double p0 : {0.2, 0.4})
                            for (double p1 : {0.3, 0.55})
                                for (double delta : {0.2, 0.5}) grid.push_back({mu_z, mu1, mu2, p, pz, p0, p1, delta});
    return grid;
}

namespace {

// Search coordinates: log for intensities, logit for probabilities and for
// delta / pi. Unit steps are then multiplicative in intensity or odds.
constexpr bool kIsIntensity[SnsParams::kDim] = {true, true, true, false, false, false, false, false};

std::array<double, SnsParams::kDim> to_search(const SnsParams& s) {
    auto v = s.to_array();
    v[7] /= kPi;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = kIsIntensity[i] ? std::log(v[i]) : std::log(v[i] / (1.0 - v[i]));
    return v;
}

SnsParams from_search(const std::array<double, SnsParams::kDim>& x) {
    std::array<double, SnsParams::kDim> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = kIsIntensity[i] ? std::exp(x[i]) : 1.0 / (1.0 + std::exp(-x[i]));
    v[7] *= kPi;
    return SnsParams::from_array(v);
}

struct Candidate {
    SnsParams params;
    SklBreakdown breakdown;
};

// Orders by raw (unclamped) key length so the search can climb out of the
// zero-key region; earlier candidates win ties.
bool better(const SklBreakdown& a, const SklBreakdown& b) { return a.raw_bits > b.raw_bits; }

template <class Eval>
OptimizationResult run_optimizer(Eval&& eval, const OptimizerOptions& opt) {
    require(opt.starts >= 1 && opt.evaluations_per_start >= 0, "optimizer: invalid budget");
    OptimizationResult res;

    std::vector<Candidate> grid;
    for (const auto& p : default_parameter_grid()) {
        grid.push_back({p, eval(p)});
        ++res.evaluations;
    }
    std::vector<std::size_t> order(grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return better(grid[i].breakdown, grid[j].breakdown); });

    Candidate best = grid[order.front()];
    const int starts = std::min<int>(opt.starts, static_cast<int>(order.size()));
    for (int s = 0; s < starts; ++s) {
        Candidate cur = grid[order[static_cast<std::size_t>(s)]];
        auto x = to_search(cur.params);
        double step = opt.initial_log_step;
        int budget = opt.evaluations_per_start;
        while (budget > 0 && step >= opt.min_log_step) {
            bool improved = false;
            for (std::size_t k = 0; k < SnsParams::kDim && budget > 0; ++k) {
                for (double dir : {1.0, -1.0}) {
                    if (budget <= 0) break;
                    auto y = x;
                    y[k] += dir * step;
                    const SnsParams trial = from_search(y);
                    if (!trial.feasible()) continue;
                    --budget;
                    ++res.evaluations;
                    const SklBreakdown b = eval(trial);
                    if (better(b, cur.breakdown)) {
                        cur = {trial, b};
                        x = y;
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        if (better(cur.breakdown, best.breakdown)) best = cur;
    }

    res.params = best.params;
    res.breakdown = best.breakdown;
    res.positive_key = best.breakdown.skl_bits > 0.0;
    return res;
}

}  // namespace

OptimizationResult optimize_sns(const ChannelModel& channel, double duration_s, const SecurityEpsilons& eps,
                                const OptimizerOptions& options) {
    channel.validate();
    eps.validate();
    require(duration_s > 0.0, "optimize_sns: duration must be positive");
    const auto arms = channel.arm_efficiencies();
    const Exposure e{arms[0], arms[1], channel.rep_rate_hz * duration_s};
    return optimize_sns(channel, std::span<const Exposure>(&e, 1), eps, options);
}

OptimizationResult optimize_sns(const ChannelModel& device, std::span<const Exposure> exposures,
                                const SecurityEpsilons& eps, const OptimizerOptions& options) {
    device.validate();
    eps.validate();
    auto eval = [&](const SnsParams& p) {
        return skl(expected_statistics(device, exposures, p), device, eps, options.skl);
    };
    return run_optimizer(eval, options);
}

LinkAccumulation accumulate_link(const std::vector<std::vector<Exposure>>& sessions, const ChannelModel& device,
                                 const SecurityEpsilons& eps, const OptimizerOptions& options, Pooling pooling,
                                 double bin_rel_tol) {
    device.validate();
    eps.validate();
    LinkAccumulation acc;
    auto pulses_of = [](const std::vector<Exposure>& v) {
        double n = 0.0;
        for (const auto& e : v) n += e.pulses;
        return n;
    };

    if (pooling == Pooling::Daily) {
        std::vector<Exposure> all;
        for (const auto& s : sessions) all.insert(all.end(), s.begin(), s.end());
        const auto bins = compress_exposures(all, bin_rel_tol);
        acc.bins = bins.size();
        acc.block_size = pulses_of(bins);
        if (bins.empty()) return acc;
        acc.result = optimize_sns(device, bins, eps, options);
        return acc;
    }

    double longest = -1.0;
    SklBreakdown& sum = acc.result.breakdown;
    for (const auto& s : sessions) {
        const auto bins = compress_exposures(s, bin_rel_tol);
        if (bins.empty()) continue;
        const OptimizationResult r = optimize_sns(device, bins, eps, options);
        const double n = pulses_of(bins);
        acc.bins += bins.size();
        acc.block_size += n;
        acc.result.evaluations += r.evaluations;
        sum.n_pulses += r.breakdown.n_pulses;
        sum.n_raw += r.breakdown.n_raw;
        sum.n1_lower += r.breakdown.n1_lower;
        sum.lambda_ec += r.breakdown.lambda_ec;
        sum.correction += r.breakdown.correction;
        sum.skl_bits += r.breakdown.skl_bits;
        if (n > longest) {
            longest = n;
            acc.result.params = r.params;
            sum.qber_z = r.breakdown.qber_z;
            sum.e1ph_upper = r.breakdown.e1ph_upper;
        }
    }
    sum.raw_bits = sum.skl_bits;
    acc.result.positive_key = sum.skl_bits > 0.0;
    return acc;
}

void write_rate_table(std::ostream& out, const std::vector<RateTableRow>& rows) {
    out << "loss_db,duration_s,skl_bits,n1,e1ph,qber_z,mu_z,mu1,mu2,p_send,p_z,p0,p1,delta\n";
    for (const auto& r : rows) {
        const auto& b = r.result.breakdown;
        out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", r.loss_db, r.duration_s, b.skl_bits,
                           b.n1_lower, b.e1ph_upper, b.qber_z);
        for (double v : r.result.params.to_array()) out << fmt::format(",{:.17g}", v);
        out << '\n';
    }
}

}  // namespace qkdring::keyrate
