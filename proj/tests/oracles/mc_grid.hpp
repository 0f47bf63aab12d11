// Compares expected_statistics with the shot-by-shot simulator on a fixed
// (loss x intensity) grid.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "click_mc.hpp"
#include "qkdring/keyrate.hpp"

namespace oracle {

struct McCheck {
    std::string label;
    double expected = 0.0;
    double observed = 0.0;
    double z = 0.0;  // (observed - expected) / sqrt(expected)
};

struct McGridPoint {
    double loss_db = 0.0;
    McSetup setup;
};

inline std::vector<McGridPoint> mc_grid() {
    std::vector<McGridPoint> out;
    for (double loss : {0.0, 10.0, 20.0, 30.0, 40.0})
        for (int level = 0; level < 2; ++level) {
            McGridPoint p;
            p.loss_db = loss;
            const double arm = std::pow(10.0, -loss / 20.0);
            p.setup.arm_a = p.setup.arm_b = arm;
            p.setup.dark = level == 0 ? 1e-6 : 1e-4;
            p.setup.p_z = 0.5;
            p.setup.p0 = 0.25;
            p.setup.p1 = 0.5;
            p.setup.p_send = 0.2;
            p.setup.delta = 0.6;
            if (level == 1) {
                p.setup.mu_z = 0.8;
                p.setup.mu1 = 0.2;
                p.setup.mu2 = 0.6;
            }
            out.push_back(p);
        }
    return out;
}

inline qkdring::keyrate::ObservedStats analytic(const McSetup& s, double shots) {
    qkdring::keyrate::ChannelModel ch;
    ch.efficiency = s.arm_a * s.arm_b;
    ch.arms = std::array<double, 2>{s.arm_a, s.arm_b};
    ch.detector_efficiency = s.detector;
    ch.dark_count_prob = s.dark;
    ch.optical_error = s.e_opt;
    qkdring::keyrate::SnsParams q;
    q.mu_z = s.mu_z;
    q.mu1 = s.mu1;
    q.mu2 = s.mu2;
    q.p_send = s.p_send;
    q.p_z = s.p_z;
    q.p0 = s.p0;
    q.p1 = s.p1;
    q.delta = s.delta;
    return qkdring::keyrate::expected_statistics(ch, q, shots);
}

// Every category whose expected count reaches `min_expected`.
inline std::vector<McCheck> compare(const McSetup& s, long long shots, std::uint64_t seed, double min_expected = 20.0) {
    const McCounts mc = ClickSimulator(s, seed).run(shots);
    const auto e = analytic(s, static_cast<double>(shots));
    const std::pair<const char*, std::pair<double, double>> rows[] = {
        {"pairs_zz", {e.pairs_zz, mc.pairs_zz}},
        {"clicks_z_none", {e.clicks_z_none, mc.clicks_z_none}},
        {"clicks_z_single", {e.clicks_z_single, mc.clicks_z_single}},
        {"clicks_z_both", {e.clicks_z_both, mc.clicks_z_both}},
        {"clicks_oo", {e.clicks_oo, mc.clicks_oo}},
        {"clicks_ox", {e.clicks_ox, mc.clicks_ox}},
        {"clicks_oy", {e.clicks_oy, mc.clicks_oy}},
        {"pairs_xx_slice", {e.pairs_xx_slice, mc.pairs_xx_slice}},
        {"clicks_xx_slice", {e.clicks_xx_slice, mc.clicks_xx_slice}},
        {"errors_xx_slice", {e.errors_xx_slice, mc.errors_xx_slice}},
    };
    std::vector<McCheck> out;
    for (const auto& [name, v] : rows) {
        if (v.first < min_expected) continue;
        out.push_back({name, v.first, v.second, (v.second - v.first) / std::sqrt(v.first)});
    }
    return out;
}

}  // namespace oracle

#include <boost/math/distributions/chi_squared.hpp>

namespace oracle {

// Two-sided tail mass beyond three standard deviations.
inline constexpr double kThreeSigmaTail = 0.0026997960632601866;

struct McPointVerdict {
    double chi2 = 0.0;
    int dof = 0;
    double p_value = 1.0;
    double max_abs_z = 0.0;
    bool pass = true;
};

// The per-category deviations of one grid point combined into a chi-square
// statistic, judged at the three-sigma tail probability.
inline McPointVerdict judge(const std::vector<McCheck>& checks) {
    McPointVerdict v;
    for (const auto& c : checks) {
        v.chi2 += c.z * c.z;
        v.max_abs_z = std::max(v.max_abs_z, std::abs(c.z));
    }
    v.dof = static_cast<int>(checks.size());
    if (v.dof == 0) return v;
    v.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(v.dof), v.chi2));
    v.pass = v.p_value >= kThreeSigmaTail;
    return v;
}

}  // namespace oracle
