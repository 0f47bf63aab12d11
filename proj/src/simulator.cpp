#include "qkdring/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"

namespace qkdring::simulator {

using geometry::GroundStation;
using keyrate::Exposure;

void ScenarioConfig::validate() const {
    constellation.validate();
    optics.validate();
    turbulence.validate();
    channel.validate();
    eps.validate();
    gs1().validate();
    require(t_total_s > 0.0, "simulation.t_total_s must be > 0");
    require(n_days >= 1, "simulation.n_days must be >= 1");
    require(dt_s > 0.0 && dt_s <= t_total_s, "simulation.dt_s must lie in (0, t_total_s]");
    require(bin_rel_tol >= 0.0 && bin_rel_tol < 0.1, "simulation.bin_rel_tol must lie in [0, 0.1)");
    require(workers >= 1, "simulation.workers must be >= 1");
    require(optimizer.starts >= 1 && optimizer.evaluations_per_start >= 0, "optimizer budget must be positive");
    const int n = constellation.num_sats;
    require(n % 2 == 0,
            fmt::format("constellation.num_sats must be even so that Bob's satellite is i + N/2 (got {})", n));
    const int n_min = geometry::min_ring_size(constellation.altitude_km, constellation.atm_shell_km);
    require(n >= n_min, fmt::format("constellation.num_sats={} is below the minimum ring size {} for "
                                    "altitude {} km and atmospheric shell {} km",
                                    n, n_min, constellation.altitude_km, constellation.atm_shell_km));
}

GroundStation ScenarioConfig::gs1() const { return {1, gs_latitude_deg, gs_longitude_deg}; }

GroundStation ScenarioConfig::gs2() const {
    double lon = gs_longitude_deg + 180.0;
    if (lon >= 180.0) lon -= 360.0;
    return {2, gs_latitude_deg, lon};
}

std::vector<std::pair<std::string, double>> DailyReport::scalars() const {
    return {{"protocol_skl", protocol_skl},     {"per_sat_gs_skl", per_sat_gs_skl},
            {"raw_bits", raw_bits},             {"block_size", block_size},
            {"mean_block_size", mean_block_size}, {"rho_vis_gs1", rho_vis_gs1},
            {"rho_vis_gs2", rho_vis_gs2},       {"sessions_gs1", static_cast<double>(sessions_gs1)},
            {"sessions_gs2", static_cast<double>(sessions_gs2)}, {"isl_skl", isl_skl}};
}

const Stat& CampaignResult::stat(const std::string& name) const {
    for (const auto& [k, v] : stats)
        if (k == name) return v;
    throw ValidationError("campaign: unknown metric " + name);
}

double day_phase_offset_deg(const ScenarioConfig& config, int day) {
    if (!config.phase_variation) return 0.0;
    // splitmix64 of the seed gives the starting point of the golden-ratio sequence
    std::uint64_t z = config.seed + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    const double f = u + golden * static_cast<double>(day);
    return (f - std::floor(f)) * 360.0;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(workers, n); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Exposures of the two neighbour links of every serving satellite, grouped
// by session: out[sat][0] for i+1, out[sat][1] for i-1.
using LinkSessions = std::vector<std::array<std::vector<std::vector<Exposure>>, 2>>;

LinkSessions station_exposures(const ScenarioConfig& cfg, const geometry::ConstellationSpec& spec,
                               const GroundStation& gs, const linkbudget::UplinkModel& uplink,
                               const std::vector<geometry::VisibilitySession>& sessions) {
    const int n = spec.num_sats;
    LinkSessions out(static_cast<std::size_t>(n));
    for (const auto& s : sessions) {
        const auto profile = linkbudget::session_loss_profile(s, spec, gs, uplink, cfg.dt_s);
        const int i = s.serving_sat;
        for (int side = 0; side < 2; ++side) {
            const int partner = wrap(i + (side == 0 ? 1 : -1), n);
            std::vector<Exposure> ex;
            ex.reserve(profile.size());
            for (const auto& sample : profile) {
                const auto a = geometry::propagate_one(spec, i, sample.time_s);
                const auto b = geometry::propagate_one(spec, partner, sample.time_s);
                if (!geometry::has_line_of_sight(a, b, spec.atm_shell_km)) continue;
                const double chord_m = 1e3 * norm(a.position_km - b.position_km);
                const double isl = linkbudget::isl_efficiency(chord_m, cfg.optics);
                const auto tf = linkbudget::effective_tf_link(sample.efficiency, isl, cfg.tf_mode);
                ex.push_back({tf.arm_a, tf.arm_b, cfg.channel.rep_rate_hz * sample.duration_s});
            }
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(side)].push_back(std::move(ex));
        }
    }
    return out;
}

}  // namespace

DailyReport run_day(const ScenarioConfig& cfg, int day_index) {
    cfg.validate();
    require(day_index >= 0, "run_day: day index must be >= 0");
    DailyReport rep;
    rep.day = day_index;
    rep.phase_offset_deg = day_phase_offset_deg(cfg, day_index);

    geometry::ConstellationSpec spec = cfg.constellation;
    spec.initial_phase_deg += rep.phase_offset_deg;
    const double t0 = spec.epoch_s, t1 = spec.epoch_s + cfg.t_total_s;
    const double max_z = cfg.optics.max_zenith_deg;
    const linkbudget::UplinkModel uplink(cfg.optics, cfg.turbulence, spec.altitude_km * 1e3);
    const GroundStation stations[2] = {cfg.gs1(), cfg.gs2()};
    const int n = spec.num_sats;

    std::array<LinkSessions, 2> exposures;
    for (int j = 0; j < 2; ++j) {
        const auto sessions = geometry::find_sessions(spec, stations[j], t0, t1, cfg.dt_s, max_z);
        const double rho = geometry::visibility_fraction(sessions, cfg.t_total_s);
        (j == 0 ? rep.rho_vis_gs1 : rep.rho_vis_gs2) = rho;
        (j == 0 ? rep.sessions_gs1 : rep.sessions_gs2) = static_cast<int>(sessions.size());
        exposures[static_cast<std::size_t>(j)] = station_exposures(cfg, spec, stations[j], uplink, sessions);
    }

    // one job per (station, satellite, side) that carried pulses
    struct Job {
        int gs, sat, side;
    };
    std::vector<Job> jobs;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < n; ++i)
            for (int side = 0; side < 2; ++side)
                if (!exposures[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)][static_cast<std::size_t>(side)].empty())
                    jobs.push_back({j, i, side});
    std::vector<keyrate::LinkAccumulation> acc(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int q) {
        const Job& jb = jobs[static_cast<std::size_t>(q)];
        const auto& sess =
            exposures[static_cast<std::size_t>(jb.gs)][static_cast<std::size_t>(jb.sat)][static_cast<std::size_t>(jb.side)];
        acc[static_cast<std::size_t>(q)] =
            keyrate::accumulate_link(sess, cfg.channel, cfg.eps, cfg.optimizer, cfg.pooling, cfg.bin_rel_tol);
    });

    // SKL_{i+-1,j}: the weaker of the two neighbour links; a link that never
    // carried pulses has no key
    std::array<std::vector<std::array<double, 2>>, 2> side_skl;
    for (auto& v : side_skl) v.assign(static_cast<std::size_t>(n), {0.0, 0.0});
    double max_link = 0.0;
    for (std::size_t q = 0; q < jobs.size(); ++q) {
        const Job& jb = jobs[q];
        const auto& a = acc[q];
        if (a.block_size <= 0.0) continue;
        side_skl[static_cast<std::size_t>(jb.gs)][static_cast<std::size_t>(jb.sat)][static_cast<std::size_t>(jb.side)] =
            a.result.breakdown.skl_bits;
        max_link = std::max(max_link, a.result.breakdown.skl_bits);
        rep.raw_bits += a.result.breakdown.n_raw;
        rep.block_size += a.block_size;
        rep.links.push_back({jb.gs + 1, jb.sat, wrap(jb.sat + (jb.side == 0 ? 1 : -1), n), a});
    }
    if (!rep.links.empty()) rep.mean_block_size = rep.block_size / static_cast<double>(rep.links.size());

    rep.sat_skl_gs1.resize(static_cast<std::size_t>(n));
    rep.sat_skl_gs2.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& s1 = side_skl[0][static_cast<std::size_t>(i)];
        const auto& s2 = side_skl[1][static_cast<std::size_t>(i)];
        rep.sat_skl_gs1[static_cast<std::size_t>(i)] = std::min(s1[0], s1[1]);
        rep.sat_skl_gs2[static_cast<std::size_t>(i)] = std::min(s2[0], s2[1]);
    }
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const int k = wrap(i + n / 2, n);
        rep.protocol_skl += std::min(rep.sat_skl_gs1[static_cast<std::size_t>(i)], rep.sat_skl_gs2[static_cast<std::size_t>(k)]);
        sum += rep.sat_skl_gs1[static_cast<std::size_t>(i)] + rep.sat_skl_gs2[static_cast<std::size_t>(i)];
    }
    rep.per_sat_gs_skl = sum / (2.0 * n);

    if (cfg.isl_check) {
        // S_{i-1} and S_{i+1} measured at S_i over the whole window, at the
        // longest adjacent chord the constellation ever presents
        const double chord_m = 1e3 * geometry::ring_chord_km(spec.orbit_radius_km(), n, 1);
        const double isl = linkbudget::isl_efficiency(chord_m, cfg.optics);
        const auto tf = linkbudget::effective_tf_link(isl, isl, cfg.tf_mode);
        keyrate::ChannelModel ch = cfg.channel;
        ch.efficiency = tf.end_to_end;
        ch.arms = std::array<double, 2>{tf.arm_a, tf.arm_b};
        rep.isl_skl = keyrate::optimize_sns(ch, cfg.t_total_s, cfg.eps, cfg.optimizer).breakdown.skl_bits;
        if (rep.isl_skl < max_link)
            throw RuntimeError(fmt::format("inter-satellite twin-field link yields {:.6g} bits/day, less than the "
                                           "{:.6g} bits of a ground-station link it must support",
                                           rep.isl_skl, max_link));
    }
    return rep;
}

CampaignResult run_campaign(const ScenarioConfig& cfg) {
    cfg.validate();
    CampaignResult res;
    res.days.resize(static_cast<std::size_t>(cfg.n_days));
    ScenarioConfig inner = cfg;
    inner.workers = 1;
    parallel_for(cfg.n_days, cfg.workers, [&](int d) { res.days[static_cast<std::size_t>(d)] = run_day(inner, d); });

    const auto names = res.days.front().scalars();
    const double nd = static_cast<double>(cfg.n_days);
    for (std::size_t m = 0; m < names.size(); ++m) {
        double mean = 0.0;
        for (const auto& d : res.days) mean += d.scalars()[m].second;
        mean /= nd;
        double var = 0.0;
        for (const auto& d : res.days) {
            const double e = d.scalars()[m].second - mean;
            var += e * e;
        }
        res.stats.push_back({names[m].first, {mean, std::sqrt(var / nd)}});
    }
    return res;
}

std::vector<SweepPoint> sweep(const ScenarioConfig& cfg, SweepAxis axis, const std::vector<double>& values) {
    require(!values.empty(), "sweep: no values given");
    std::vector<SweepPoint> out;
    for (double x : values) {
        ScenarioConfig c = cfg;
        if (axis == SweepAxis::NumSats) {
            require(std::floor(x) == x, fmt::format("sweep: satellite count {} is not an integer", x));
            c.constellation.num_sats = static_cast<int>(x);
        } else {
            c.gs_latitude_deg = x;
        }
        out.push_back({x, run_campaign(c)});
    }
    return out;
}

}  // namespace qkdring::simulator
