#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "qkdring/constants.hpp"
#include "qkdring/error.hpp"
#include "qkdring/relay.hpp"
#include "reports.hpp"
#include "scenario.hpp"

namespace qkdring::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string default_out_dir() {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return "qkdring_out";
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError(fmt::format("cannot write '{}'", path.string()));
    body(out);
    if (!out) throw RuntimeError(fmt::format("error while writing '{}'", path.string()));
}

struct ScenarioArgs {
    std::string path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> days;

    void attach(CLI::App* app, bool positional) {
        if (positional)
            app->add_option("scenario", path, "scenario file (YAML)")->required();
        else
            app->add_option("--scenario", path, "scenario file (YAML); defaults when omitted");
        app->add_option("--set", overrides, "override, section.key=value (repeatable)");
        app->add_option("--out", out_dir, fmt::format("output directory (default ${} or ./qkdring_out)", kOutDirEnv));
    }
    void attach_run(CLI::App* app) {
        app->add_option("--seed", seed, "seed for the per-day phase sequence");
        app->add_option("--workers", workers, "worker threads");
        app->add_option("--days", days, "number of simulated days");
    }
    Scenario load() const {
        auto ov = overrides;
        // flags become overrides so that the manifest reproduces the run
        if (seed) ov.push_back(fmt::format("simulation.seed={}", *seed));
        if (workers) ov.push_back(fmt::format("simulation.workers={}", *workers));
        if (days) ov.push_back(fmt::format("simulation.n_days={}", *days));
        return load_scenario(path, ov);
    }
    fs::path output() const { return prepare_output_dir(out_dir.empty() ? default_out_dir() : out_dir); }
};

void emit_campaign(const fs::path& dir, const Scenario& sc, const std::vector<simulator::SweepPoint>& points,
                   bool with_x, const std::string& axis) {
    write_file(dir / "manifest.yaml", [&](std::ostream& o) { write_manifest(o, sc); });
    write_file(dir / "report.csv", [&](std::ostream& o) { write_report_csv(o, points, with_x); });
    write_file(dir / "links.csv", [&](std::ostream& o) { write_links_csv(o, points, with_x); });
    write_file(dir / "summary.json", [&](std::ostream& o) { write_summary_json(o, points, with_x, axis); });
    if (with_x) write_curves(dir, points);
}

void print_stats(std::ostream& out, const simulator::CampaignResult& r) {
    for (const auto& [name, s] : r.stats) out << fmt::format("  {:<16} mean {:.6g}  std {:.3g}\n", name, s.mean, s.std);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            v.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError(fmt::format("'{}' is not an integer satellite index", tok));
        }
    }
    return v;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Twin-field QKD ring constellation toolkit"};
    app.require_subcommand(1);

    // simulate
    ScenarioArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "run a multi-day campaign for one scenario");
    sim_args.attach(sim, true);
    sim_args.attach_run(sim);

    // sweep
    ScenarioArgs sw_args;
    std::string axis;
    std::vector<double> values;
    auto* sw = app.add_subcommand("sweep", "one campaign per value of a swept parameter");
    sw_args.attach(sw, true);
    sw_args.attach_run(sw);
    sw->add_option("--axis", axis, "ns or latitude")->required()->check(CLI::IsMember({"ns", "latitude"}));
    sw->add_option("--values", values, "comma-separated values")->required()->delimiter(',');

    // linkbudget
    ScenarioArgs lb_args;
    bool lb_pass = false, lb_isl = false;
    std::optional<double> zenith_deg, distance_km;
    std::optional<int> lb_ns;
    int lb_r = 1;
    auto* lb = app.add_subcommand("linkbudget", "uplink pass profile or inter-satellite link loss");
    lb_args.attach(lb, false);
    lb->add_flag("--pass", lb_pass, "zenith pass loss profile (writes pass_loss.csv)");
    lb->add_flag("--isl", lb_isl, "inter-satellite link loss");
    lb->add_option("--zenith-deg", zenith_deg, "single uplink evaluation at this zenith angle");
    lb->add_option("--distance-km", distance_km, "ISL length");
    lb->add_option("--ns", lb_ns, "ring size; ISL length becomes the ring chord");
    lb->add_option("--r", lb_r, "ring distance for --ns");

    // keyrate
    ScenarioArgs kr_args;
    std::vector<double> loss_db;
    double duration_s = 0.0;
    auto* kr = app.add_subcommand("keyrate", "optimised finite-key length of a single link");
    kr_args.attach(kr, false);
    kr->add_option("--loss-db", loss_db, "total channel loss(es) in dB")->required()->delimiter(',');
    kr->add_option("--duration-s", duration_s, "session duration")->required();

    // security
    int ns = 12, ai = 0, bk = -1, rr = 2, rings = 1;
    std::string compromised, sec_file, sec_out;
    bool want_min = false, no_attach = false;
    std::uint64_t sec_seed = 1;
    std::size_t key_len = 64;
    long long budget = 5'000'000;
    auto* sec = app.add_subcommand("security", "XOR relay round trip and adversary recoverability");
    sec->add_option("--file", sec_file, "security scenario (YAML: n_sats, i, k, r, rings, compromised)");
    sec->add_option("--ns", ns, "ring size");
    sec->add_option("--i", ai, "Alice's serving satellite");
    sec->add_option("--k", bk, "Bob's serving satellite (default i + N/2)");
    sec->add_option("--r", rr, "neighbour range");
    sec->add_option("--rings", rings, "number of rings");
    sec->add_option("--compromised", compromised, "satellite indices, comma separated; ';' separates rings");
    sec->add_flag("--min", want_min, "also search the minimum compromise set");
    sec->add_flag("--no-attachments", no_attach, "exclude attachment satellites from the minimum search");
    sec->add_option("--budget", budget, "recoverability checks allowed in the minimum search");
    sec->add_option("--seed", sec_seed, "seed for the round-trip keys");
    sec->add_option("--key-len", key_len, "round-trip key length in bits");
    sec->add_option("--out", sec_out, "also write verdict.json here");

    // validate
    ScenarioArgs val_args;
    auto* val = app.add_subcommand("validate", "load a scenario and check every invariant");
    val_args.attach(val, true);

    try {
        std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*sim) {
            const Scenario sc = sim_args.load();
            const auto dir = sim_args.output();
            std::vector<simulator::SweepPoint> pts{{0.0, simulator::run_campaign(sc.config)}};
            emit_campaign(dir, sc, pts, false, "");
            out << "campaign over " << sc.config.n_days << " day(s), outputs in " << dir.string() << "\n";
            print_stats(out, pts.front().result);
        } else if (*sw) {
            const Scenario sc = sw_args.load();
            const auto dir = sw_args.output();
            const auto ax = axis == "ns" ? simulator::SweepAxis::NumSats : simulator::SweepAxis::Latitude;
            for (double v : values) {
                simulator::ScenarioConfig c = sc.config;
                if (ax == simulator::SweepAxis::NumSats) {
                    require(std::floor(v) == v, fmt::format("sweep: satellite count {} is not an integer", v));
                    c.constellation.num_sats = static_cast<int>(v);
                } else {
                    c.gs_latitude_deg = v;
                }
                c.validate();
            }
            const auto pts = simulator::sweep(sc.config, ax, values);
            emit_campaign(dir, sc, pts, true, axis);
            out << "sweep over " << axis << " (" << pts.size() << " points), outputs in " << dir.string() << "\n";
            for (const auto& p : pts) {
                out << axis << " = " << num(p.x) << "\n";
                print_stats(out, p.result);
            }
        } else if (*lb) {
            const Scenario sc = lb_args.load();
            const auto& cfg = sc.config;
            nlohmann::ordered_json j;
            if (!lb_pass && !lb_isl && !zenith_deg)
                throw ValidationError("linkbudget: choose --pass, --isl or --zenith-deg");
            const linkbudget::UplinkModel up(cfg.optics, cfg.turbulence, cfg.constellation.altitude_km * 1e3);
            if (zenith_deg) {
                const auto b = up.evaluate(*zenith_deg * kDegToRad);
                j["uplink"] = {{"zenith_deg", *zenith_deg},          {"slant_range_km", b.slant_range_m * 1e-3},
                               {"loss_db", linkbudget::to_db(b.total)}, {"extinction_db", linkbudget::to_db(b.extinction)},
                               {"free_space_db", linkbudget::to_db(b.free_space)},
                               {"turbulence_db", linkbudget::to_db(b.turbulence)}, {"fried_r0_m", b.fried_r0_m}};
            }
            if (lb_isl) {
                double d = 0.0;
                if (lb_ns) {
                    require(*lb_ns >= 3 && lb_r >= 1 && 2 * lb_r <= *lb_ns, "linkbudget: need 1 <= r <= N/2");
                    d = geometry::ring_chord_km(cfg.constellation.orbit_radius_km(), *lb_ns, lb_r);
                } else {
                    require(distance_km.has_value(), "linkbudget --isl needs --distance-km or --ns");
                    d = *distance_km;
                }
                const auto b = linkbudget::isl_breakdown(d * 1e3, cfg.optics);
                j["isl"] = {{"distance_km", d},
                            {"loss_db", linkbudget::to_db(b.total)},
                            {"geometric_db", linkbudget::to_db(b.geometric)},
                            {"pointing_db", linkbudget::to_db(b.pointing)},
                            {"beam_radius_m", b.beam_radius_m}};
            }
            if (lb_pass) {
                const auto dir = lb_args.output();
                // a polar plane whose ground track crosses the station at t = 0
                geometry::ConstellationSpec spec = cfg.constellation;
                spec.kind = geometry::ConstellationKind::Type1Polar;
                spec.epoch_s = 0.0;
                const geometry::GroundStation gs{1, 0.0, 0.0};
                const double half = 0.25 * spec.period_s();
                spec.initial_phase_deg = 0.0;
                const auto sessions = geometry::find_sessions(spec, gs, -half, half, cfg.dt_s / 5.0, cfg.optics.max_zenith_deg);
                geometry::VisibilitySession pass;
                for (const auto& s : sessions)
                    if (s.serving_sat == 0) pass = s;
                require(pass.duration_s() > 0.0, "linkbudget: no zenith pass found");
                const auto prof = linkbudget::session_loss_profile(pass, spec, gs, up, 1.0);
                write_file(dir / "manifest.yaml", [&](std::ostream& o) { write_manifest(o, sc); });
                write_file(dir / "pass_loss.csv", [&](std::ostream& o) { linkbudget::write_loss_csv(o, prof); });
                double lo = 1e300, hi = 0.0;
                for (const auto& s : prof) {
                    lo = std::min(lo, s.loss_db);
                    hi = std::max(hi, s.loss_db);
                }
                j["pass"] = {{"duration_s", pass.duration_s()}, {"min_loss_db", lo}, {"max_loss_db", hi},
                             {"samples", prof.size()}, {"file", (dir / "pass_loss.csv").string()}};
            }
            out << j.dump(2) << "\n";
        } else if (*kr) {
            const Scenario sc = kr_args.load();
            require(duration_s > 0.0, "keyrate: --duration-s must be > 0");
            const auto dir = kr_args.output();
            std::vector<keyrate::RateTableRow> rows;
            for (double l : loss_db) {
                require(l >= 0.0, "keyrate: loss must be >= 0 dB");
                keyrate::ChannelModel ch = sc.config.channel;
                ch.efficiency = linkbudget::from_db(l);
                rows.push_back({l, duration_s, keyrate::optimize_sns(ch, duration_s, sc.config.eps, sc.config.optimizer)});
            }
            write_file(dir / "manifest.yaml", [&](std::ostream& o) { write_manifest(o, sc); });
            write_file(dir / "rate_table.csv", [&](std::ostream& o) { keyrate::write_rate_table(o, rows); });
            keyrate::write_rate_table(out, rows);
        } else if (*sec) {
            std::vector<std::vector<int>> comp;
            if (!sec_file.empty()) {
                YAML::Node n;
                try {
                    n = YAML::LoadFile(sec_file);
                } catch (const YAML::Exception& e) {
                    throw ValidationError(fmt::format("{}:{}: {}", sec_file, e.mark.line + 1, e.msg));
                }
                try {
                    for (const auto& kv : n) {
                        const auto key = kv.first.as<std::string>();
                        if (key == "n_sats") ns = kv.second.as<int>();
                        else if (key == "i") ai = kv.second.as<int>();
                        else if (key == "k") bk = kv.second.as<int>();
                        else if (key == "r") rr = kv.second.as<int>();
                        else if (key == "rings") rings = kv.second.as<int>();
                        else if (key == "compromised") comp = kv.second.as<std::vector<std::vector<int>>>();
                        else throw ValidationError(fmt::format("{}:{}: unknown field '{}'", sec_file, kv.first.Mark().line + 1, key));
                    }
                } catch (const YAML::Exception& e) {
                    throw ValidationError(fmt::format("{}:{}: {}", sec_file, e.mark.line + 1, e.msg));
                }
            }
            if (!compromised.empty()) {
                comp.clear();
                std::stringstream ss(compromised);
                std::string ring;
                while (std::getline(ss, ring, ';')) comp.push_back(parse_int_list(ring));
            }
            require(ns >= 3, "security: --ns must be >= 3");
            if (bk < 0) bk = (ai + ns / 2) % ns;
            const auto path = relay::build_paths(ns, ai, bk, rr, rings);
            const auto verdict = relay::adversary_can_recover(path, {comp});

            // round trip with seeded keys on every ring
            bool roundtrip = true;
            std::mt19937_64 rng(sec_seed);
            for (int ring = 0; ring < rings; ++ring) {
                const auto keys = relay::generate_link_keys(path, key_len, rng());
                const auto x = relay::BitString::random(key_len, rng);
                for (auto s : {relay::Segment::Plus, relay::Segment::Minus})
                    roundtrip = roundtrip && relay::recover(path, relay::forward(path, s, x, keys), keys) == x;
            }

            std::optional<relay::MinCompromiseResult> mc;
            if (want_min) mc = relay::min_compromise(path, {!no_attach, budget});
            std::stringstream js;
            relay::write_verdict_json(js, path, verdict, mc);
            auto j = nlohmann::ordered_json::parse(js.str());
            j["compromised"] = comp;
            j["roundtrip_ok"] = roundtrip;
            j["seed"] = sec_seed;
            const std::string text = j.dump(2) + "\n";
            out << text;
            if (!sec_out.empty()) {
                const auto dir = prepare_output_dir(sec_out);
                write_file(dir / "verdict.json", [&](std::ostream& o) { o << text; });
            }
        } else if (*val) {
            const Scenario sc = val_args.load();
            const auto& c = sc.config;
            const linkbudget::UplinkModel up(c.optics, c.turbulence, c.constellation.altitude_km * 1e3);
            (void)up.evaluate(c.optics.max_zenith_deg * kDegToRad);
            (void)relay::build_paths(c.constellation.num_sats, 0, c.constellation.num_sats / 2, 2, 1);
            for (const auto& p : keyrate::default_parameter_grid()) p.validate();
            out << "scenario is valid\n";
            write_manifest(out, sc);
        }
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace qkdring::cli
