#include "scenario.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "qkdring/error.hpp"

namespace qkdring::cli {

using simulator::ScenarioConfig;

namespace {

struct Field {
    std::string section;
    std::string key;
    std::function<void(ScenarioConfig&, const YAML::Node&)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

template <class T>
T scalar_as(const YAML::Node& n) {
    if (!n.IsScalar()) throw YAML::RepresentationException(n.Mark(), "expected a scalar value");
    return n.as<T>();
}

Field real(std::string s, std::string k, std::function<double&(ScenarioConfig&)> ref) {
    auto get = [ref](const ScenarioConfig& c) { return fmt_double(ref(const_cast<ScenarioConfig&>(c))); };
    return {std::move(s), std::move(k), [ref](ScenarioConfig& c, const YAML::Node& n) { ref(c) = scalar_as<double>(n); },
            get};
}

Field integer(std::string s, std::string k, std::function<int&(ScenarioConfig&)> ref) {
    auto get = [ref](const ScenarioConfig& c) { return std::to_string(ref(const_cast<ScenarioConfig&>(c))); };
    return {std::move(s), std::move(k), [ref](ScenarioConfig& c, const YAML::Node& n) { ref(c) = scalar_as<int>(n); },
            get};
}

Field boolean(std::string s, std::string k, std::function<bool&(ScenarioConfig&)> ref) {
    auto get = [ref](const ScenarioConfig& c) { return std::string(ref(const_cast<ScenarioConfig&>(c)) ? "true" : "false"); };
    return {std::move(s), std::move(k), [ref](ScenarioConfig& c, const YAML::Node& n) { ref(c) = scalar_as<bool>(n); },
            get};
}

template <class E>
Field choice(std::string s, std::string k, std::function<E&(ScenarioConfig&)> ref,
             std::vector<std::pair<std::string, E>> names) {
    auto set = [ref, names, s, k](ScenarioConfig& c, const YAML::Node& n) {
        const auto v = scalar_as<std::string>(n);
        for (const auto& [name, e] : names)
            if (name == v) {
                ref(c) = e;
                return;
            }
        std::string allowed;
        for (const auto& [name, e] : names) allowed += (allowed.empty() ? "" : ", ") + name;
        throw YAML::RepresentationException(n.Mark(), fmt::format("{}.{}: '{}' is not one of {}", s, k, v, allowed));
    };
    auto get = [ref, names](const ScenarioConfig& c) {
        const E e = ref(const_cast<ScenarioConfig&>(c));
        for (const auto& [name, v] : names)
            if (v == e) return name;
        return std::string("?");
    };
    return {std::move(s), std::move(k), set, get};
}

const std::vector<Field>& fields() {
    using geometry::ConstellationKind;
    using keyrate::BoundMode;
    using keyrate::CorrectionForm;
    using keyrate::Pooling;
    using linkbudget::TfLinkMode;
    static const std::vector<Field> f = {
        choice<ConstellationKind>("constellation", "type", [](ScenarioConfig& c) -> ConstellationKind& { return c.constellation.kind; },
                                  {{"type1", ConstellationKind::Type1Polar}, {"type2", ConstellationKind::Type2Equatorial}}),
        integer("constellation", "num_sats", [](ScenarioConfig& c) -> int& { return c.constellation.num_sats; }),
        real("constellation", "altitude_km", [](ScenarioConfig& c) -> double& { return c.constellation.altitude_km; }),
        real("constellation", "atm_shell_km", [](ScenarioConfig& c) -> double& { return c.constellation.atm_shell_km; }),
        real("constellation", "epoch_s", [](ScenarioConfig& c) -> double& { return c.constellation.epoch_s; }),
        real("constellation", "initial_phase_deg", [](ScenarioConfig& c) -> double& { return c.constellation.initial_phase_deg; }),

        real("ground_stations", "latitude_deg", [](ScenarioConfig& c) -> double& { return c.gs_latitude_deg; }),
        real("ground_stations", "longitude_deg", [](ScenarioConfig& c) -> double& { return c.gs_longitude_deg; }),

        real("optics", "wavelength_m", [](ScenarioConfig& c) -> double& { return c.optics.wavelength_m; }),
        real("optics", "beam_divergence_rad", [](ScenarioConfig& c) -> double& { return c.optics.beam_divergence_rad; }),
        real("optics", "gs_tx_diameter_m", [](ScenarioConfig& c) -> double& { return c.optics.gs_tx_diameter_m; }),
        real("optics", "sat_tx_diameter_m", [](ScenarioConfig& c) -> double& { return c.optics.sat_tx_diameter_m; }),
        real("optics", "sat_rx_diameter_m", [](ScenarioConfig& c) -> double& { return c.optics.sat_rx_diameter_m; }),
        real("optics", "gs_beam_waist_m", [](ScenarioConfig& c) -> double& { return c.optics.gs_beam_waist_m; }),
        real("optics", "pointing_jitter_rad", [](ScenarioConfig& c) -> double& { return c.optics.pointing_jitter_rad; }),
        real("optics", "optics_efficiency", [](ScenarioConfig& c) -> double& { return c.optics.optics_efficiency; }),
        real("optics", "atm_attenuation_db_per_km", [](ScenarioConfig& c) -> double& { return c.optics.atm_attenuation_db_per_km; }),
        real("optics", "extinction_layer_km", [](ScenarioConfig& c) -> double& { return c.optics.extinction_layer_km; }),
        real("optics", "max_zenith_deg", [](ScenarioConfig& c) -> double& { return c.optics.max_zenith_deg; }),

        boolean("turbulence", "enabled", [](ScenarioConfig& c) -> bool& { return c.turbulence.enabled; }),
        real("turbulence", "wind_speed_mps", [](ScenarioConfig& c) -> double& { return c.turbulence.wind_speed_mps; }),
        real("turbulence", "cn2_ground", [](ScenarioConfig& c) -> double& { return c.turbulence.cn2_ground; }),
        real("turbulence", "gs_altitude_m", [](ScenarioConfig& c) -> double& { return c.turbulence.gs_altitude_m; }),
        real("turbulence", "top_altitude_m", [](ScenarioConfig& c) -> double& { return c.turbulence.top_altitude_m; }),

        real("channel", "detector_efficiency", [](ScenarioConfig& c) -> double& { return c.channel.detector_efficiency; }),
        real("channel", "dark_count_prob", [](ScenarioConfig& c) -> double& { return c.channel.dark_count_prob; }),
        real("channel", "optical_error", [](ScenarioConfig& c) -> double& { return c.channel.optical_error; }),
        real("channel", "rep_rate_hz", [](ScenarioConfig& c) -> double& { return c.channel.rep_rate_hz; }),
        real("channel", "error_correction_factor", [](ScenarioConfig& c) -> double& { return c.channel.error_correction_factor; }),
        choice<TfLinkMode>("channel", "tf_link", [](ScenarioConfig& c) -> TfLinkMode& { return c.tf_mode; },
                           {{"literal_max", TfLinkMode::LiteralMax}, {"asymmetric_arms", TfLinkMode::AsymmetricArms}}),

        real("security", "eps_cor", [](ScenarioConfig& c) -> double& { return c.eps.eps_cor; }),
        real("security", "eps_pa", [](ScenarioConfig& c) -> double& { return c.eps.eps_pa; }),
        real("security", "eps_hat", [](ScenarioConfig& c) -> double& { return c.eps.eps_hat; }),
        real("security", "eps_bar", [](ScenarioConfig& c) -> double& { return c.eps.eps_bar; }),
        real("security", "eps_n1", [](ScenarioConfig& c) -> double& { return c.eps.eps_n1; }),

        real("simulation", "t_total_s", [](ScenarioConfig& c) -> double& { return c.t_total_s; }),
        integer("simulation", "n_days", [](ScenarioConfig& c) -> int& { return c.n_days; }),
        {"simulation", "seed",
         [](ScenarioConfig& c, const YAML::Node& n) { c.seed = scalar_as<std::uint64_t>(n); },
         [](const ScenarioConfig& c) { return std::to_string(c.seed); }},
        real("simulation", "dt_s", [](ScenarioConfig& c) -> double& { return c.dt_s; }),
        boolean("simulation", "phase_variation", [](ScenarioConfig& c) -> bool& { return c.phase_variation; }),
        choice<Pooling>("simulation", "pooling", [](ScenarioConfig& c) -> Pooling& { return c.pooling; },
                        {{"daily", Pooling::Daily}, {"per_session", Pooling::PerSession}}),
        real("simulation", "bin_rel_tol", [](ScenarioConfig& c) -> double& { return c.bin_rel_tol; }),
        boolean("simulation", "isl_check", [](ScenarioConfig& c) -> bool& { return c.isl_check; }),
        integer("simulation", "workers", [](ScenarioConfig& c) -> int& { return c.workers; }),

        integer("optimizer", "starts", [](ScenarioConfig& c) -> int& { return c.optimizer.starts; }),
        integer("optimizer", "evaluations_per_start", [](ScenarioConfig& c) -> int& { return c.optimizer.evaluations_per_start; }),
        choice<BoundMode>("optimizer", "bounds", [](ScenarioConfig& c) -> BoundMode& { return c.optimizer.skl.mode; },
                          {{"finite", BoundMode::Finite}, {"asymptotic", BoundMode::Asymptotic}}),
        choice<CorrectionForm>("optimizer", "correction", [](ScenarioConfig& c) -> CorrectionForm& { return c.optimizer.skl.correction; },
                               {{"literal", CorrectionForm::Literal}, {"split", CorrectionForm::Split}}),
    };
    return f;
}

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

bool known_section(const std::string& s) {
    for (const auto& f : fields())
        if (f.section == s) return true;
    return false;
}

std::string where(const std::string& origin, const YAML::Mark& m) {
    if (m.is_null()) return origin;
    return fmt::format("{}:{}", origin, m.line + 1);
}

void assign(ScenarioConfig& c, const Field& f, const YAML::Node& value, const std::string& origin) {
    try {
        f.set(c, value);
    } catch (const YAML::Exception& e) {
        throw ValidationError(fmt::format("{}: field {}.{}: {}", where(origin, value.Mark()), f.section, f.key,
                                          e.msg.empty() ? std::string("invalid value") : e.msg));
    }
}

}  // namespace

std::vector<std::string> known_fields() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.section + "." + f.key);
    return out;
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
    ScenarioConfig cfg;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ValidationError(fmt::format("{}: malformed scenario: {}", where(origin, e.mark), e.msg));
    }
    if (root.IsNull()) return cfg;
    if (!root.IsMap()) throw ValidationError(fmt::format("{}: scenario must be a mapping of sections", where(origin, root.Mark())));

    for (const auto& sec : root) {
        const auto name = sec.first.as<std::string>();
        if (!known_section(name))
            throw ValidationError(fmt::format("{}: unknown section '{}'", where(origin, sec.first.Mark()), name));
        if (sec.second.IsNull()) continue;
        if (!sec.second.IsMap())
            throw ValidationError(fmt::format("{}: section '{}' must be a mapping", where(origin, sec.second.Mark()), name));
        for (const auto& kv : sec.second) {
            const auto key = kv.first.as<std::string>();
            const Field* f = find_field(name, key);
            if (!f) throw ValidationError(fmt::format("{}: unknown field '{}.{}'", where(origin, kv.first.Mark()), name, key));
            assign(cfg, *f, kv.second, origin);
        }
    }
    return cfg;
}

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ValidationError(fmt::format("override '{}': expected section.key=value", assignment));
    const std::string section = assignment.substr(0, dot);
    const std::string key = assignment.substr(dot + 1, eq - dot - 1);
    const Field* f = find_field(section, key);
    if (!f) throw ValidationError(fmt::format("override '{}': unknown field '{}.{}'", assignment, section, key));
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ValidationError(fmt::format("override '{}': {}", assignment, e.msg));
    }
    assign(cfg, *f, value, "override '" + assignment + "'");
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    Scenario s;
    s.source = path;
    s.overrides = overrides;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ValidationError(fmt::format("cannot read scenario file '{}'", path));
        std::stringstream buf;
        buf << in.rdbuf();
        s.config = parse_scenario(buf.str(), path);
    }
    for (const auto& o : overrides) apply_override(s.config, o);
    s.config.validate();
    return s;
}

void write_manifest(std::ostream& out, const Scenario& s) {
    out << "# resolved scenario\n";
    out << "# source: " << (s.source.empty() ? "(defaults)" : s.source) << "\n";
    for (const auto& o : s.overrides) out << "# override: " << o << "\n";
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            section = f.section;
            out << section << ":\n";
        }
        out << "  " << f.key << ": " << f.get(s.config) << "\n";
    }
}

}  // namespace qkdring::cli
