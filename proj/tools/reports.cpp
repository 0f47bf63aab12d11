#include "reports.hpp"

#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "qkdring/error.hpp"

namespace qkdring::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string x_cell(const simulator::SweepPoint& p, bool with_x) { return with_x ? num(p.x) + "," : std::string(); }

}  // namespace

fs::path prepare_output_dir(const std::string& requested) {
    fs::path dir = requested;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw RuntimeError(fmt::format("cannot create output directory '{}': {}", requested, ec.message()));
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw RuntimeError(fmt::format("output directory '{}' is not writable", requested));
    }
    fs::remove(probe, ec);
    return dir;
}

void write_report_csv(std::ostream& out, const std::vector<simulator::SweepPoint>& points, bool with_x) {
    out << (with_x ? "x," : "") << "day,metric,value\n";
    for (const auto& p : points)
        for (const auto& d : p.result.days)
            for (const auto& [name, v] : d.scalars()) out << x_cell(p, with_x) << d.day << ',' << name << ',' << num(v) << '\n';
}

void write_links_csv(std::ostream& out, const std::vector<simulator::SweepPoint>& points, bool with_x) {
    out << (with_x ? "x," : "")
        << "day,gs,serving_sat,partner_sat,block_size,bins,skl_bits,n_raw,n1_lower,e1ph_upper,qber_z,"
           "mu_z,mu1,mu2,p_send,p_z,p0,p1,delta\n";
    for (const auto& p : points)
        for (const auto& d : p.result.days)
            for (const auto& l : d.links) {
                const auto& b = l.acc.result.breakdown;
                out << x_cell(p, with_x) << d.day << ',' << l.gs << ',' << l.serving_sat << ',' << l.partner_sat << ','
                    << num(l.acc.block_size) << ',' << l.acc.bins << ',' << num(b.skl_bits) << ',' << num(b.n_raw) << ','
                    << num(b.n1_lower) << ',' << num(b.e1ph_upper) << ',' << num(b.qber_z);
                for (double v : l.acc.result.params.to_array()) out << ',' << num(v);
                out << '\n';
            }
}

void write_summary_json(std::ostream& out, const std::vector<simulator::SweepPoint>& points, bool with_x,
                        const std::string& axis) {
    out << "{\n";
    if (with_x) out << "  \"axis\": \"" << axis << "\",\n";
    out << "  \"points\": [\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        out << "    {\n";
        if (with_x) out << "      \"x\": " << num(p.x) << ",\n";
        out << "      \"n_days\": " << p.result.days.size() << ",\n";
        out << "      \"metrics\": {\n";
        for (std::size_t m = 0; m < p.result.stats.size(); ++m) {
            const auto& [name, s] = p.result.stats[m];
            out << "        \"" << name << "\": {\"mean\": " << num(s.mean) << ", \"std\": " << num(s.std) << "}"
                << (m + 1 < p.result.stats.size() ? "," : "") << '\n';
        }
        out << "      }\n    }" << (i + 1 < points.size() ? "," : "") << '\n';
    }
    out << "  ]\n}\n";
}

void write_curves(const fs::path& dir, const std::vector<simulator::SweepPoint>& points) {
    if (points.empty()) return;
    const fs::path cdir = dir / "curves";
    std::error_code ec;
    fs::create_directories(cdir, ec);
    if (ec) throw RuntimeError(fmt::format("cannot create '{}': {}", cdir.string(), ec.message()));
    for (const auto& [name, unused] : points.front().result.stats) {
        std::ofstream out(cdir / (name + ".csv"));
        if (!out) throw RuntimeError(fmt::format("cannot write curve file for {}", name));
        out << "x,mean,std\n";
        for (const auto& p : points) {
            const auto& s = p.result.stat(name);
            out << num(p.x) << ',' << num(s.mean) << ',' << num(s.std) << '\n';
        }
    }
}

}  // namespace qkdring::cli
