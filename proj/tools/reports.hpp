// Report files. Numbers are written with 17 significant digits so that
// repeated runs can be compared byte for byte.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qkdring/simulator.hpp"

namespace qkdring::cli {

/// Creates the directory (and parents) or throws RuntimeError.
std::filesystem::path prepare_output_dir(const std::string& requested);

/// One row per day per metric: x,day,metric,value (x empty for single campaigns).
void write_report_csv(std::ostream& out, const std::vector<simulator::SweepPoint>& points, bool with_x);

/// One row per day per carrying link.
void write_links_csv(std::ostream& out, const std::vector<simulator::SweepPoint>& points, bool with_x);

void write_summary_json(std::ostream& out, const std::vector<simulator::SweepPoint>& points, bool with_x,
                        const std::string& axis);

/// curves/<metric>.csv with columns x,mean,std.
void write_curves(const std::filesystem::path& dir, const std::vector<simulator::SweepPoint>& points);

}  // namespace qkdring::cli
