#pragma once

#include <string>
#include <string_view>

#include "fdia/grid.hpp"

namespace fdia::ingest {

enum class CaseFormat { matpower_m, native_json };

struct CaseSource {
    CaseFormat format = CaseFormat::matpower_m;
    std::string text;
};

// Reads mpc.baseMVA, mpc.bus, mpc.branch and mpc.gen from a MATPOWER case
// file. Power is converted to per-unit, angles to radians, and bus numbers are
// remapped to ordinals in row order. Other fields are ignored.
grid::Grid parse_matpower_case(std::string_view text);

// Native JSON schema; ids are labels mapped to ordinals in listed order.
grid::Grid parse_grid_json(std::string_view text);

// Canonical JSON (sorted keys, shortest round-trip doubles, two-space indent).
std::string write_grid_json(const grid::Grid& grid);

grid::Grid parse_case(const CaseSource& source);

// Picks the format from the file extension (.json is native, anything else MATPOWER).
CaseSource load_case_file(const std::string& path);

}  // namespace fdia::ingest
