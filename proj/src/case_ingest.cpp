#include "fdia/case_ingest.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "fdia/digest.hpp"
#include "fdia/error.hpp"

namespace fdia::ingest {
namespace {

using grid::Branch;
using grid::Bus;
using grid::BusKind;
using grid::Gen;
using grid::Grid;
using nlohmann::json;

constexpr double deg_to_rad = std::numbers::pi / 180.0;

struct Row {
    std::vector<double> values;
    std::size_t line = 0;
};

struct MatrixBlock {
    std::vector<Row> rows;
    std::size_t line = 0;
};

struct ScalarValue {
    double value = 0.0;
    std::size_t line = 0;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

double parse_number(std::string_view token, std::size_t line) {
    // from_chars is locale-independent and rejects a leading '+', strip it.
    if (!token.empty() && token.front() == '+') {
        token.remove_prefix(1);
    }
    double value = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        if (token == "Inf" || token == "inf") return HUGE_VAL;
        if (token == "-Inf" || token == "-inf") return -HUGE_VAL;
        throw ParseError("invalid number '" + std::string(token) + "'", line);
    }
    return value;
}

class MatpowerScanner {
  public:
    explicit MatpowerScanner(std::string_view text) {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) {
                end = text.size();
            }
            std::string_view line = text.substr(start, end - start);
            if (auto pct = line.find('%'); pct != std::string_view::npos) {
                line = line.substr(0, pct);
            }
            lines_.push_back(line);
            if (end == text.size()) {
                break;
            }
            start = end + 1;
        }
        scan();
    }

    std::size_t line_count() const { return lines_.size(); }

    const MatrixBlock& matrix(const std::string& name) const {
        auto it = matrices_.find(name);
        if (it == matrices_.end()) {
            throw ParseError("missing matrix assignment mpc." + name, line_count());
        }
        return it->second;
    }

    const ScalarValue& scalar(const std::string& name) const {
        auto it = scalars_.find(name);
        if (it == scalars_.end()) {
            throw ParseError("missing scalar assignment mpc." + name, line_count());
        }
        return it->second;
    }

  private:
    void scan() {
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            std::string_view line = lines_[i];
            const std::size_t at = line.find("mpc.");
            if (at == std::string_view::npos) {
                continue;
            }
            std::size_t p = at + 4;
            std::size_t name_end = p;
            while (name_end < line.size() &&
                   (std::isalnum(static_cast<unsigned char>(line[name_end])) || line[name_end] == '_')) {
                ++name_end;
            }
            const std::string name(line.substr(p, name_end - p));
            p = name_end;
            while (p < line.size() && is_space(line[p])) ++p;
            if (p >= line.size() || line[p] != '=') {
                continue;
            }
            ++p;
            while (p < line.size() && is_space(line[p])) ++p;
            if (p < line.size() && line[p] == '[') {
                i = scan_matrix(name, i, p + 1);
            } else if (p < line.size() && line[p] != '\'') {
                std::string_view rest = line.substr(p);
                if (auto semi = rest.find(';'); semi != std::string_view::npos) {
                    rest = rest.substr(0, semi);
                }
                while (!rest.empty() && is_space(rest.back())) rest.remove_suffix(1);
                scalars_[name] = ScalarValue{parse_number(rest, i + 1), i + 1};
            }
        }
    }

    // Returns the index of the line holding the closing bracket.
    std::size_t scan_matrix(const std::string& name, std::size_t first_line, std::size_t offset) {
        MatrixBlock block;
        block.line = first_line + 1;
        Row row;
        auto finish_row = [&] {
            if (!row.values.empty()) {
                block.rows.push_back(std::move(row));
            }
            row = Row{};
        };
        for (std::size_t i = first_line; i < lines_.size(); ++i) {
            std::string_view line = lines_[i];
            std::size_t p = (i == first_line) ? offset : 0;
            while (p < line.size()) {
                const char c = line[p];
                if (is_space(c) || c == ',') {
                    ++p;
                } else if (c == ';') {
                    finish_row();
                    ++p;
                } else if (c == ']') {
                    finish_row();
                    matrices_[name] = std::move(block);
                    return i;
                } else {
                    std::size_t end = p;
                    while (end < line.size() && !is_space(line[end]) && line[end] != ',' &&
                           line[end] != ';' && line[end] != ']') {
                        ++end;
                    }
                    if (row.values.empty()) {
                        row.line = i + 1;
                    }
                    row.values.push_back(parse_number(line.substr(p, end - p), i + 1));
                    p = end;
                }
            }
            finish_row();
        }
        throw ParseError("unterminated matrix mpc." + name, block.line);
    }

    std::vector<std::string_view> lines_;
    std::map<std::string, MatrixBlock> matrices_;
    std::map<std::string, ScalarValue> scalars_;
};

double column(const Row& row, std::size_t index, std::optional<double> fallback, const char* what) {
    if (index < row.values.size()) {
        return row.values[index];
    }
    if (!fallback) {
        throw ParseError(std::string("row has no ") + what + " column", row.line);
    }
    return *fallback;
}

std::string format_bus_number(double value) {
    if (std::floor(value) == value && std::abs(value) < 9.0e15) {
        return std::to_string(static_cast<long long>(value));
    }
    std::ostringstream out;
    out << value;
    return out.str();
}

}  // namespace

Grid parse_matpower_case(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw ParseError("empty case text", 1);
    }
    MatpowerScanner scanner(text);
    Grid grid;
    const ScalarValue base = scanner.scalar("baseMVA");
    if (!(base.value > 0.0)) {
        throw ParseError("baseMVA must be positive", base.line);
    }
    grid.base_mva = base.value;
    const MatrixBlock& bus_block = scanner.matrix("bus");
    const MatrixBlock& branch_block = scanner.matrix("branch");
    const MatrixBlock& gen_block = scanner.matrix("gen");

    std::map<double, std::size_t> ordinal_of;
    std::size_t slack_count = 0;
    for (const Row& row : bus_block.rows) {
        Bus bus;
        const double number = column(row, 0, std::nullopt, "BUS_I");
        const int type = static_cast<int>(column(row, 1, std::nullopt, "BUS_TYPE"));
        bus.label = format_bus_number(number);
        switch (type) {
            case 1: bus.kind = BusKind::pq; break;
            case 2: bus.kind = BusKind::pv; break;
            case 3: bus.kind = BusKind::slack; break;
            default:
                throw ValidationError("line " + std::to_string(row.line) + ": bus " + bus.label +
                                      " has unsupported type " + std::to_string(type));
        }
        bus.p_load = column(row, 2, 0.0, "PD") / grid.base_mva;
        bus.q_load = column(row, 3, 0.0, "QD") / grid.base_mva;
        bus.g_shunt = column(row, 4, 0.0, "GS") / grid.base_mva;
        bus.b_shunt = column(row, 5, 0.0, "BS") / grid.base_mva;
        bus.v_init = column(row, 7, 1.0, "VM");
        bus.theta_init = column(row, 8, 0.0, "VA") * deg_to_rad;
        if (!ordinal_of.emplace(number, grid.buses.size()).second) {
            throw ValidationError("line " + std::to_string(row.line) + ": duplicate bus " + bus.label);
        }
        if (bus.kind == BusKind::slack) {
            ++slack_count;
            grid.slack_index = grid.buses.size();
        }
        grid.buses.push_back(std::move(bus));
    }
    if (slack_count != 1) {
        throw ValidationError("expected exactly one slack bus (type 3), found " +
                              std::to_string(slack_count));
    }

    auto lookup = [&](double number, const Row& row, const char* what) {
        auto it = ordinal_of.find(number);
        if (it == ordinal_of.end()) {
            throw ValidationError("line " + std::to_string(row.line) + ": " + what +
                                  " references unknown bus " + format_bus_number(number));
        }
        return it->second;
    };

    for (const Row& row : branch_block.rows) {
        Branch br;
        br.from = lookup(column(row, 0, std::nullopt, "F_BUS"), row, "branch");
        br.to = lookup(column(row, 1, std::nullopt, "T_BUS"), row, "branch");
        br.r = column(row, 2, std::nullopt, "BR_R");
        br.x = column(row, 3, std::nullopt, "BR_X");
        br.b_charging = column(row, 4, 0.0, "BR_B");
        const double tap = column(row, 8, 0.0, "TAP");
        br.tap = (tap == 0.0) ? 1.0 : tap;
        br.shift = column(row, 9, 0.0, "SHIFT") * deg_to_rad;
        br.in_service = column(row, 10, 1.0, "BR_STATUS") > 0.0;
        grid.branches.push_back(br);
    }
    for (const Row& row : gen_block.rows) {
        Gen gen;
        gen.bus = lookup(column(row, 0, std::nullopt, "GEN_BUS"), row, "generator");
        gen.p_gen = column(row, 1, 0.0, "PG") / grid.base_mva;
        gen.q_gen = column(row, 2, 0.0, "QG") / grid.base_mva;
        gen.v_set = column(row, 5, 1.0, "VG");
        gen.in_service = column(row, 7, 1.0, "GEN_STATUS") > 0.0;
        grid.gens.push_back(gen);
    }
    grid::validate(grid);
    return grid;
}

namespace {

class JsonReader {
  public:
    static const json& member(const json& obj, const std::string& path, const char* key) {
        if (!obj.is_object()) {
            throw SchemaError(path, "expected an object");
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            throw SchemaError(path + "." + key, "required field is missing");
        }
        return *it;
    }

    static double number(const json& obj, const std::string& path, const char* key,
                         std::optional<double> fallback = std::nullopt) {
        if (fallback && obj.is_object() && !obj.contains(key)) {
            return *fallback;
        }
        const json& v = member(obj, path, key);
        if (!v.is_number()) {
            throw SchemaError(path + "." + key, "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            throw SchemaError(path + "." + key, "expected a finite number");
        }
        return d;
    }

    static bool boolean(const json& obj, const std::string& path, const char* key, bool fallback) {
        if (obj.is_object() && !obj.contains(key)) {
            return fallback;
        }
        const json& v = member(obj, path, key);
        if (!v.is_boolean()) {
            throw SchemaError(path + "." + key, "expected a boolean");
        }
        return v.get<bool>();
    }

    static std::string label(const json& v, const std::string& path) {
        if (v.is_string()) {
            return v.get<std::string>();
        }
        if (v.is_number_integer()) {
            return std::to_string(v.get<long long>());
        }
        throw SchemaError(path, "expected a string or integer id");
    }

    static const json& array(const json& obj, const std::string& path, const char* key) {
        const json& v = member(obj, path, key);
        if (!v.is_array()) {
            throw SchemaError(path + "." + key, "expected an array");
        }
        return v;
    }
};

bool is_canonical_integer(const std::string& s) {
    if (s.empty() || s.size() > 18) return false;
    std::size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    if (s[i] == '0') return s.size() == i + 1 && i == 0;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    return true;
}

json label_to_json(const std::string& label) {
    if (is_canonical_integer(label)) {
        return json(std::stoll(label));
    }
    return json(label);
}

}  // namespace

Grid parse_grid_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", std::string("malformed JSON: ") + e.what());
    }
    using R = JsonReader;
    Grid grid;
    grid.base_mva = R::number(doc, "$", "base_mva");
    const json& buses = R::array(doc, "$", "buses");
    const json& branches = R::array(doc, "$", "branches");
    const json& gens = R::array(doc, "$", "gens");

    std::map<std::string, std::size_t> ordinal_of;
    std::optional<std::size_t> slack;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string path = "$.buses[" + std::to_string(i) + "]";
        const json& b = buses[i];
        Bus bus;
        bus.label = R::label(R::member(b, path, "id"), path + ".id");
        const json& kind = R::member(b, path, "kind");
        if (!kind.is_string()) {
            throw SchemaError(path + ".kind", "expected a string");
        }
        try {
            bus.kind = grid::bus_kind_from_string(kind.get<std::string>());
        } catch (const ValidationError& e) {
            throw SchemaError(path + ".kind", e.what());
        }
        bus.p_load = R::number(b, path, "p_load");
        bus.q_load = R::number(b, path, "q_load");
        bus.g_shunt = R::number(b, path, "g_shunt", 0.0);
        bus.b_shunt = R::number(b, path, "b_shunt", 0.0);
        bus.v_init = R::number(b, path, "v_init", 1.0);
        bus.theta_init = R::number(b, path, "theta_init", 0.0);
        if (!ordinal_of.emplace(bus.label, i).second) {
            throw SchemaError(path + ".id", "duplicate bus id '" + bus.label + "'");
        }
        if (bus.kind == BusKind::slack) {
            if (slack) {
                throw SchemaError(path + ".kind", "second slack bus");
            }
            slack = i;
        }
        grid.buses.push_back(std::move(bus));
    }
    if (!slack) {
        throw SchemaError("$.buses", "no slack bus");
    }
    grid.slack_index = *slack;

    auto resolve = [&](const json& v, const std::string& path) {
        const std::string id = R::label(v, path);
        auto it = ordinal_of.find(id);
        if (it == ordinal_of.end()) {
            throw SchemaError(path, "unknown bus id '" + id + "'");
        }
        return it->second;
    };

    for (std::size_t k = 0; k < branches.size(); ++k) {
        const std::string path = "$.branches[" + std::to_string(k) + "]";
        const json& b = branches[k];
        Branch br;
        br.from = resolve(R::member(b, path, "from"), path + ".from");
        br.to = resolve(R::member(b, path, "to"), path + ".to");
        br.r = R::number(b, path, "r");
        br.x = R::number(b, path, "x");
        br.b_charging = R::number(b, path, "b", 0.0);
        br.tap = R::number(b, path, "tap", 1.0);
        br.shift = R::number(b, path, "shift", 0.0);
        br.in_service = R::boolean(b, path, "in_service", true);
        grid.branches.push_back(br);
    }
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const std::string path = "$.gens[" + std::to_string(k) + "]";
        const json& g = gens[k];
        Gen gen;
        gen.bus = resolve(R::member(g, path, "bus"), path + ".bus");
        gen.p_gen = R::number(g, path, "p");
        gen.q_gen = R::number(g, path, "q", 0.0);
        gen.v_set = R::number(g, path, "v_set", 1.0);
        gen.in_service = R::boolean(g, path, "in_service", true);
        grid.gens.push_back(gen);
    }
    grid::validate(grid);
    return grid;
}

std::string write_grid_json(const Grid& grid) {
    json doc;
    doc["base_mva"] = grid.base_mva;
    json buses = json::array();
    for (const Bus& bus : grid.buses) {
        buses.push_back({{"id", label_to_json(bus.label)},
                         {"kind", grid::to_string(bus.kind)},
                         {"p_load", bus.p_load},
                         {"q_load", bus.q_load},
                         {"g_shunt", bus.g_shunt},
                         {"b_shunt", bus.b_shunt},
                         {"v_init", bus.v_init},
                         {"theta_init", bus.theta_init}});
    }
    json branches = json::array();
    for (const Branch& br : grid.branches) {
        branches.push_back({{"from", label_to_json(grid.buses.at(br.from).label)},
                            {"to", label_to_json(grid.buses.at(br.to).label)},
                            {"r", br.r},
                            {"x", br.x},
                            {"b", br.b_charging},
                            {"tap", br.tap},
                            {"shift", br.shift},
                            {"in_service", br.in_service}});
    }
    json gens = json::array();
    for (const Gen& gen : grid.gens) {
        gens.push_back({{"bus", label_to_json(grid.buses.at(gen.bus).label)},
                        {"p", gen.p_gen},
                        {"q", gen.q_gen},
                        {"v_set", gen.v_set},
                        {"in_service", gen.in_service}});
    }
    doc["buses"] = std::move(buses);
    doc["branches"] = std::move(branches);
    doc["gens"] = std::move(gens);
    return doc.dump(2) + "\n";
}

Grid parse_case(const CaseSource& source) {
    if (source.text.empty()) {
        throw InputError("case source is empty");
    }
    return source.format == CaseFormat::native_json ? parse_grid_json(source.text)
                                                     : parse_matpower_case(source.text);
}

CaseSource load_case_file(const std::string& path) {
    CaseSource source;
    source.text = read_text_file(path);
    const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    source.format = is_json ? CaseFormat::native_json : CaseFormat::matpower_m;
    return source;
}

}  // namespace fdia::ingest
