#pragma once

// Table specs as JSON, stable hashing, itinerary strings, and CSV/JSON report
// emission with fixed number formatting.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "sinai/error.hpp"
#include "sinai/geometry.hpp"
#include "sinai/singularity.hpp"

namespace sinai {

inline constexpr const char* tool_name = "sinai";
inline constexpr const char* tool_version = "0.1.0";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Table specs.

inline json spec_to_json(const TableSpec& spec)
{
    if (const auto* h = std::get_if<HexagonalFamily>(&spec))
        return {{"family", "hexagonal"}, {"d", h->d}};
    if (const auto* s = std::get_if<SquareFamily>(&spec))
        return {{"family", "square"}, {"R", s->R}, {"R_prime", s->Rprime}};
    const auto& c = std::get<CustomFamily>(spec);
    json sc = json::array();
    for (const auto& s : c.scatterers)
        sc.push_back({{"center", {s.center.x, s.center.y}}, {"radius", s.radius}});
    return {{"family", "custom"}, {"a1", {c.a1.x, c.a1.y}}, {"a2", {c.a2.x, c.a2.y}}, {"scatterers", sc}};
}

/// Accepts a bare spec or an object with a "table" member.
inline TableSpec spec_from_json(const json& in)
{
    try {
        const json& j = in.contains("table") ? in.at("table") : in;
        const std::string fam = j.at("family").get<std::string>();
        auto vec = [](const json& v) {
            if (!v.is_array() || v.size() != 2)
                throw Error(ErrorCode::ConfigError, "expected a two-element array");
            return Vec2{v[0].get<double>(), v[1].get<double>()};
        };
        if (fam == "hexagonal")
            return HexagonalFamily{j.at("d").get<double>()};
        if (fam == "square")
            return SquareFamily{j.at("R").get<double>(), j.at("R_prime").get<double>()};
        if (fam == "custom") {
            CustomFamily c{vec(j.at("a1")), vec(j.at("a2")), {}};
            for (const auto& s : j.at("scatterers"))
                c.scatterers.push_back({vec(s.at("center")), s.at("radius").get<double>()});
            return c;
        }
        throw Error(ErrorCode::ConfigError, "unknown table family '" + fam + "'");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("bad table spec: ") + e.what());
    }
}

inline json read_json_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
}

inline TableSpec load_spec(const std::string& path) { return spec_from_json(read_json_file(path)); }

/// FNV-1a over the canonical JSON text of the spec, as 16 hex digits.
inline std::string spec_hash(const TableSpec& spec)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : spec_to_json(spec).dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Itinerary strings: "start|j:i,k j:i,k ..." (target scatterer : lattice cell).

inline std::string format_itinerary(const Itinerary& it)
{
    std::string s = std::to_string(it.start) + "|";
    for (std::size_t k = 0; k < it.symbols.size(); ++k) {
        const auto& y = it.symbols[k];
        if (k)
            s += ' ';
        s += std::to_string(y.scatterer) + ":" + std::to_string(y.translate.i) + "," + std::to_string(y.translate.j);
    }
    return s;
}

inline Itinerary parse_itinerary(const std::string& s)
{
    Itinerary it;
    const auto bar = s.find('|');
    if (bar == std::string::npos)
        throw Error(ErrorCode::ConfigError, "itinerary needs 'start|...': " + s);
    try {
        it.start = std::stoul(s.substr(0, bar));
        std::istringstream in(s.substr(bar + 1));
        std::string tok;
        while (in >> tok) {
            const auto colon = tok.find(':'), comma = tok.find(',');
            if (colon == std::string::npos || comma == std::string::npos || comma < colon)
                throw Error(ErrorCode::ConfigError, "bad symbol '" + tok + "'");
            it.symbols.push_back({std::stoul(tok.substr(0, colon)),
                                  {std::stoi(tok.substr(colon + 1, comma - colon - 1)), std::stoi(tok.substr(comma + 1))}});
        }
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::ConfigError, "bad itinerary '" + s + "'");
    }
    return it;
}

// ---------------------------------------------------------------------------
// Reports.

/// Shortest text that reads back to the same double.
inline std::string fmt(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int p = 15; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

/// A cell is a number, an integer, a boolean or text.
using Value = std::variant<double, long long, bool, std::string>;

struct ReportTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;

    void add(std::vector<Value> row)
    {
        if (row.size() != columns.size())
            throw Error(ErrorCode::InvalidInput, "row width differs from header in table " + name);
        rows.push_back(std::move(row));
    }
};

struct Report {
    std::string command;
    std::string spec_hash; ///< empty when no table is involved
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> parameters;
    std::vector<ReportTable> tables;

    ReportTable& table(std::string name, std::vector<std::string> columns)
    {
        tables.push_back({std::move(name), std::move(columns), {}});
        return tables.back();
    }
};

inline std::string cell_text(const Value& c)
{
    if (const auto* d = std::get_if<double>(&c))
        return fmt(*d);
    if (const auto* i = std::get_if<long long>(&c))
        return std::to_string(*i);
    if (const auto* b = std::get_if<bool>(&c))
        return *b ? "true" : "false";
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"')
            q += '"';
        q += ch;
    }
    return q + "\"";
}

/// Leading '#' lines carry provenance; each table is a "# table: name" line,
/// a header line and its rows.
inline std::string to_csv(const Report& r)
{
    std::ostringstream out;
    out << "# tool: " << tool_name << " " << tool_version << "\n";
    out << "# command: " << r.command << "\n";
    out << "# spec_hash: " << (r.spec_hash.empty() ? "none" : r.spec_hash) << "\n";
    out << "# seed: " << r.seed << "\n";
    for (const auto& [k, v] : r.parameters)
        out << "# " << k << ": " << v << "\n";
    for (const auto& t : r.tables) {
        out << "# table: " << t.name << "\n";
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            out << (c ? "," : "") << t.columns[c];
        out << "\n";
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c)
                out << (c ? "," : "") << cell_text(row[c]);
            out << "\n";
        }
    }
    return out.str();
}

inline json cell_json(const Value& c)
{
    if (const auto* d = std::get_if<double>(&c))
        return std::isfinite(*d) ? json(*d) : json(fmt(*d));
    if (const auto* i = std::get_if<long long>(&c))
        return *i;
    if (const auto* b = std::get_if<bool>(&c))
        return *b;
    return std::get<std::string>(c);
}

inline std::string to_json(const Report& r)
{
    json j;
    j["tool"] = tool_name;
    j["version"] = tool_version;
    j["command"] = r.command;
    j["spec_hash"] = r.spec_hash.empty() ? json(nullptr) : json(r.spec_hash);
    j["seed"] = r.seed;
    json params = json::object();
    for (const auto& [k, v] : r.parameters)
        params[k] = v;
    j["parameters"] = params;
    json tables = json::array();
    for (const auto& t : r.tables) {
        json rows = json::array();
        for (const auto& row : t.rows) {
            json o = json::object();
            for (std::size_t c = 0; c < row.size(); ++c)
                o[t.columns[c]] = cell_json(row[c]);
            rows.push_back(o);
        }
        tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", rows}});
    }
    j["tables"] = tables;
    return j.dump(2) + "\n";
}

/// Rows of one table of a to_csv document, header row first.
inline std::vector<std::vector<std::string>> read_csv_table(const std::string& text, const std::string& name)
{
    std::istringstream in(text);
    std::string line;
    bool inside = false;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.rfind("# table: ", 0) == 0) {
            if (inside)
                break;
            inside = line.substr(9) == name;
            continue;
        }
        if (!inside || line.rfind("#", 0) == 0)
            continue;
        std::vector<std::string> cells;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quoted) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cur += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        cells.push_back(cur);
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot write " + path);
    f << text;
    if (!f)
        throw Error(ErrorCode::IoError, "write failed for " + path);
}

} // namespace sinai
