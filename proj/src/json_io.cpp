#include "poolalloc/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace poolalloc {

namespace {

[[noreturn]] void schema_error(const std::string& what)
{
    throw ValidationError("schema", what);
}

const json& field(const json& j, const char* name)
{
    auto it = j.find(name);
    if (it == j.end())
        schema_error(std::string("missing field '") + name + "'");
    return *it;
}

template <class T>
T get_as(const json& j, const char* name)
{
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        schema_error(std::string("field '") + name + "' has the wrong type");
    }
}

// Accepts nested rows ([[..],[..]]) or a flat row-major array of k*k numbers.
SquareMatrix matrix_from_json(const json& j, std::size_t k, const char* name)
{
    if (!j.is_array())
        schema_error(std::string("field '") + name + "' must be an array");
    SquareMatrix m(k);
    const std::string dim_msg = std::string(name) + " must be " + std::to_string(k) + "x" + std::to_string(k);
    if (!j.empty() && j.front().is_array()) {
        if (j.size() != k)
            throw ValidationError("exposure dimension", dim_msg);
        for (std::size_t i = 0; i < k; ++i) {
            if (!j[i].is_array() || j[i].size() != k)
                throw ValidationError("exposure dimension", dim_msg);
            for (std::size_t c = 0; c < k; ++c) {
                if (!j[i][c].is_number())
                    schema_error(std::string("field '") + name + "' has a non-numeric entry");
                m(i, c) = j[i][c].get<double>();
            }
        }
    } else {
        if (j.size() != k * k)
            throw ValidationError("exposure dimension", dim_msg);
        for (std::size_t x = 0; x < k * k; ++x) {
            if (!j[x].is_number())
                schema_error(std::string("field '") + name + "' has a non-numeric entry");
            m(x / k, x % k) = j[x].get<double>();
        }
    }
    return m;
}

} // namespace

json to_json(const SquareMatrix& m)
{
    json rows = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        json row = json::array();
        for (double x : m.row(i))
            row.push_back(x);
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Category& c)
{
    return json{{"id", c.id}, {"n", c.n}, {"p", c.p}, {"v", c.v}};
}

json to_json(const Scenario& sc)
{
    json cats = json::array();
    for (const auto& c : sc.categories)
        cats.push_back(to_json(c));
    return json{
        {"categories", cats},
        {"d", to_json(sc.exposure.d)},
        {"pi", to_json(sc.exposure.pi)},
        {"budget", sc.budget},
        {"max_group", sc.max_group},
        {"group_menu", sc.group_menu},
    };
}

json to_json(const Strategy& s)
{
    return json{{"t", s.t}, {"g", s.g}};
}

Scenario scenario_from_json(const json& j)
{
    if (!j.is_object())
        schema_error("scenario must be a JSON object");
    Scenario sc;
    const auto& cats = field(j, "categories");
    if (!cats.is_array())
        schema_error("field 'categories' must be an array");
    for (const auto& cj : cats) {
        if (!cj.is_object())
            schema_error("category entries must be objects");
        Category c;
        c.id = get_as<std::string>(field(cj, "id"), "id");
        c.n = get_as<std::int64_t>(field(cj, "n"), "n");
        c.p = get_as<double>(field(cj, "p"), "p");
        if (cj.contains("v"))
            c.v = get_as<double>(cj["v"], "v");
        sc.categories.push_back(std::move(c));
    }
    const std::size_t k = sc.categories.size();
    sc.exposure.d = matrix_from_json(field(j, "d"), k, "d");
    sc.exposure.pi = matrix_from_json(field(j, "pi"), k, "pi");
    sc.budget = get_as<std::int64_t>(field(j, "budget"), "budget");
    sc.max_group = get_as<int>(field(j, "max_group"), "max_group");
    if (j.contains("group_menu"))
        sc.group_menu = get_as<std::vector<int>>(j["group_menu"], "group_menu");
    return sc;
}

Strategy strategy_from_json(const json& j)
{
    if (!j.is_object())
        schema_error("strategy must be a JSON object");
    Strategy s;
    s.t = get_as<std::vector<std::int64_t>>(field(j, "t"), "t");
    s.g = get_as<std::vector<int>>(field(j, "g"), "g");
    return s;
}

json parse_json_text(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
}

Scenario parse_scenario(const std::string& text)
{
    Scenario sc = scenario_from_json(parse_json_text(text));
    sc.validate();
    return sc;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    out << contents;
    if (!out)
        throw std::runtime_error("write failed for '" + path + "'");
}

std::string content_hash(const Scenario& sc)
{
    // FNV-1a over the canonical dump
    const std::string text = to_json(sc).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace poolalloc
