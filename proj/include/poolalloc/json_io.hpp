#pragma once

#include "poolalloc/model.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace poolalloc {

using json = nlohmann::json;

/// Body is not syntactically valid JSON (maps to HTTP 400).
class ParseError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

json to_json(const SquareMatrix& m);
json to_json(const Category& c);
json to_json(const Scenario& sc);
json to_json(const Strategy& s);

/// Structural decoding only; throws ValidationError("schema", ...) on missing/mistyped fields
/// and ValidationError("exposure dimension", ...) on non-square matrices. Does not call validate().
Scenario scenario_from_json(const json& j);
Strategy strategy_from_json(const json& j);

/// Parses text then decodes and validates; throws ParseError / ValidationError.
Scenario parse_scenario(const std::string& text);

json parse_json_text(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Stable hex digest of the canonical scenario serialization.
std::string content_hash(const Scenario& sc);

} // namespace poolalloc
