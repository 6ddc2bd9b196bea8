#pragma once

// JSON loading for measure specs, with error messages that carry
// line/column positions.

#include <string>

#include <json.hpp>

#include "specid/measure.hpp"

namespace specid {

/// Parses JSON text; syntax errors become ValidationError naming
/// source, line and column.
nlohmann::json parse_json(const std::string& text, const std::string& source);
/// Reads and parses a file; a missing file is a ValidationError naming the path.
nlohmann::json read_json_file(const std::string& path);

/// Rejects any key of obj outside the allowed list.
void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where);

/// Measure from {"atoms":[{"x","w"}], "ac":[{"l","u","density","mass"}],
/// "singular":[{"kind":"ifs","r","offsets","probs","l","u","mass"}]}.
Measure measure_from_json(const nlohmann::json& j);
nlohmann::json measure_to_json(const Measure& m);

/// Loads "canonical:NAME" or a JSON file path.
Measure load_measure(const std::string& ref);

}  // namespace specid
