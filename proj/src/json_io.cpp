#include "specid/json_io.hpp"

#include <fstream>
#include <sstream>

#include "specid/error.hpp"

namespace specid {

using nlohmann::json;

namespace {

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

double num(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

std::vector<double> num_list(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_array())
        throw ValidationError(where + ": field '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : obj.at(key)) {
        if (!v.is_number()) throw ValidationError(where + ": field '" + key + "' must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

const json& array_field(const json& j, const char* key) {
    static const json empty = json::array();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_array()) throw ValidationError(std::string("measure: '") + key + "' must be an array");
    return j.at(key);
}

}  // namespace

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ValidationError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": malformed JSON");
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), path);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ValidationError(where + ": unknown field '" + key + "'");
    }
}

Measure measure_from_json(const json& j) {
    check_keys(j, {"atoms", "ac", "singular"}, "measure");
    std::vector<Atom> atoms;
    std::vector<AcPiece> ac;
    std::vector<SingularPiece> singular;
    std::size_t i = 0;
    for (const auto& a : array_field(j, "atoms")) {
        const std::string where = "measure.atoms[" + std::to_string(i++) + "]";
        check_keys(a, {"x", "w"}, where);
        atoms.push_back({num(a, "x", where), num(a, "w", where)});
    }
    i = 0;
    for (const auto& p : array_field(j, "ac")) {
        const std::string where = "measure.ac[" + std::to_string(i++) + "]";
        check_keys(p, {"l", "u", "density", "mass"}, where);
        if (!p.contains("density") || !p.at("density").is_string())
            throw ValidationError(where + ": field 'density' must be a string");
        ac.push_back(make_density_piece(p.at("density").get<std::string>(), num(p, "l", where), num(p, "u", where),
                                        num(p, "mass", where)));
    }
    i = 0;
    for (const auto& s : array_field(j, "singular")) {
        const std::string where = "measure.singular[" + std::to_string(i++) + "]";
        check_keys(s, {"kind", "r", "offsets", "probs", "l", "u", "mass"}, where);
        if (!s.contains("kind") || s.at("kind") != "ifs")
            throw ValidationError(where + ": field 'kind' must be \"ifs\"");
        singular.emplace_back(num(s, "r", where), num_list(s, "offsets", where), num_list(s, "probs", where),
                              num(s, "l", where), num(s, "u", where), num(s, "mass", where));
    }
    return Measure(std::move(atoms), std::move(ac), std::move(singular));
}

json measure_to_json(const Measure& m) {
    json j = json::object();
    json atoms = json::array();
    for (const auto& a : m.atoms()) atoms.push_back({{"x", a.position}, {"w", a.weight}});
    json ac = json::array();
    for (const auto& p : m.ac_pieces())
        ac.push_back({{"l", p.lower()}, {"u", p.upper()}, {"density", p.shape()}, {"mass", p.mass()}});
    json sing = json::array();
    for (const auto& s : m.singular_pieces())
        sing.push_back({{"kind", "ifs"},
                        {"r", s.ratio()},
                        {"offsets", s.offsets()},
                        {"probs", s.probs()},
                        {"l", s.lower()},
                        {"u", s.upper()},
                        {"mass", s.mass()}});
    j["atoms"] = atoms;
    j["ac"] = ac;
    j["singular"] = sing;
    return j;
}

Measure load_measure(const std::string& ref) {
    constexpr std::string_view prefix = "canonical:";
    if (ref.rfind(prefix, 0) == 0) return canonical_measure(ref.substr(prefix.size()));
    return measure_from_json(read_json_file(ref));
}

}  // namespace specid
