#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "holinear/errors.hpp"
#include "holinear/flows.hpp"
#include "holinear/maps.hpp"

namespace holinear {

using Json = nlohmann::json;

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

namespace detail {

inline Mat parse_matrix(const Json& j, int dim) {
    require(j.is_array() && static_cast<int>(j.size()) == dim, ErrorCode::ParseError,
            "matrix L must be a dim x dim array of rows");
    Mat m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        require(j[i].is_array() && static_cast<int>(j[i].size()) == dim, ErrorCode::ParseError,
                "matrix row length mismatch at row " + std::to_string(i));
        for (int k = 0; k < dim; ++k) {
            require(j[i][k].is_number(), ErrorCode::ParseError, "matrix entries must be numbers");
            m(i, k) = j[i][k].get<double>();
        }
    }
    return m;
}

template <typename Term>
inline std::vector<std::vector<Term>> parse_terms(const Json& j, int dim, int min_degree) {
    std::vector<std::vector<Term>> terms(static_cast<std::size_t>(dim));
    require(j.is_array(), ErrorCode::ParseError, "terms must be an array");
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Json& t = j[i];
        require(t.is_array() && t.size() == 3, ErrorCode::ParseError,
                "term " + std::to_string(i) + " must be [coeff, [exponents], coord]");
        require(t[0].is_number(), ErrorCode::ParseError, "term coefficient must be a number");
        require(t[1].is_array() && static_cast<int>(t[1].size()) == dim, ErrorCode::ParseError,
                "term exponent list must have dim entries");
        require(t[2].is_number_integer(), ErrorCode::ParseError, "term coord must be an integer");
        int coord = t[2].get<int>();
        require(coord >= 0 && coord < dim, ErrorCode::ParseError,
                "term coord out of range in term " + std::to_string(i));
        Term term;
        term.coeff = t[0].get<double>();
        int total = 0;
        for (int d = 0; d < dim; ++d) {
            require(t[1][d].is_number_integer(), ErrorCode::ParseError,
                    "exponents must be integers");
            int e = t[1][d].get<int>();
            require(e >= 0, ErrorCode::ParseError, "negative exponent");
            term.exponents.push_back(e);
            total += e;
        }
        require(total >= min_degree, ErrorCode::ParseError,
                "term degree below the schema minimum in term " + std::to_string(i));
        terms[static_cast<std::size_t>(coord)].push_back(std::move(term));
    }
    return terms;
}

}  // namespace detail

// builtin TAG:params, e.g. "hartman:4,3,0.5,1" or "sternberg:0.5"
inline MapBundle builtin_map(const std::string& tag, const std::vector<double>& params,
                             std::optional<double> delta = std::nullopt) {
    if (tag == "hartman") {
        require(params.size() == 4, ErrorCode::ParseError,
                "hartman needs parameters a,b,c,eps");
        return hartman_map(params[0], params[1], params[2], params[3], delta.value_or(0.25));
    }
    if (tag == "sternberg") {
        require(params.size() == 1, ErrorCode::ParseError, "sternberg needs parameter a");
        return sternberg_map(params[0], delta.value_or(0.4));
    }
    if (tag == "saddle2d_quadratic") {
        require(params.size() == 8, ErrorCode::ParseError,
                "saddle2d_quadratic needs a,b,c1..c6");
        return saddle2d_quadratic(params[0], params[1],
                                  {params.begin() + 2, params.end()}, delta.value_or(0.2));
    }
    raise(ErrorCode::ParseError, "unknown builtin '" + tag + "'");
}

// Map definition document:
//   {"name": .., "dim": d, "L": [[..]], "terms": [[coeff,[e..],coord],..], "delta": r}
// or {"builtin": tag, "params": [..], "delta": r}
inline MapBundle parse_map(const Json& j) {
    require(j.is_object(), ErrorCode::ParseError, "map definition must be a JSON object");
    if (j.contains("builtin")) {
        std::vector<double> params;
        if (j.contains("params"))
            for (const auto& p : j["params"]) params.push_back(p.get<double>());
        std::optional<double> delta;
        if (j.contains("delta")) delta = j["delta"].get<double>();
        return builtin_map(j["builtin"].get<std::string>(), params, delta);
    }
    require(j.contains("dim") && j.contains("L"), ErrorCode::ParseError,
            "map definition needs 'dim' and 'L' (or 'builtin')");
    int dim = j["dim"].get<int>();
    require(dim >= 1 && dim <= kMaxDim, ErrorCode::ParseError, "dim out of range");
    Mat l = detail::parse_matrix(j["L"], dim);
    auto terms = j.contains("terms") ? detail::parse_terms<PolyTerm>(j["terms"], dim, 2)
                                     : std::vector<std::vector<PolyTerm>>(
                                           static_cast<std::size_t>(dim));
    double delta = j.value("delta", 0.2);
    std::string name = j.value("name", std::string("map"));
    return MapBundle(Operator(l), PolyMap(dim, std::move(terms)), delta, name);
}

// Vector field document: {"name", "dim", "terms": [[coeff,[e..],coord],..],
// "radius"}; the degree-1 block is the linear part.
inline VectorFieldDef parse_field(const Json& j) {
    require(j.is_object(), ErrorCode::ParseError, "field definition must be a JSON object");
    require(j.contains("dim") && j.contains("terms"), ErrorCode::ParseError,
            "field definition needs 'dim' and 'terms'");
    int dim = j["dim"].get<int>();
    require(dim >= 1 && dim <= kMaxFlowDim, ErrorCode::ParseError, "field dim out of range");
    auto terms = detail::parse_terms<FieldTerm>(j["terms"], dim, 1);
    return VectorFieldDef(dim, std::move(terms), j.value("radius", 1.0));
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::ParseError, "cannot open input file '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        raise(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
    }
    return j;
}

// "tag:1,2,0.5" -> (tag, {1,2,0.5})
inline std::pair<std::string, std::vector<double>> parse_builtin_flag(const std::string& flag) {
    auto colon = flag.find(':');
    std::string tag = flag.substr(0, colon);
    std::vector<double> params;
    if (colon != std::string::npos) {
        std::stringstream ss(flag.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                params.push_back(std::stod(item));
            } catch (const std::exception&) {
                raise(ErrorCode::ParseError, "bad builtin parameter '" + item + "'");
            }
        }
    }
    return {tag, params};
}

// "b:0:0.1:21" -> parameter name, lo, hi, count
struct SweepSpec {
    std::string param;
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

inline SweepSpec parse_sweep_spec(const std::string& s) {
    std::stringstream ss(s);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    require(parts.size() == 4, ErrorCode::ParseError, "sweep spec must be PARAM:LO:HI:N");
    SweepSpec spec;
    spec.param = parts[0];
    try {
        spec.lo = std::stod(parts[1]);
        spec.hi = std::stod(parts[2]);
        spec.count = std::stoi(parts[3]);
    } catch (const std::exception&) {
        raise(ErrorCode::ParseError, "bad sweep bounds in '" + s + "'");
    }
    require(spec.count >= 2, ErrorCode::ParseError, "sweep needs at least two grid points");
    return spec;
}

}  // namespace holinear
