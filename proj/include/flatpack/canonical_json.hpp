#pragma once

#include <charconv>
#include <cmath>
#include <string>

#include <json.hpp>  // nlohmann/json, vendored

namespace flatpack {

using json = nlohmann::json;

namespace detail {

inline void append_double(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    // -0 would not survive a parse (it reads back as the integer 0).
    if (v == 0.0) v = 0.0;
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline void canonical_append(std::string& out, const json& j) {
    switch (j.type()) {
        case json::value_t::object: {
            out += '{';
            bool first = true;
            // nlohmann::json objects are std::map backed: iteration is key-sorted.
            for (const auto& [key, value] : j.items()) {
                if (!first) out += ',';
                first = false;
                out += json(key).dump();
                out += ':';
                canonical_append(out, value);
            }
            out += '}';
            break;
        }
        case json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& value : j) {
                if (!first) out += ',';
                first = false;
                canonical_append(out, value);
            }
            out += ']';
            break;
        }
        case json::value_t::number_float:
            append_double(out, j.get<double>());
            break;
        default:
            out += j.dump();
            break;
    }
}

}  // namespace detail

/// Compact JSON with sorted keys and shortest round-trip float formatting.
/// Equal documents always serialize to identical bytes.
inline std::string canonical_dump(const json& j) {
    std::string out;
    detail::canonical_append(out, j);
    return out;
}

}  // namespace flatpack
