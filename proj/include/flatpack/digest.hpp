#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "flatpack/assembly.hpp"
#include "flatpack/canonical_json.hpp"

namespace flatpack {

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xf];
    }
    return out;
}

inline constexpr double kDigestQuantum = 1e-9;

namespace detail {

inline std::int64_t quantize(double v) { return static_cast<std::int64_t>(std::llround(v / kDigestQuantum)); }

inline json quantized(const Vec3& v) { return json::array({quantize(v.x), quantize(v.y), quantize(v.z)}); }

inline json quantized(const UnitQuat& q) {
    return json::array({quantize(q.w()), quantize(q.x()), quantize(q.y()), quantize(q.z())});
}

}  // namespace detail

/// Canonical, quantized description of a state: the exact bytes hashed by state_digest.
inline std::string canonical_state(const AssemblyState& state) {
    json parts = json::array();
    for (const auto& [id, pose] : state.poses)
        parts.push_back(json::array({id, detail::quantized(pose.pos), detail::quantized(pose.rot)}));
    json cursors = json::array();
    for (const auto& c : state.cursors) {
        cursors.push_back({{"pos", detail::quantized(c.pos)},
                           {"held", c.held ? json(*c.held) : json(nullptr)},
                           {"half_extent", detail::quantize(c.half_extent)}});
    }
    json doc = {{"parts", std::move(parts)},
                {"weld", state.weld.root_map()},
                {"cursors", std::move(cursors)},
                {"connected", json(state.connected_pairs)}};
    return canonical_dump(doc);
}

/// SHA-256 (64 hex chars) of the canonical state with coordinates quantized to 1e-9.
inline std::string state_digest(const AssemblyState& state) { return sha256_hex(canonical_state(state)); }

}  // namespace flatpack
