#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flatpack {

enum class Errc {
    degenerate,
    syntax,
    unknown_field,
    missing_field,
    duplicate_id,
    invalid_value,
    not_mates,
    unknown_connector,
    unknown_part,
    unknown_pair,
    unknown_model,
    invalid_config,
    invalid_model,
    not_reset,
    bad_action,
    placement_failure,
    disconnected_subset,
    io_error,
    parse_error,
    version_mismatch,
};

inline std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::degenerate: return "degenerate";
        case Errc::syntax: return "syntax";
        case Errc::unknown_field: return "unknown_field";
        case Errc::missing_field: return "missing_field";
        case Errc::duplicate_id: return "duplicate_id";
        case Errc::invalid_value: return "invalid_value";
        case Errc::not_mates: return "not_mates";
        case Errc::unknown_connector: return "unknown_connector";
        case Errc::unknown_part: return "unknown_part";
        case Errc::unknown_pair: return "unknown_pair";
        case Errc::unknown_model: return "unknown_model";
        case Errc::invalid_config: return "invalid_config";
        case Errc::invalid_model: return "invalid_model";
        case Errc::not_reset: return "not_reset";
        case Errc::bad_action: return "bad_action";
        case Errc::placement_failure: return "placement_failure";
        case Errc::disconnected_subset: return "disconnected_subset";
        case Errc::io_error: return "io_error";
        case Errc::parse_error: return "parse_error";
        case Errc::version_mismatch: return "version_mismatch";
    }
    return "unknown";
}

/// Every recoverable failure in the library is reported as an Error carrying a
/// machine-readable code. `location` is "line:column" for text input, a JSON
/// pointer for structural problems, or empty.
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message, std::string location = {})
        : std::runtime_error(format(code, message, location)),
          code_(code),
          detail_(std::move(message)),
          location_(std::move(location)) {}

    Errc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::string& location() const noexcept { return location_; }

private:
    static std::string format(Errc code, const std::string& message, const std::string& location) {
        std::string out(to_string(code));
        if (!location.empty()) out += " at " + location;
        out += ": " + message;
        return out;
    }

    Errc code_;
    std::string detail_;
    std::string location_;
};

}  // namespace flatpack
