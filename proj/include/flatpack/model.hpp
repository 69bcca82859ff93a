#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "flatpack/canonical_json.hpp"
#include "flatpack/error.hpp"
#include "flatpack/geom.hpp"

namespace flatpack {

inline constexpr int kModelFormatVersion = 1;

/// Thresholds of the attachability test: a mate pair is attachable when the
/// connector origins are closer than epsilon_distance and the up / forward
/// similarities exceed epsilon_up / epsilon_forward.
struct AlignmentThresholds {
    double epsilon_distance = 0.05;
    double epsilon_up = 0.95;
    double epsilon_forward = 0.90;

    bool operator==(const AlignmentThresholds&) const = default;
};

inline bool thresholds_valid(const AlignmentThresholds& t) {
    return std::isfinite(t.epsilon_distance) && t.epsilon_distance > 0.0 && t.epsilon_up > -1.0 &&
           t.epsilon_up <= 1.0 && t.epsilon_forward > -1.0 && t.epsilon_forward <= 1.0;
}

/// "part.connector"
struct QualifiedId {
    std::string part;
    std::string connector;

    std::string str() const { return part + "." + connector; }

    static std::optional<QualifiedId> parse(std::string_view text) {
        const auto dot = text.find('.');
        if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) return std::nullopt;
        QualifiedId id{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
        if (id.connector.find('.') != std::string::npos) return std::nullopt;
        return id;
    }

    auto operator<=>(const QualifiedId&) const = default;
};

/// Unordered mate pair stored with first < second.
struct MatePair {
    QualifiedId first;
    QualifiedId second;

    static MatePair make(QualifiedId a, QualifiedId b) {
        if (b < a) std::swap(a, b);
        return {std::move(a), std::move(b)};
    }

    std::string id() const { return first.str() + "|" + second.str(); }

    static std::optional<MatePair> parse(std::string_view text) {
        const auto bar = text.find('|');
        if (bar == std::string_view::npos) return std::nullopt;
        auto a = QualifiedId::parse(text.substr(0, bar));
        auto b = QualifiedId::parse(text.substr(bar + 1));
        if (!a || !b) return std::nullopt;
        return make(*a, *b);
    }

    auto operator<=>(const MatePair&) const = default;
};

enum class ShapeKind { box, sphere };

struct ConvexShape {
    ShapeKind kind = ShapeKind::box;
    Vec3 half_extents;
    double radius = 0.0;
    Pose offset;
    // Norm of the quaternion as written in the source document; validation
    // flags documents whose rotations were not unit length.
    double authored_quat_norm = 1.0;
};

struct Connector {
    std::string id;
    double size = 0.0;
    Pose local;
    std::optional<QualifiedId> mate;
    int symmetry_order = 1;
    double authored_quat_norm = 1.0;
};

struct Part {
    std::string id;
    std::vector<ConvexShape> shapes;
    std::vector<Connector> connectors;

    const Connector* find_connector(std::string_view cid) const {
        for (const auto& c : connectors)
            if (c.id == cid) return &c;
        return nullptr;
    }
};

struct FurnitureModel {
    std::string name;
    int version = kModelFormatVersion;
    std::vector<Part> parts;
    std::optional<AlignmentThresholds> thresholds;

    const Part* find_part(std::string_view pid) const {
        for (const auto& p : parts)
            if (p.id == pid) return &p;
        return nullptr;
    }

    const Part& part(std::string_view pid) const {
        if (const Part* p = find_part(pid)) return *p;
        throw Error(Errc::unknown_part, "no part '" + std::string(pid) + "' in model '" + name + "'");
    }

    const Connector* find_connector(const QualifiedId& q) const {
        const Part* p = find_part(q.part);
        return p ? p->find_connector(q.connector) : nullptr;
    }

    const Connector& connector(const QualifiedId& q) const {
        if (const Connector* c = find_connector(q)) return *c;
        throw Error(Errc::unknown_connector, "no connector '" + q.str() + "' in model '" + name + "'");
    }

    std::vector<std::string> part_ids() const {
        std::vector<std::string> ids;
        for (const auto& p : parts) ids.push_back(p.id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    std::size_t connector_count() const {
        std::size_t n = 0;
        for (const auto& p : parts) n += p.connectors.size();
        return n;
    }

    /// Declared mate pairs whose two sides name each other, sorted.
    std::vector<MatePair> mate_pairs() const {
        std::set<MatePair> out;
        for (const auto& p : parts) {
            for (const auto& c : p.connectors) {
                if (!c.mate) continue;
                const QualifiedId self{p.id, c.id};
                const Connector* other = find_connector(*c.mate);
                if (other == nullptr || !other->mate || *other->mate != self || *c.mate == self) continue;
                out.insert(MatePair::make(self, *c.mate));
            }
        }
        return {out.begin(), out.end()};
    }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string line_col(std::string_view text, std::size_t byte) {
    const std::size_t pos = std::min(byte > 0 ? byte - 1 : 0, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

class ModelReader {
public:
    FurnitureModel read(const json& doc) {
        expect_object(doc, "");
        allow_keys(doc, "", {"name", "version", "thresholds", "parts"});
        FurnitureModel m;
        m.name = read_string(require(doc, "", "name"), "/name");
        if (m.name.empty()) throw Error(Errc::invalid_value, "model name must be nonempty", "/name");
        const json& version = require(doc, "", "version");
        if (!version.is_number_integer())
            throw Error(Errc::invalid_value, "version must be an integer", "/version");
        if (version.get<std::int64_t>() != kModelFormatVersion)
            throw Error(Errc::version_mismatch,
                        "unsupported model format version " + version.dump() + " (expected 1)", "/version");
        m.version = kModelFormatVersion;
        if (doc.contains("thresholds")) m.thresholds = read_thresholds(doc.at("thresholds"), "/thresholds");

        const json& parts = require(doc, "", "parts");
        if (!parts.is_array()) throw Error(Errc::invalid_value, "parts must be an array", "/parts");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const std::string path = "/parts/" + std::to_string(i);
            Part p = read_part(parts[i], path);
            if (!seen.insert(p.id).second)
                throw Error(Errc::duplicate_id, "duplicate part id '" + p.id + "'", path + "/id");
            m.parts.push_back(std::move(p));
        }
        return m;
    }

private:
    static void expect_object(const json& j, const std::string& path) {
        if (!j.is_object()) throw Error(Errc::invalid_value, "expected an object", path.empty() ? "/" : path);
    }

    static void allow_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
        for (const auto& [key, value] : obj.items()) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                throw Error(Errc::unknown_field, "unknown field '" + key + "'", path + "/" + key);
        }
    }

    static const json& require(const json& obj, const std::string& path, const std::string& key) {
        auto it = obj.find(key);
        if (it == obj.end()) throw Error(Errc::missing_field, "missing required field '" + key + "'", path.empty() ? "/" : path);
        return *it;
    }

    static std::string read_string(const json& j, const std::string& path) {
        if (!j.is_string()) throw Error(Errc::invalid_value, "expected a string", path);
        return j.get<std::string>();
    }

    static std::string read_id(const json& j, const std::string& path) {
        std::string id = read_string(j, path);
        if (id.empty()) throw Error(Errc::invalid_value, "id must be nonempty", path);
        if (id.find_first_of(".|") != std::string::npos)
            throw Error(Errc::invalid_value, "id '" + id + "' must not contain '.' or '|'", path);
        return id;
    }

    static double read_real(const json& j, const std::string& path) {
        if (!j.is_number()) throw Error(Errc::invalid_value, "expected a number", path);
        const double v = j.get<double>();
        if (!std::isfinite(v)) throw Error(Errc::invalid_value, "number must be finite", path);
        return v;
    }

    template <std::size_t N>
    static std::array<double, N> read_reals(const json& j, const std::string& path) {
        if (!j.is_array() || j.size() != N)
            throw Error(Errc::invalid_value, "expected an array of " + std::to_string(N) + " numbers", path);
        std::array<double, N> out{};
        for (std::size_t i = 0; i < N; ++i) out[i] = read_real(j[i], path + "/" + std::to_string(i));
        return out;
    }

    static Vec3 read_vec3(const json& j, const std::string& path) {
        const auto a = read_reals<3>(j, path);
        return {a[0], a[1], a[2]};
    }

    static std::pair<UnitQuat, double> read_quat(const json& j, const std::string& path) {
        const auto a = read_reals<4>(j, path);
        const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]);
        if (!(n > kDegenerateNorm) || !std::isfinite(n))
            throw Error(Errc::invalid_value, "quaternion has zero norm", path);
        return {quat_normalize(a), n};
    }

    static AlignmentThresholds read_thresholds(const json& j, const std::string& path) {
        expect_object(j, path);
        allow_keys(j, path, {"distance", "up", "forward"});
        AlignmentThresholds t;
        t.epsilon_distance = read_real(require(j, path, "distance"), path + "/distance");
        t.epsilon_up = read_real(require(j, path, "up"), path + "/up");
        t.epsilon_forward = read_real(require(j, path, "forward"), path + "/forward");
        if (!thresholds_valid(t))
            throw Error(Errc::invalid_value, "thresholds need distance > 0 and up, forward in (-1, 1]", path);
        return t;
    }

    static ConvexShape read_shape(const json& j, const std::string& path) {
        expect_object(j, path);
        ConvexShape s;
        const std::string kind = read_string(require(j, path, "kind"), path + "/kind");
        if (kind == "box") {
            allow_keys(j, path, {"kind", "half_extents", "pos", "quat"});
            s.kind = ShapeKind::box;
            s.half_extents = read_vec3(require(j, path, "half_extents"), path + "/half_extents");
        } else if (kind == "sphere") {
            allow_keys(j, path, {"kind", "radius", "pos", "quat"});
            s.kind = ShapeKind::sphere;
            s.radius = read_real(require(j, path, "radius"), path + "/radius");
        } else {
            throw Error(Errc::invalid_value, "shape kind must be \"box\" or \"sphere\"", path + "/kind");
        }
        if (j.contains("pos")) s.offset.pos = read_vec3(j.at("pos"), path + "/pos");
        if (j.contains("quat")) std::tie(s.offset.rot, s.authored_quat_norm) = read_quat(j.at("quat"), path + "/quat");
        return s;
    }

    static Connector read_connector(const json& j, const std::string& path) {
        expect_object(j, path);
        allow_keys(j, path, {"id", "size", "pos", "quat", "mate", "symmetry_order"});
        Connector c;
        c.id = read_id(require(j, path, "id"), path + "/id");
        c.size = read_real(require(j, path, "size"), path + "/size");
        if (c.size < 0.0) throw Error(Errc::invalid_value, "size must be nonnegative", path + "/size");
        c.local.pos = read_vec3(require(j, path, "pos"), path + "/pos");
        std::tie(c.local.rot, c.authored_quat_norm) = read_quat(require(j, path, "quat"), path + "/quat");
        if (j.contains("mate")) {
            const std::string mate = read_string(j.at("mate"), path + "/mate");
            c.mate = QualifiedId::parse(mate);
            if (!c.mate)
                throw Error(Errc::invalid_value, "mate must look like \"part.connector\"", path + "/mate");
        }
        if (j.contains("symmetry_order")) {
            const json& order = j.at("symmetry_order");
            if (!order.is_number_integer() || order.get<std::int64_t>() < 1 || order.get<std::int64_t>() > 64)
                throw Error(Errc::invalid_value, "symmetry_order must be an integer in [1, 64]",
                            path + "/symmetry_order");
            c.symmetry_order = static_cast<int>(order.get<std::int64_t>());
        }
        return c;
    }

    static Part read_part(const json& j, const std::string& path) {
        expect_object(j, path);
        allow_keys(j, path, {"id", "shapes", "connectors"});
        Part p;
        p.id = read_id(require(j, path, "id"), path + "/id");
        const json& shapes = require(j, path, "shapes");
        if (!shapes.is_array() || shapes.empty())
            throw Error(Errc::invalid_value, "part needs a nonempty shapes array", path + "/shapes");
        for (std::size_t i = 0; i < shapes.size(); ++i)
            p.shapes.push_back(read_shape(shapes[i], path + "/shapes/" + std::to_string(i)));
        if (j.contains("connectors")) {
            const json& conns = j.at("connectors");
            if (!conns.is_array()) throw Error(Errc::invalid_value, "connectors must be an array", path + "/connectors");
            for (std::size_t i = 0; i < conns.size(); ++i) {
                const std::string cpath = path + "/connectors/" + std::to_string(i);
                Connector c = read_connector(conns[i], cpath);
                if (p.find_connector(c.id) != nullptr)
                    throw Error(Errc::duplicate_id, "duplicate connector id '" + c.id + "' in part '" + p.id + "'",
                                cpath + "/id");
                p.connectors.push_back(std::move(c));
            }
        }
        return p;
    }
};

}  // namespace detail

/// Parses a `.furn.json` document. Throws Error with a "line:column" location
/// for malformed JSON and a JSON-pointer location for schema violations.
inline FurnitureModel parse_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::string what = e.what();
        if (auto colon = what.find(": "); colon != std::string::npos) what = what.substr(colon + 2);
        throw Error(Errc::syntax, what, detail::line_col(text, e.byte));
    } catch (const json::exception& e) {
        // Number overflow and similar lexer failures carry no byte offset.
        throw Error(Errc::syntax, e.what(), "1:1");
    }
    return detail::ModelReader{}.read(doc);
}

namespace detail {

inline json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline json quat_json(const UnitQuat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

}  // namespace detail

inline json model_to_json(const FurnitureModel& m) {
    json doc = json::object();
    doc["name"] = m.name;
    doc["version"] = m.version;
    if (m.thresholds) {
        doc["thresholds"] = {{"distance", m.thresholds->epsilon_distance},
                             {"up", m.thresholds->epsilon_up},
                             {"forward", m.thresholds->epsilon_forward}};
    }
    json parts = json::array();
    for (const auto& p : m.parts) {
        json part = {{"id", p.id}};
        json shapes = json::array();
        for (const auto& s : p.shapes) {
            json shape = {{"pos", detail::vec_json(s.offset.pos)}, {"quat", detail::quat_json(s.offset.rot)}};
            if (s.kind == ShapeKind::box) {
                shape["kind"] = "box";
                shape["half_extents"] = detail::vec_json(s.half_extents);
            } else {
                shape["kind"] = "sphere";
                shape["radius"] = s.radius;
            }
            shapes.push_back(std::move(shape));
        }
        part["shapes"] = std::move(shapes);
        json conns = json::array();
        for (const auto& c : p.connectors) {
            json conn = {{"id", c.id},
                         {"size", c.size},
                         {"pos", detail::vec_json(c.local.pos)},
                         {"quat", detail::quat_json(c.local.rot)},
                         {"symmetry_order", c.symmetry_order}};
            if (c.mate) conn["mate"] = c.mate->str();
            conns.push_back(std::move(conn));
        }
        part["connectors"] = std::move(conns);
        parts.push_back(std::move(part));
    }
    doc["parts"] = std::move(parts);
    return doc;
}

inline std::string serialize_model(const FurnitureModel& m) { return model_to_json(m).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
    std::string code;
    std::string path;
    std::string message;
};

struct Diagnostics {
    std::vector<Diagnostic> errors;
    std::vector<Diagnostic> warnings;

    bool ok() const { return errors.empty(); }

    bool has_error(std::string_view code) const {
        return std::any_of(errors.begin(), errors.end(), [&](const Diagnostic& d) { return d.code == code; });
    }
    bool has_warning(std::string_view code) const {
        return std::any_of(warnings.begin(), warnings.end(), [&](const Diagnostic& d) { return d.code == code; });
    }
};

inline constexpr double kQuatNormTolerance = 1e-6;

namespace detail {

/// Depth of `p` below the surface of a shape, in the part frame (negative when outside).
inline double penetration_depth(const ConvexShape& s, const Vec3& p) {
    const Vec3 local = quat_rotate(conjugate(s.offset.rot), p - s.offset.pos);
    if (s.kind == ShapeKind::sphere) return s.radius - norm(local);
    return std::min({s.half_extents.x - std::abs(local.x), s.half_extents.y - std::abs(local.y),
                     s.half_extents.z - std::abs(local.z)});
}

}  // namespace detail

inline Diagnostics validate_model(const FurnitureModel& m) {
    Diagnostics d;
    auto error = [&](std::string code, std::string path, std::string msg) {
        d.errors.push_back({std::move(code), std::move(path), std::move(msg)});
    };
    auto warn = [&](std::string code, std::string path, std::string msg) {
        d.warnings.push_back({std::move(code), std::move(path), std::move(msg)});
    };

    if (m.parts.size() < 2) warn("not_assemblable", "/parts", "model has fewer than two parts");

    for (std::size_t pi = 0; pi < m.parts.size(); ++pi) {
        const Part& p = m.parts[pi];
        const std::string ppath = "/parts/" + std::to_string(pi);
        for (std::size_t si = 0; si < p.shapes.size(); ++si) {
            const ConvexShape& s = p.shapes[si];
            const std::string spath = ppath + "/shapes/" + std::to_string(si);
            const bool positive = s.kind == ShapeKind::sphere
                                      ? s.radius > 0.0
                                      : (s.half_extents.x > 0.0 && s.half_extents.y > 0.0 && s.half_extents.z > 0.0);
            if (!positive) error("nonpositive_extent", spath, "shape extents must be positive");
            if (std::abs(s.authored_quat_norm - 1.0) > kQuatNormTolerance)
                error("non_unit_quaternion", spath + "/quat", "shape quaternion is not unit length");
        }
        for (std::size_t ci = 0; ci < p.connectors.size(); ++ci) {
            const Connector& c = p.connectors[ci];
            const std::string cpath = ppath + "/connectors/" + std::to_string(ci);
            const QualifiedId self{p.id, c.id};
            if (std::abs(c.authored_quat_norm - 1.0) > kQuatNormTolerance)
                error("non_unit_quaternion", cpath + "/quat", "connector quaternion is not unit length");
            for (const auto& s : p.shapes) {
                if (detail::penetration_depth(s, c.local.pos) > c.size) {
                    warn("connector_embedded", cpath,
                         "connector '" + self.str() + "' sits deeper inside its part than its size");
                    break;
                }
            }
            if (!c.mate) continue;
            if (*c.mate == self) {
                error("self_mating", cpath + "/mate", "connector '" + self.str() + "' mates with itself");
                continue;
            }
            const Connector* other = m.find_connector(*c.mate);
            if (other == nullptr) {
                error("dangling_mate", cpath + "/mate",
                      "connector '" + self.str() + "' names missing mate '" + c.mate->str() + "'");
                continue;
            }
            if (!other->mate || *other->mate != self) {
                error("non_involutive_mating", cpath + "/mate",
                      "'" + self.str() + "' mates with '" + c.mate->str() + "' but '" + c.mate->str() + "' mates with " +
                          (other->mate ? "'" + other->mate->str() + "'" : std::string("nothing")));
                continue;
            }
            if (other->symmetry_order != c.symmetry_order && self < *c.mate)
                warn("symmetry_mismatch", cpath + "/symmetry_order",
                     "mates '" + self.str() + "' and '" + c.mate->str() + "' declare different symmetry orders");
        }
    }

    // Goal assembly graph: parts as nodes, valid mate pairs as edges.
    if (!m.parts.empty()) {
        std::map<std::string, std::vector<std::string>> adjacency;
        for (const auto& p : m.parts) adjacency[p.id];
        const auto pairs = m.mate_pairs();
        for (const auto& pair : pairs) {
            adjacency[pair.first.part].push_back(pair.second.part);
            adjacency[pair.second.part].push_back(pair.first.part);
        }
        const std::string start = adjacency.begin()->first;
        std::set<std::string> reached{start};
        std::queue<std::string> frontier;
        frontier.push(start);
        while (!frontier.empty()) {
            const std::string cur = frontier.front();
            frontier.pop();
            for (const auto& next : adjacency[cur])
                if (reached.insert(next).second) frontier.push(next);
        }
        std::string missing;
        for (const auto& [pid, _] : adjacency) {
            if (reached.count(pid)) continue;
            if (!missing.empty()) missing += ", ";
            missing += pid;
        }
        if (!missing.empty())
            error("disconnected_goal", "/parts", "goal assembly does not connect part(s): " + missing);
        else if (pairs.size() + 1 != m.parts.size())
            warn("goal_not_tree", "/parts", "goal assembly graph contains a cycle or parallel mates");
    }
    return d;
}

/// Pose of b's part expressed in a's part frame when the two connector frames coincide.
inline Pose goal_relative_pose(const FurnitureModel& m, const QualifiedId& a, const QualifiedId& b) {
    const Connector& ca = m.connector(a);
    const Connector& cb = m.connector(b);
    if (!ca.mate || *ca.mate != b || !cb.mate || *cb.mate != a)
        throw Error(Errc::not_mates, "'" + a.str() + "' and '" + b.str() + "' are not mates");
    return pose_compose(ca.local, pose_inverse(cb.local));
}

}  // namespace flatpack
