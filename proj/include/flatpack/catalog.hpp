#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "flatpack/model.hpp"

namespace flatpack {

namespace bundled {

// Two cubes; the upper one sits on the lower one.
inline constexpr std::string_view kBlock = R"({
  "name": "block",
  "version": 1,
  "parts": [
    {
      "id": "lower",
      "shapes": [{"kind": "box", "half_extents": [0.05, 0.05, 0.05], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "top", "size": 0.01, "pos": [0, 0, 0.05], "quat": [1, 0, 0, 0], "mate": "upper.bottom"}
      ]
    },
    {
      "id": "upper",
      "shapes": [{"kind": "box", "half_extents": [0.05, 0.05, 0.05], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "bottom", "size": 0.01, "pos": [0, 0, -0.05], "quat": [1, 0, 0, 0], "mate": "lower.top"}
      ]
    }
  ]
}
)";

// Two side panels standing on a bottom board, a top board bridging to the left panel.
inline constexpr std::string_view kShelfSimple = R"({
  "name": "shelf_simple",
  "version": 1,
  "parts": [
    {
      "id": "bottom",
      "shapes": [{"kind": "box", "half_extents": [0.3, 0.15, 0.01], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "left", "size": 0.015, "pos": [-0.3, 0, 0], "quat": [0.7071067811865476, 0, -0.7071067811865476, 0],
         "mate": "side_left.to_bottom"},
        {"id": "right", "size": 0.015, "pos": [0.3, 0, 0], "quat": [0.7071067811865476, 0, 0.7071067811865476, 0],
         "mate": "side_right.to_bottom"}
      ]
    },
    {
      "id": "side_left",
      "shapes": [{"kind": "box", "half_extents": [0.01, 0.15, 0.3], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "to_bottom", "size": 0.015, "pos": [0.01, 0, -0.29],
         "quat": [0.7071067811865476, 0, -0.7071067811865476, 0], "mate": "bottom.left"},
        {"id": "to_top", "size": 0.015, "pos": [0.01, 0, 0.29],
         "quat": [0.7071067811865476, 0, -0.7071067811865476, 0], "mate": "top.left"}
      ]
    },
    {
      "id": "side_right",
      "shapes": [{"kind": "box", "half_extents": [0.01, 0.15, 0.3], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "to_bottom", "size": 0.015, "pos": [-0.01, 0, -0.29],
         "quat": [0.7071067811865476, 0, 0.7071067811865476, 0], "mate": "bottom.right"}
      ]
    },
    {
      "id": "top",
      "shapes": [{"kind": "box", "half_extents": [0.3, 0.15, 0.01], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "left", "size": 0.015, "pos": [-0.3, 0, 0], "quat": [0.7071067811865476, 0, -0.7071067811865476, 0],
         "mate": "side_left.to_top"}
      ]
    }
  ]
}
)";

// Table assembled upside down: legs are inserted into the underside of the
// board, which lies face down. Square legs are 4-fold symmetric.
inline constexpr std::string_view kTableSimple = R"({
  "name": "table_simple",
  "version": 1,
  "parts": [
    {
      "id": "board",
      "shapes": [{"kind": "box", "half_extents": [0.3, 0.2, 0.02], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "bl", "size": 0.02, "pos": [-0.26, -0.16, 0.02], "quat": [1, 0, 0, 0], "mate": "leg_bl.end", "symmetry_order": 4},
        {"id": "br", "size": 0.02, "pos": [0.26, -0.16, 0.02], "quat": [1, 0, 0, 0], "mate": "leg_br.end", "symmetry_order": 4},
        {"id": "fl", "size": 0.02, "pos": [-0.26, 0.16, 0.02], "quat": [1, 0, 0, 0], "mate": "leg_fl.end", "symmetry_order": 4},
        {"id": "fr", "size": 0.02, "pos": [0.26, 0.16, 0.02], "quat": [1, 0, 0, 0], "mate": "leg_fr.end", "symmetry_order": 4}
      ]
    },
    {
      "id": "leg_bl",
      "shapes": [{"kind": "box", "half_extents": [0.02, 0.02, 0.2], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [{"id": "end", "size": 0.02, "pos": [0, 0, -0.2], "quat": [1, 0, 0, 0], "mate": "board.bl", "symmetry_order": 4}]
    },
    {
      "id": "leg_br",
      "shapes": [{"kind": "box", "half_extents": [0.02, 0.02, 0.2], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [{"id": "end", "size": 0.02, "pos": [0, 0, -0.2], "quat": [1, 0, 0, 0], "mate": "board.br", "symmetry_order": 4}]
    },
    {
      "id": "leg_fl",
      "shapes": [{"kind": "box", "half_extents": [0.02, 0.02, 0.2], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [{"id": "end", "size": 0.02, "pos": [0, 0, -0.2], "quat": [1, 0, 0, 0], "mate": "board.fl", "symmetry_order": 4}]
    },
    {
      "id": "leg_fr",
      "shapes": [{"kind": "box", "half_extents": [0.02, 0.02, 0.2], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [{"id": "end", "size": 0.02, "pos": [0, 0, -0.2], "quat": [1, 0, 0, 0], "mate": "board.fr", "symmetry_order": 4}]
    }
  ]
}
)";

// Chair built from its back: the seat hangs off the back panel, legs go under
// the seat. Leg feet are spheres.
inline constexpr std::string_view kChairSimple = R"({
  "name": "chair_simple",
  "version": 1,
  "parts": [
    {
      "id": "back",
      "shapes": [{"kind": "box", "half_extents": [0.18, 0.02, 0.3], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "seat", "size": 0.02, "pos": [0, 0.02, 0], "quat": [0.7071067811865476, -0.7071067811865476, 0, 0],
         "mate": "seat.back"}
      ]
    },
    {
      "id": "leg_bl",
      "shapes": [
        {"kind": "box", "half_extents": [0.02, 0.02, 0.12], "pos": [0, 0, 0.02], "quat": [1, 0, 0, 0]},
        {"kind": "sphere", "radius": 0.02, "pos": [0, 0, -0.12], "quat": [1, 0, 0, 0]}
      ],
      "connectors": [{"id": "top", "size": 0.02, "pos": [0, 0, 0.14], "quat": [1, 0, 0, 0], "mate": "seat.bl", "symmetry_order": 4}]
    },
    {
      "id": "leg_br",
      "shapes": [
        {"kind": "box", "half_extents": [0.02, 0.02, 0.12], "pos": [0, 0, 0.02], "quat": [1, 0, 0, 0]},
        {"kind": "sphere", "radius": 0.02, "pos": [0, 0, -0.12], "quat": [1, 0, 0, 0]}
      ],
      "connectors": [{"id": "top", "size": 0.02, "pos": [0, 0, 0.14], "quat": [1, 0, 0, 0], "mate": "seat.br", "symmetry_order": 4}]
    },
    {
      "id": "leg_fl",
      "shapes": [
        {"kind": "box", "half_extents": [0.02, 0.02, 0.12], "pos": [0, 0, 0.02], "quat": [1, 0, 0, 0]},
        {"kind": "sphere", "radius": 0.02, "pos": [0, 0, -0.12], "quat": [1, 0, 0, 0]}
      ],
      "connectors": [{"id": "top", "size": 0.02, "pos": [0, 0, 0.14], "quat": [1, 0, 0, 0], "mate": "seat.fl", "symmetry_order": 4}]
    },
    {
      "id": "leg_fr",
      "shapes": [
        {"kind": "box", "half_extents": [0.02, 0.02, 0.12], "pos": [0, 0, 0.02], "quat": [1, 0, 0, 0]},
        {"kind": "sphere", "radius": 0.02, "pos": [0, 0, -0.12], "quat": [1, 0, 0, 0]}
      ],
      "connectors": [{"id": "top", "size": 0.02, "pos": [0, 0, 0.14], "quat": [1, 0, 0, 0], "mate": "seat.fr", "symmetry_order": 4}]
    },
    {
      "id": "seat",
      "shapes": [{"kind": "box", "half_extents": [0.18, 0.18, 0.02], "pos": [0, 0, 0], "quat": [1, 0, 0, 0]}],
      "connectors": [
        {"id": "back", "size": 0.02, "pos": [0, -0.18, 0], "quat": [0.7071067811865476, -0.7071067811865476, 0, 0],
         "mate": "back.seat"},
        {"id": "bl", "size": 0.02, "pos": [-0.15, -0.15, -0.02], "quat": [1, 0, 0, 0], "mate": "leg_bl.top", "symmetry_order": 4},
        {"id": "br", "size": 0.02, "pos": [0.15, -0.15, -0.02], "quat": [1, 0, 0, 0], "mate": "leg_br.top", "symmetry_order": 4},
        {"id": "fl", "size": 0.02, "pos": [-0.15, 0.15, -0.02], "quat": [1, 0, 0, 0], "mate": "leg_fl.top", "symmetry_order": 4},
        {"id": "fr", "size": 0.02, "pos": [0.15, 0.15, -0.02], "quat": [1, 0, 0, 0], "mate": "leg_fr.top", "symmetry_order": 4}
      ]
    }
  ]
}
)";

struct Document {
    std::string_view name;
    std::string_view text;
};

/// Bundled model documents, sorted by name.
inline const std::vector<Document>& documents() {
    static const std::vector<Document> docs = {
        {"block", kBlock},
        {"chair_simple", kChairSimple},
        {"shelf_simple", kShelfSimple},
        {"table_simple", kTableSimple},
    };
    return docs;
}

}  // namespace bundled

struct ModelSummary {
    std::string name;
    std::size_t part_count = 0;
    std::size_t connector_count = 0;

    bool operator==(const ModelSummary&) const = default;
};

inline std::shared_ptr<const FurnitureModel> bundled_model(std::string_view name) {
    static std::mutex mutex;
    static std::vector<std::pair<std::string, std::shared_ptr<const FurnitureModel>>> cache;
    std::lock_guard lock(mutex);
    for (const auto& [n, m] : cache)
        if (n == name) return m;
    for (const auto& doc : bundled::documents()) {
        if (doc.name != name) continue;
        auto m = std::make_shared<const FurnitureModel>(parse_model(doc.text));
        cache.emplace_back(std::string(name), m);
        return m;
    }
    return nullptr;
}

inline std::vector<ModelSummary> list_bundled_models() {
    std::vector<ModelSummary> out;
    for (const auto& doc : bundled::documents()) {
        const auto m = bundled_model(doc.name);
        out.push_back({m->name, m->parts.size(), m->connector_count()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

/// Directories listed in FLATPACK_MODEL_PATH (colon-separated).
inline std::vector<std::filesystem::path> model_search_path() {
    std::vector<std::filesystem::path> dirs;
    const char* env = std::getenv("FLATPACK_MODEL_PATH");
    if (env == nullptr) return dirs;
    std::string_view rest(env);
    while (!rest.empty()) {
        const auto colon = rest.find(':');
        const auto item = rest.substr(0, colon);
        if (!item.empty()) dirs.emplace_back(std::string(item));
        if (colon == std::string_view::npos) break;
        rest.remove_prefix(colon + 1);
    }
    return dirs;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::shared_ptr<const FurnitureModel> load_model_file(const std::filesystem::path& path) {
    return std::make_shared<const FurnitureModel>(parse_model(read_text_file(path)));
}

/// Resolves a model by name: directories from FLATPACK_MODEL_PATH are searched
/// for `<name>.furn.json` first, then the bundled set.
inline std::shared_ptr<const FurnitureModel> find_model(std::string_view name) {
    if (!name.empty() && name.find('/') == std::string_view::npos) {
        for (const auto& dir : model_search_path()) {
            const auto candidate = dir / (std::string(name) + ".furn.json");
            std::error_code ec;
            if (std::filesystem::is_regular_file(candidate, ec)) return load_model_file(candidate);
        }
    }
    if (auto m = bundled_model(name)) return m;
    throw Error(Errc::unknown_model, "unknown model '" + std::string(name) + "'");
}

}  // namespace flatpack
