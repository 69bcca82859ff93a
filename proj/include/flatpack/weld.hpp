#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "flatpack/error.hpp"

namespace flatpack {

/// Disjoint-set partition of part ids into weld groups. The representative of
/// each group is its lexicographically smallest id, independent of the order
/// in which groups were merged.
class WeldPartition {
public:
    WeldPartition() = default;

    explicit WeldPartition(std::vector<std::string> ids) : ids_(std::move(ids)) {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
        parent_.resize(ids_.size());
        for (std::size_t i = 0; i < parent_.size(); ++i) parent_[i] = i;
    }

    const std::vector<std::string>& ids() const { return ids_; }

    bool contains(std::string_view id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

    const std::string& root(std::string_view id) const { return ids_[find(index(id))]; }

    bool same_group(std::string_view a, std::string_view b) const { return find(index(a)) == find(index(b)); }

    /// Merges the groups of a and b; returns false if they were already one group.
    bool unite(std::string_view a, std::string_view b) {
        std::size_t ra = find(index(a));
        std::size_t rb = find(index(b));
        if (ra == rb) return false;
        if (rb < ra) std::swap(ra, rb);
        parent_[rb] = ra;
        return true;
    }

    std::vector<std::string> members(std::string_view id) const {
        const std::size_t r = find(index(id));
        std::vector<std::string> out;
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (find(i) == r) out.push_back(ids_[i]);
        return out;
    }

    std::vector<std::string> roots() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (find(i) == i) out.push_back(ids_[i]);
        return out;
    }

    std::size_t group_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (find(i) == i) ++n;
        return n;
    }

    /// part id -> group root, sorted by part id.
    std::map<std::string, std::string> root_map() const {
        std::map<std::string, std::string> out;
        for (std::size_t i = 0; i < ids_.size(); ++i) out.emplace(ids_[i], ids_[find(i)]);
        return out;
    }

private:
    std::size_t index(std::string_view id) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id) throw Error(Errc::unknown_part, "no part '" + std::string(id) + "' in the scene");
        return static_cast<std::size_t>(it - ids_.begin());
    }

    std::size_t find(std::size_t i) const {
        while (parent_[i] != i) i = parent_[i];
        return i;
    }

    std::vector<std::string> ids_;
    std::vector<std::size_t> parent_;
};

}  // namespace flatpack
