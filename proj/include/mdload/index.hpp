#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdload/container.hpp"

namespace mdload {

/// Cached class-keyed index over a container tree: NX_class (or "SDS" for
/// datasets) mapped to the byte-wise sorted absolute paths of that class.
/// Built once by a single full traversal; immutable afterwards.
class MetadataIndex {
public:
    using Paths = std::vector<std::string>;

    /// Sorted paths for `nx_class`; empty when the class is absent.
    std::span<const std::string> lookup_class(std::string_view nx_class) const;

    /// Paths of `nx_class` equal to `prefix` or below it ("prefix/..."),
    /// located by binary search on the sorted collection.
    std::vector<std::string_view> lookup_prefix(std::string_view nx_class, std::string_view prefix) const;

    const std::map<std::string, Paths, std::less<>>& classes() const noexcept { return classes_; }
    std::uint64_t entries_visited() const noexcept { return entries_visited_; }
    /// Groups that lacked NX_class and were filed under "NXgroup".
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    friend MetadataIndex build_index(const Node& root);

    std::map<std::string, Paths, std::less<>> classes_;
    std::uint64_t entries_visited_ = 0;
    std::vector<std::string> warnings_;
};

MetadataIndex build_index(const Node& root);

struct IndexStats {
    std::map<std::string, std::uint64_t> per_class;
    std::uint64_t total = 0;
};

IndexStats index_stats(const MetadataIndex& ix);

/// One "class<TAB>path" line per entry, classes in sorted order.
void dump_index(const MetadataIndex& ix, std::ostream& out);

}  // namespace mdload
