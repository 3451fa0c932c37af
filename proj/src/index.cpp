#include "mdload/index.hpp"

#include <algorithm>
#include <ostream>

namespace mdload {

namespace {

constexpr std::string_view fallback_class = "NXgroup";

struct Builder {
    std::map<std::string, MetadataIndex::Paths, std::less<>>& classes;
    std::vector<std::string>& warnings;
    std::uint64_t visits = 0;

    MetadataIndex::Paths& bucket(std::string_view cls) {
        auto it = classes.find(cls);
        if (it == classes.end()) it = classes.emplace(std::string(cls), MetadataIndex::Paths{}).first;
        return it->second;
    }

    void walk(const Node& n, const std::string& path) {
        visits += n.attributes().size();
        for (const auto& c : n.children()) {
            std::string p = join_path(path, c.name());
            ++visits;
            if (c.is_dataset()) {
                visits += c.attributes().size();
                bucket("SDS").push_back(std::move(p));
                continue;
            }
            const AttributeValue* v = c.find_attribute("NX_class");
            const std::string* cls = v ? std::get_if<std::string>(v) : nullptr;
            if (!cls) warnings.push_back(p + ": no NX_class, indexed as NXgroup");
            bucket(cls ? std::string_view(*cls) : fallback_class).push_back(p);
            walk(c, p);
        }
    }
};

}  // namespace

MetadataIndex build_index(const Node& root) {
    MetadataIndex ix;
    Builder b{ix.classes_, ix.warnings_};
    b.walk(root, "/");
    for (auto& [cls, paths] : ix.classes_) std::sort(paths.begin(), paths.end());
    ix.entries_visited_ = b.visits;
    return ix;
}

std::span<const std::string> MetadataIndex::lookup_class(std::string_view nx_class) const {
    if (auto it = classes_.find(nx_class); it != classes_.end()) return it->second;
    return {};
}

std::vector<std::string_view> MetadataIndex::lookup_prefix(std::string_view nx_class,
                                                           std::string_view prefix) const {
    auto paths = lookup_class(nx_class);
    std::vector<std::string_view> out;
    if (paths.empty()) return out;

    auto exact = std::lower_bound(paths.begin(), paths.end(), prefix,
                                  [](const std::string& p, std::string_view v) { return p < v; });
    if (exact != paths.end() && *exact == prefix) out.push_back(*exact);

    // Descendants of `prefix` sort contiguously in [prefix + "/", prefix + "0").
    std::string lo(prefix);
    if (lo.empty() || lo.back() != '/') lo.push_back('/');
    std::string hi = lo;
    hi.back() = static_cast<char>('/' + 1);
    auto first = std::lower_bound(exact, paths.end(), lo);
    auto last = std::lower_bound(first, paths.end(), hi);
    for (auto it = first; it != last; ++it) out.emplace_back(*it);
    return out;
}

IndexStats index_stats(const MetadataIndex& ix) {
    IndexStats s;
    for (const auto& [cls, paths] : ix.classes()) {
        s.per_class[cls] = paths.size();
        s.total += paths.size();
    }
    return s;
}

void dump_index(const MetadataIndex& ix, std::ostream& out) {
    for (const auto& [cls, paths] : ix.classes())
        for (const auto& p : paths) out << cls << '\t' << p << '\n';
}

}  // namespace mdload
