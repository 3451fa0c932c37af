#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

// Hierarchical self-describing container (groups, datasets, attributes) and
// the NXPack binary codec used to persist it.
namespace mdload {

using AttributeValue = std::variant<std::string, std::int64_t, double>;

enum class NodeKind : std::uint8_t { group = 0, dataset = 1 };

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i32 = 2, i64 = 3, u32 = 4, bytes = 5 };

std::size_t element_size(DType t) noexcept;
std::string_view to_string(DType t) noexcept;
std::string_view to_string(NodeKind k) noexcept;

struct Attribute {
    std::string name;
    AttributeValue value;

    friend bool operator==(const Attribute&, const Attribute&) = default;
};

/// Raised when a tree violates a structural invariant (bad name, payload size
/// mismatch, duplicate attribute or child).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Path resolution failures. `kind()` separates a missing node from a missing
/// attribute and from a node of the wrong kind.
class PathError : public std::runtime_error {
public:
    enum class Kind { not_found, missing_attribute, not_a_group, not_a_dataset, malformed };
    PathError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Sink or source I/O failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NXPack decode failures, one kind per distinct cause.
class ParseError : public std::runtime_error {
public:
    enum class Kind { bad_magic, unsupported_version, truncated, duplicate_child, invalid_record };
    ParseError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Per-session access counters. Passed explicitly; never global.
struct AccessCounters {
    std::uint64_t entries_visited = 0;
    std::uint64_t bytes_read = 0;
};

namespace detail {
struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};
}  // namespace detail

/// One file entry: a group with children, or a dataset with a payload. Both
/// carry attributes. Children keep insertion order; names are unique.
class Node {
public:
    Node() = default;  // empty-named group, i.e. a root

    static Node group(std::string name);
    static Node dataset(std::string name, DType dtype, std::vector<std::uint64_t> dims,
                        std::vector<std::byte> payload);

    NodeKind kind() const noexcept { return kind_; }
    bool is_group() const noexcept { return kind_ == NodeKind::group; }
    bool is_dataset() const noexcept { return kind_ == NodeKind::dataset; }
    const std::string& name() const noexcept { return name_; }

    const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
    const AttributeValue* find_attribute(std::string_view name) const noexcept;
    /// Adds or replaces an attribute.
    Node& set_attribute(std::string name, AttributeValue value);
    bool remove_attribute(std::string_view name);

    const std::vector<Node>& children() const noexcept { return children_; }
    const Node* find_child(std::string_view name) const noexcept;
    Node* find_child(std::string_view name) noexcept;
    /// Throws SchemaError on a duplicate name or when called on a dataset.
    Node& add_child(Node child);
    bool remove_child(std::string_view name);
    /// Reorders children by the given permutation of current positions.
    void reorder_children(std::span<const std::size_t> order);

    DType dtype() const noexcept { return dtype_; }
    const std::vector<std::uint64_t>& dims() const noexcept { return dims_; }
    const std::vector<std::byte>& payload() const noexcept { return payload_; }
    std::vector<std::byte>& mutable_payload() noexcept { return payload_; }
    std::uint64_t element_count() const noexcept;

    /// Structural equality: kind, name, attributes, children (in order),
    /// dtype, dims and payload.
    friend bool operator==(const Node& a, const Node& b);

private:
    void rebuild_child_lookup();

    NodeKind kind_ = NodeKind::group;
    std::string name_;
    std::vector<Attribute> attributes_;
    std::vector<Node> children_;
    std::unordered_map<std::string, std::size_t, detail::StringHash, std::equal_to<>> child_lookup_;
    DType dtype_ = DType::bytes;
    std::vector<std::uint64_t> dims_;
    std::vector<std::byte> payload_;
};

// ---------------------------------------------------------------------------
// Entry paths

/// Joins a parent path and a child name ("/" + "a" -> "/a").
std::string join_path(std::string_view parent, std::string_view child);

/// Resolves an absolute node path ("/", "/a/b"). Returns nullptr if missing.
/// Throws PathError(malformed) for relative or empty-segment paths.
const Node* find_node(const Node& root, std::string_view path);
/// As find_node, but throws PathError(not_found).
const Node& resolve_node(const Node& root, std::string_view path);

struct EntryRef {
    const Node* node = nullptr;
    const Attribute* attribute = nullptr;  // set for "<node-path>@<attr>" paths
};
/// Resolves node paths and attribute entries ("/a/b@NX_class").
EntryRef resolve_entry(const Node& root, std::string_view path);

struct EntryInfo {
    std::string path;
    std::string type;  // "group", "dataset" or "attribute"
    std::string nx_class;  // group NX_class text, "SDS" for datasets, empty for attributes
};

/// Full depth-first enumeration of every entry below (not including) the node
/// at `path`, attributes included. Each entry produced costs one visit.
std::vector<EntryInfo> enumerate_entries(const Node& root, std::string_view path,
                                         AccessCounters* counters = nullptr);

struct ChildInfo {
    std::string name;
    NodeKind kind;

    friend bool operator==(const ChildInfo&, const ChildInfo&) = default;
};

/// Lists a group's direct children in stored order. Costs one visit per child.
std::vector<ChildInfo> list_children(const Node& root, std::string_view path,
                                     AccessCounters* counters = nullptr);

const AttributeValue& read_attr(const Node& root, std::string_view path, std::string_view name);

struct DatasetData {
    DType dtype;
    std::vector<std::uint64_t> dims;
    std::vector<std::byte> payload;
};

/// Owning read: the payload is copied into a fresh buffer.
DatasetData read_dataset(const Node& root, std::string_view path, AccessCounters* counters = nullptr);

struct DatasetView {
    DType dtype;
    std::span<const std::uint64_t> dims;
    std::span<const std::byte> payload;
};

/// Zero-copy read; the view borrows from the tree.
DatasetView read_dataset_view(const Node& root, std::string_view path,
                              AccessCounters* counters = nullptr);

// ---------------------------------------------------------------------------
// NXPack codec

inline constexpr std::uint8_t nxpack_magic[4] = {0x4E, 0x58, 0x50, 0x31};
inline constexpr std::uint32_t nxpack_version = 1;

std::size_t write_tree(const Node& root, std::ostream& sink);
std::vector<std::byte> encode_tree(const Node& root);

Node read_tree(std::istream& source);
Node decode_tree(std::span<const std::byte> bytes);

void save_file(const Node& root, const std::string& filename);
Node load_file(const std::string& filename);

/// Hex SHA-256 over a name-sorted depth-first walk. Insensitive to sibling
/// and attribute order; sensitive to every name, value, dim and payload byte.
std::string canonical_digest(const Node& root);

// ---------------------------------------------------------------------------
// Little-endian element helpers

template <class T>
T load_le(const std::byte* p) noexcept;
template <class T>
void store_le(std::byte* p, T value) noexcept;

/// Encodes a span of arithmetic values into little-endian bytes.
template <class T>
std::vector<std::byte> to_le_bytes(std::span<const T> values);

}  // namespace mdload

#include "mdload/detail/endian.hpp"
