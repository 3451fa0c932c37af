#include "mdload/container.hpp"

#include "sha256.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mdload {

std::size_t element_size(DType t) noexcept {
    switch (t) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::i32: return 4;
        case DType::i64: return 8;
        case DType::u32: return 4;
        case DType::bytes: return 1;
    }
    return 0;
}

std::string_view to_string(DType t) noexcept {
    switch (t) {
        case DType::f32: return "f32";
        case DType::f64: return "f64";
        case DType::i32: return "i32";
        case DType::i64: return "i64";
        case DType::u32: return "u32";
        case DType::bytes: return "bytes";
    }
    return "?";
}

std::string_view to_string(NodeKind k) noexcept {
    return k == NodeKind::group ? "group" : "dataset";
}

namespace {

void check_node_name(std::string_view name) {
    if (name.empty()) throw SchemaError("node name must be nonempty");
    if (name.find('/') != std::string_view::npos || name.find('@') != std::string_view::npos)
        throw SchemaError("node name '" + std::string(name) + "' contains '/' or '@'");
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
        throw SchemaError("node name too long");
}

void check_attr_name(std::string_view name) {
    if (name.empty()) throw SchemaError("attribute name must be nonempty");
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
        throw SchemaError("attribute name too long");
}

// Returns false on overflow.
bool checked_extent(std::span<const std::uint64_t> dims, std::size_t elem, std::uint64_t& out) {
    std::uint64_t n = elem;
    for (auto d : dims) {
        if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) return false;
        n *= d;
    }
    out = n;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Node

Node Node::group(std::string name) {
    check_node_name(name);
    Node n;
    n.name_ = std::move(name);
    return n;
}

Node Node::dataset(std::string name, DType dtype, std::vector<std::uint64_t> dims,
                   std::vector<std::byte> payload) {
    check_node_name(name);
    if (dims.size() > std::numeric_limits<std::uint8_t>::max()) throw SchemaError("too many dims");
    std::uint64_t expected = 0;
    if (!checked_extent(dims, element_size(dtype), expected) || expected != payload.size())
        throw SchemaError("dataset '" + name + "': payload length " + std::to_string(payload.size()) +
                          " does not match dims");
    Node n;
    n.kind_ = NodeKind::dataset;
    n.name_ = std::move(name);
    n.dtype_ = dtype;
    n.dims_ = std::move(dims);
    n.payload_ = std::move(payload);
    return n;
}

const AttributeValue* Node::find_attribute(std::string_view name) const noexcept {
    for (const auto& a : attributes_)
        if (a.name == name) return &a.value;
    return nullptr;
}

Node& Node::set_attribute(std::string name, AttributeValue value) {
    check_attr_name(name);
    if (const auto* s = std::get_if<std::string>(&value);
        s && s->size() > std::numeric_limits<std::uint32_t>::max())
        throw SchemaError("attribute text too long");
    for (auto& a : attributes_) {
        if (a.name == name) {
            a.value = std::move(value);
            return *this;
        }
    }
    if (attributes_.size() == std::numeric_limits<std::uint16_t>::max())
        throw SchemaError("too many attributes");
    attributes_.push_back({std::move(name), std::move(value)});
    return *this;
}

bool Node::remove_attribute(std::string_view name) {
    auto it = std::find_if(attributes_.begin(), attributes_.end(),
                           [&](const Attribute& a) { return a.name == name; });
    if (it == attributes_.end()) return false;
    attributes_.erase(it);
    return true;
}

const Node* Node::find_child(std::string_view name) const noexcept {
    if (auto it = child_lookup_.find(name); it != child_lookup_.end())
        return &children_[it->second];
    return nullptr;
}

Node* Node::find_child(std::string_view name) noexcept {
    return const_cast<Node*>(std::as_const(*this).find_child(name));
}

Node& Node::add_child(Node child) {
    if (!is_group()) throw SchemaError("dataset '" + name_ + "' cannot have children");
    check_node_name(child.name_);
    if (child_lookup_.contains(child.name_))
        throw SchemaError("duplicate child '" + child.name_ + "' in group '" + name_ + "'");
    child_lookup_.emplace(child.name_, children_.size());
    children_.push_back(std::move(child));
    return children_.back();
}

bool Node::remove_child(std::string_view name) {
    auto it = child_lookup_.find(name);
    if (it == child_lookup_.end()) return false;
    children_.erase(children_.begin() + static_cast<std::ptrdiff_t>(it->second));
    rebuild_child_lookup();
    return true;
}

void Node::reorder_children(std::span<const std::size_t> order) {
    if (order.size() != children_.size()) throw SchemaError("reorder: permutation size mismatch");
    std::vector<bool> seen(order.size(), false);
    std::vector<Node> next;
    next.reserve(children_.size());
    for (auto i : order) {
        if (i >= children_.size() || seen[i]) throw SchemaError("reorder: not a permutation");
        seen[i] = true;
        next.push_back(std::move(children_[i]));
    }
    children_ = std::move(next);
    rebuild_child_lookup();
}

void Node::rebuild_child_lookup() {
    child_lookup_.clear();
    for (std::size_t i = 0; i < children_.size(); ++i) child_lookup_.emplace(children_[i].name_, i);
}

std::uint64_t Node::element_count() const noexcept {
    return std::accumulate(dims_.begin(), dims_.end(), std::uint64_t{1}, std::multiplies<>{});
}

bool operator==(const Node& a, const Node& b) {
    if (a.kind_ != b.kind_ || a.name_ != b.name_ || a.attributes_ != b.attributes_) return false;
    if (a.is_group()) return a.children_ == b.children_;
    return a.dtype_ == b.dtype_ && a.dims_ == b.dims_ && a.payload_ == b.payload_;
}

// ---------------------------------------------------------------------------
// Paths

std::string join_path(std::string_view parent, std::string_view child) {
    std::string out;
    out.reserve(parent.size() + child.size() + 1);
    out.append(parent);
    if (out.empty() || out.back() != '/') out.push_back('/');
    out.append(child);
    return out;
}

const Node* find_node(const Node& root, std::string_view path) {
    if (path.empty() || path.front() != '/')
        throw PathError(PathError::Kind::malformed, "not an absolute path: '" + std::string(path) + "'");
    const Node* cur = &root;
    std::size_t pos = 1;
    while (pos < path.size()) {
        auto next = path.find('/', pos);
        auto segment = path.substr(pos, next == std::string_view::npos ? next : next - pos);
        if (segment.empty())
            throw PathError(PathError::Kind::malformed, "empty path segment in '" + std::string(path) + "'");
        if (!cur->is_group()) return nullptr;
        cur = cur->find_child(segment);
        if (!cur) return nullptr;
        if (next == std::string_view::npos) break;
        pos = next + 1;
        if (pos == path.size())
            throw PathError(PathError::Kind::malformed, "trailing '/' in '" + std::string(path) + "'");
    }
    return cur;
}

const Node& resolve_node(const Node& root, std::string_view path) {
    const Node* n = find_node(root, path);
    if (!n) throw PathError(PathError::Kind::not_found, "no such entry: " + std::string(path));
    return *n;
}

EntryRef resolve_entry(const Node& root, std::string_view path) {
    auto at = path.find('@');
    if (at == std::string_view::npos) return {&resolve_node(root, path), nullptr};
    const Node& node = resolve_node(root, path.substr(0, at));
    auto attr_name = path.substr(at + 1);
    for (const auto& a : node.attributes())
        if (a.name == attr_name) return {&node, &a};
    throw PathError(PathError::Kind::missing_attribute, "no attribute entry: " + std::string(path));
}

namespace {

std::string group_class(const Node& n) {
    if (const auto* v = n.find_attribute("NX_class"))
        if (const auto* s = std::get_if<std::string>(v)) return *s;
    return {};
}

void enumerate_into(const Node& node, const std::string& path, std::vector<EntryInfo>& out,
                    std::uint64_t& visits) {
    for (const auto& a : node.attributes()) {
        std::string p = path;
        p.push_back('@');
        p.append(a.name);
        out.push_back({std::move(p), "attribute", {}});
        ++visits;
    }
    for (const auto& c : node.children()) {
        std::string p = join_path(path, c.name());
        ++visits;
        if (c.is_group()) {
            out.push_back({p, "group", group_class(c)});
            enumerate_into(c, p, out, visits);
        } else {
            out.push_back({p, "dataset", "SDS"});
            for (const auto& a : c.attributes()) {
                out.push_back({p + "@" + a.name, "attribute", {}});
                ++visits;
            }
        }
    }
}

}  // namespace

std::vector<EntryInfo> enumerate_entries(const Node& root, std::string_view path, AccessCounters* counters) {
    const Node& start = resolve_node(root, path);
    std::vector<EntryInfo> out;
    std::uint64_t visits = 0;
    enumerate_into(start, std::string(path), out, visits);
    if (counters) counters->entries_visited += visits;
    return out;
}

std::vector<ChildInfo> list_children(const Node& root, std::string_view path, AccessCounters* counters) {
    const Node& n = resolve_node(root, path);
    if (!n.is_group())
        throw PathError(PathError::Kind::not_a_group, "not a group: " + std::string(path));
    std::vector<ChildInfo> out;
    out.reserve(n.children().size());
    for (const auto& c : n.children()) out.push_back({c.name(), c.kind()});
    if (counters) counters->entries_visited += out.size();
    return out;
}

const AttributeValue& read_attr(const Node& root, std::string_view path, std::string_view name) {
    const Node& n = resolve_node(root, path);
    if (const auto* v = n.find_attribute(name)) return *v;
    throw PathError(PathError::Kind::missing_attribute,
                    "no attribute '" + std::string(name) + "' on " + std::string(path));
}

namespace {

const Node& resolve_dataset(const Node& root, std::string_view path) {
    const Node& n = resolve_node(root, path);
    if (!n.is_dataset())
        throw PathError(PathError::Kind::not_a_dataset, "not a dataset: " + std::string(path));
    return n;
}

}  // namespace

DatasetData read_dataset(const Node& root, std::string_view path, AccessCounters* counters) {
    const Node& n = resolve_dataset(root, path);
    if (counters) counters->bytes_read += n.payload().size();
    return {n.dtype(), n.dims(), n.payload()};
}

DatasetView read_dataset_view(const Node& root, std::string_view path, AccessCounters* counters) {
    const Node& n = resolve_dataset(root, path);
    if (counters) counters->bytes_read += n.payload().size();
    return {n.dtype(), n.dims(), n.payload()};
}

// ---------------------------------------------------------------------------
// Encoder

namespace {

class Encoder {
public:
    std::vector<std::byte> bytes;

    template <class T>
    void put(T v) {
        auto at = bytes.size();
        bytes.resize(at + sizeof(T));
        store_le(bytes.data() + at, v);
    }
    void put_raw(std::span<const std::byte> raw) { bytes.insert(bytes.end(), raw.begin(), raw.end()); }
    void put_text16(std::string_view s) {
        put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        put_raw(std::as_bytes(std::span(s.data(), s.size())));
    }

    void node(const Node& n) {
        put<std::uint8_t>(static_cast<std::uint8_t>(n.kind()));
        put_text16(n.name());
        put<std::uint16_t>(static_cast<std::uint16_t>(n.attributes().size()));
        for (const auto& a : n.attributes()) {
            put_text16(a.name);
            std::visit(
                [&](const auto& v) {
                    using V = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<V, std::string>) {
                        put<std::uint8_t>(0);
                        put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
                        put_raw(std::as_bytes(std::span(v.data(), v.size())));
                    } else if constexpr (std::is_same_v<V, std::int64_t>) {
                        put<std::uint8_t>(1);
                        put<std::int64_t>(v);
                    } else {
                        put<std::uint8_t>(2);
                        put<double>(v);
                    }
                },
                a.value);
        }
        if (n.is_group()) {
            put<std::uint32_t>(static_cast<std::uint32_t>(n.children().size()));
            for (const auto& c : n.children()) node(c);
        } else {
            std::uint64_t expected = 0;
            if (!checked_extent(n.dims(), element_size(n.dtype()), expected) ||
                expected != n.payload().size())
                throw SchemaError("dataset '" + n.name() + "': payload length mismatch");
            put<std::uint8_t>(static_cast<std::uint8_t>(n.dtype()));
            put<std::uint8_t>(static_cast<std::uint8_t>(n.dims().size()));
            for (auto d : n.dims()) put<std::uint64_t>(d);
            put_raw(n.payload());
        }
    }
};

}  // namespace

std::vector<std::byte> encode_tree(const Node& root) {
    if (!root.is_group() || !root.name().empty())
        throw SchemaError("root must be a group with an empty name");
    Encoder enc;
    enc.put_raw(std::as_bytes(std::span(nxpack_magic)));
    enc.put<std::uint32_t>(nxpack_version);
    enc.put<std::uint32_t>(0);
    enc.node(root);
    return std::move(enc.bytes);
}

std::size_t write_tree(const Node& root, std::ostream& sink) {
    auto bytes = encode_tree(root);
    sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!sink) throw IoError("write_tree: sink failure");
    return bytes.size();
}

// ---------------------------------------------------------------------------
// Decoder

namespace {

class Decoder {
public:
    explicit Decoder(std::span<const std::byte> b) : buf_(b) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T v = load_le<T>(buf_.data() + pos_);
        pos_ += sizeof(T);
        return v;
    }
    std::span<const std::byte> get_raw(std::uint64_t n) {
        need(n);
        auto s = buf_.subspan(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return s;
    }
    std::string get_text(std::uint64_t n) {
        auto raw = get_raw(n);
        return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
    }
    bool at_end() const { return pos_ == buf_.size(); }
    std::size_t position() const { return pos_; }

    Node node(bool is_root) {
        auto kind_byte = get<std::uint8_t>();
        if (kind_byte > 1) invalid("unknown node kind " + std::to_string(kind_byte));
        auto kind = static_cast<NodeKind>(kind_byte);
        std::string name = get_text(get<std::uint16_t>());

        std::vector<Attribute> attrs;
        auto attr_count = get<std::uint16_t>();
        attrs.reserve(attr_count);
        for (std::uint16_t i = 0; i < attr_count; ++i) {
            std::string aname = get_text(get<std::uint16_t>());
            auto type = get<std::uint8_t>();
            AttributeValue value;
            switch (type) {
                case 0: value = get_text(get<std::uint32_t>()); break;
                case 1: value = get<std::int64_t>(); break;
                case 2: value = get<double>(); break;
                default: invalid("unknown attribute value type " + std::to_string(type));
            }
            attrs.push_back({std::move(aname), std::move(value)});
        }

        Node n;
        try {
            if (is_root) {
                if (kind != NodeKind::group || !name.empty()) invalid("root must be an unnamed group");
            } else if (kind == NodeKind::group) {
                n = Node::group(std::move(name));
            }
            if (kind == NodeKind::dataset) {
                auto dtype_byte = get<std::uint8_t>();
                if (dtype_byte > 5) invalid("unknown dtype " + std::to_string(dtype_byte));
                auto dtype = static_cast<DType>(dtype_byte);
                auto ndim = get<std::uint8_t>();
                std::vector<std::uint64_t> dims(ndim);
                for (auto& d : dims) d = get<std::uint64_t>();
                std::uint64_t len = 0;
                if (!checked_extent(dims, element_size(dtype), len)) invalid("dataset extent overflow");
                auto raw = get_raw(len);
                n = Node::dataset(std::move(name), dtype, std::move(dims),
                                  std::vector<std::byte>(raw.begin(), raw.end()));
            }
            for (auto& a : attrs) {
                if (n.find_attribute(a.name)) invalid("duplicate attribute '" + a.name + "'");
                n.set_attribute(std::move(a.name), std::move(a.value));
            }
        } catch (const SchemaError& e) {
            invalid(e.what());
        }

        if (kind == NodeKind::group) {
            auto child_count = get<std::uint32_t>();
            for (std::uint32_t i = 0; i < child_count; ++i) {
                Node child = node(false);
                if (n.find_child(child.name()))
                    throw ParseError(ParseError::Kind::duplicate_child,
                                     "duplicate child name '" + child.name() + "'");
                n.add_child(std::move(child));
            }
        }
        return n;
    }

private:
    void need(std::uint64_t n) const {
        if (n > buf_.size() - pos_)
            throw ParseError(ParseError::Kind::truncated,
                             "truncated input at offset " + std::to_string(pos_));
    }
    [[noreturn]] void invalid(const std::string& why) const {
        throw ParseError(ParseError::Kind::invalid_record,
                         "invalid record near offset " + std::to_string(pos_) + ": " + why);
    }

    std::span<const std::byte> buf_;
    std::size_t pos_ = 0;
};

}  // namespace

Node decode_tree(std::span<const std::byte> bytes) {
    Decoder dec(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), nxpack_magic, 4) != 0)
        throw ParseError(ParseError::Kind::bad_magic, "bad magic");
    dec.get_raw(4);
    auto version = dec.get<std::uint32_t>();
    if (version != nxpack_version)
        throw ParseError(ParseError::Kind::unsupported_version,
                         "unsupported version " + std::to_string(version));
    dec.get<std::uint32_t>();  // flags
    Node root = dec.node(true);
    if (!dec.at_end())
        throw ParseError(ParseError::Kind::invalid_record,
                         "trailing bytes after root record at offset " + std::to_string(dec.position()));
    return root;
}

Node read_tree(std::istream& source) {
    std::vector<char> raw((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
    if (source.bad()) throw IoError("read_tree: source failure");
    return decode_tree(std::as_bytes(std::span(raw)));
}

void save_file(const Node& root, const std::string& filename) {
    std::ofstream out(filename, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + filename + "' for writing");
    write_tree(root, out);
    out.close();
    if (!out) throw IoError("error closing '" + filename + "'");
}

Node load_file(const std::string& filename) {
    std::ifstream in(filename, std::ios::binary);
    if (!in) throw IoError("cannot open '" + filename + "'");
    return read_tree(in);
}

// ---------------------------------------------------------------------------
// Digest

namespace {

void digest_node(const Node& n, detail::Sha256& h) {
    h.update_le<std::uint8_t>(static_cast<std::uint8_t>(n.kind()));
    h.update_text(n.name());

    std::vector<const Attribute*> attrs;
    for (const auto& a : n.attributes()) attrs.push_back(&a);
    std::sort(attrs.begin(), attrs.end(), [](auto* a, auto* b) { return a->name < b->name; });
    h.update_le<std::uint64_t>(attrs.size());
    for (const auto* a : attrs) {
        h.update_text(a->name);
        h.update_le<std::uint8_t>(static_cast<std::uint8_t>(a->value.index()));
        std::visit(
            [&](const auto& v) {
                using V = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<V, std::string>) h.update_text(v);
                else h.update_le<V>(v);
            },
            a->value);
    }

    if (n.is_dataset()) {
        h.update_le<std::uint8_t>(static_cast<std::uint8_t>(n.dtype()));
        h.update_le<std::uint64_t>(n.dims().size());
        for (auto d : n.dims()) h.update_le<std::uint64_t>(d);
        h.update_le<std::uint64_t>(n.payload().size());
        h.update(n.payload().data(), n.payload().size());
        return;
    }
    std::vector<const Node*> kids;
    for (const auto& c : n.children()) kids.push_back(&c);
    std::sort(kids.begin(), kids.end(), [](auto* a, auto* b) { return a->name() < b->name(); });
    h.update_le<std::uint64_t>(kids.size());
    for (const auto* c : kids) digest_node(*c, h);
}

}  // namespace

std::string canonical_digest(const Node& root) {
    detail::Sha256 h;
    digest_node(root, h);
    return h.hex();
}

}  // namespace mdload
