#include "mdload/loader.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdload/index.hpp"
#include "mdload/schema.hpp"
#include "sha256.hpp"

namespace mdload {

std::string_view to_string(LoadMode m) noexcept { return m == LoadMode::naive ? "naive" : "indexed"; }

LoadMode parse_load_mode(std::string_view text) {
    if (text == "naive") return LoadMode::naive;
    if (text == "indexed") return LoadMode::indexed;
    throw std::invalid_argument("unknown load mode '" + std::string(text) + "'");
}

const SeriesRef* ExperimentInfo::find_log(std::string_view name) const {
    for (const auto& r : logs)
        if (r.name == name) return &r;
    return nullptr;
}

double ExperimentInfo::scalar(std::span<const SeriesRef> bundle, std::string_view name) const {
    for (const auto& r : bundle)
        if (r.name == name && r.length > 0) return values[r.offset];
    throw std::out_of_range("no entry '" + std::string(name) + "' in experiment " + std::to_string(index));
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double element_as_double(DType t, const std::byte* p) {
    switch (t) {
        case DType::f32: return load_le<float>(p);
        case DType::f64: return load_le<double>(p);
        case DType::i32: return load_le<std::int32_t>(p);
        case DType::i64: return static_cast<double>(load_le<std::int64_t>(p));
        case DType::u32: return load_le<std::uint32_t>(p);
        case DType::bytes: break;
    }
    throw SchemaError("byte dataset where numbers were expected");
}

std::size_t element_total(DType t, std::span<const std::byte> payload) {
    if (t == DType::bytes) throw SchemaError("byte dataset where numbers were expected");
    return payload.size() / element_size(t);
}

// Appends a numeric payload to `dst`; counts a buffer allocation whenever the
// destination has to grow.
void append_values(std::vector<double>& dst, DType t, std::span<const std::byte> payload,
                   std::uint64_t& allocations) {
    const std::size_t n = element_total(t, payload);
    const auto cap = dst.capacity();
    const std::size_t es = element_size(t);
    for (std::size_t i = 0; i < n; ++i) dst.push_back(element_as_double(t, payload.data() + i * es));
    if (dst.capacity() != cap) ++allocations;
}

SeriesRef make_ref(std::string name, std::size_t offset, std::size_t length) {
    if (offset > std::numeric_limits<std::uint32_t>::max() || length > std::numeric_limits<std::uint32_t>::max())
        throw SchemaError("experiment metadata exceeds 2^32 values");
    return {std::move(name), static_cast<std::uint32_t>(offset), static_cast<std::uint32_t>(length)};
}

std::string_view leaf_name(std::string_view path) { return path.substr(path.rfind('/') + 1); }

bool parse_experiment_name(std::string_view name, std::uint64_t& k) {
    constexpr std::string_view stem = "experiment";
    if (!name.starts_with(stem) || name.size() == stem.size()) return false;
    auto digits = name.substr(stem.size());
    if (digits.size() > 1 && digits.front() == '0') return false;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    return ec == std::errc{} && ptr == digits.data() + digits.size();
}

std::uint64_t check_contiguous(std::vector<std::uint64_t>& ks) {
    std::sort(ks.begin(), ks.end());
    for (std::size_t i = 0; i < ks.size(); ++i)
        if (ks[i] != i) throw SchemaError("non-contiguous experiment indices");
    return ks.size();
}

std::int64_t scalar_i64(DType t, std::span<const std::byte> payload) {
    if (t != DType::i64 || payload.size() != sizeof(std::int64_t))
        throw SchemaError("coordinate_system must be an i64 scalar");
    return load_le<std::int64_t>(payload.data());
}

void check_event_view(DType t, std::span<const std::uint64_t> dims) {
    if (t != DType::f32 || dims.size() != 2 || dims[1] != layout::event_columns)
        throw SchemaError("event_data must be f32 with 8 columns");
}

// `events` is pre-sized to the row count.
void decode_events(std::span<const std::byte> payload, std::size_t n_experiments, std::vector<Event>& events) {
    constexpr std::size_t row_bytes = layout::event_columns * sizeof(float);
    for (std::size_t r = 0; r < events.size(); ++r) {
        const std::byte* row = payload.data() + r * row_bytes;
        auto col = [row](std::size_t c) { return load_le<float>(row + c * sizeof(float)); };
        Event& e = events[r];
        e.signal = col(layout::signal);
        e.error_sq = col(layout::error_sq);
        const float run = col(layout::run_index);
        const float det = col(layout::detector_id);
        if (!std::isfinite(e.signal)) throw SchemaError("non-finite event signal at row " + std::to_string(r));
        if (!(run >= 0.0f) || run != std::floor(run) || static_cast<std::size_t>(run) >= n_experiments)
            throw SchemaError("event run index out of range at row " + std::to_string(r));
        if (!(det >= 0.0f) || det != std::floor(det))
            throw SchemaError("invalid detector id at row " + std::to_string(r));
        e.run_index = static_cast<std::uint32_t>(run);
        e.detector_id = static_cast<std::uint32_t>(det);
        for (std::size_t d = 0; d < MDWorkspace::n_dims; ++d) e.coords[d] = col(layout::qx + d);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Naive loader

LoadResult load_naive(const Node& file) {
    LoadResult result;
    MDWorkspace& ws = result.workspace;
    LoadInstrumentation& st = result.stats;
    AccessCounters acc;
    double rescan_ms = 0;
    const auto meta_t0 = Clock::now();

    const auto top = list_children(file, "/", &acc);
    if (std::none_of(top.begin(), top.end(), [](const ChildInfo& c) { return c.name == layout::workspace_name; }))
        throw PathError(PathError::Kind::not_found, "no such entry: " + std::string(layout::workspace));

    std::vector<std::uint64_t> ks;
    for (const auto& c : list_children(file, layout::workspace, &acc)) {
        std::uint64_t k = 0;
        if (c.kind == NodeKind::group && parse_experiment_name(c.name, k)) ks.push_back(k);
    }
    const std::uint64_t n_experiments = check_contiguous(ks);

    {
        auto d = read_dataset(file, layout::coordinate_system, &acc);
        ++st.buffer_allocations;
        ws.coordinate_system = scalar_i64(d.dtype, d.payload);
    }
    {
        auto d = read_dataset(file, layout::dimensions, &acc);
        ++st.buffer_allocations;
        const auto cap = ws.dimension_bins.capacity();
        const std::size_t es = element_size(d.dtype);
        for (std::size_t i = 0; i < element_total(d.dtype, d.payload); ++i)
            ws.dimension_bins.push_back(static_cast<std::int64_t>(element_as_double(d.dtype, d.payload.data() + i * es)));
        if (ws.dimension_bins.capacity() != cap) ++st.buffer_allocations;
    }
    for (const auto& c : list_children(file, layout::box_structure, &acc)) {
        if (c.kind != NodeKind::dataset) continue;
        auto d = read_dataset(file, join_path(layout::box_structure, c.name), &acc);
        ++st.buffer_allocations;
        auto& bytes = ws.box_structure.bytes;
        const auto cap = bytes.capacity();
        ws.box_structure.entries.push_back({c.name, d.dtype, d.dims, bytes.size(), d.payload.size()});
        bytes.insert(bytes.end(), d.payload.begin(), d.payload.end());
        if (bytes.capacity() != cap) ++st.buffer_allocations;
    }

    for (std::uint64_t k = 0; k < n_experiments; ++k) {
        // Rediscover the file layout from the workspace root for every experiment.
        const auto rescan_t0 = Clock::now();
        const auto entries = enumerate_entries(file, layout::workspace, &acc);
        rescan_ms += ms_since(rescan_t0);

        ExperimentInfo e;
        e.index = k;
        const std::string prefix = layout::experiment_path(k) + "/";
        for (const auto& entry : entries) {
            if (!entry.path.starts_with(prefix)) continue;
            const std::string_view rest = std::string_view(entry.path).substr(prefix.size());
            const auto slash = rest.find('/');
            if (slash == std::string_view::npos) continue;
            const std::string_view section = rest.substr(0, slash);
            const std::string_view leaf = rest.substr(slash + 1);
            if (leaf.find('/') != std::string_view::npos) continue;

            if (entry.type == "dataset" &&
                (section == "instrument" || section == "sample" || section == "goniometer")) {
                auto d = read_dataset(file, entry.path, &acc);
                ++st.buffer_allocations;
                const std::size_t offset = e.values.size();
                append_values(e.values, d.dtype, d.payload, st.buffer_allocations);
                auto& bundle = section == "instrument" ? e.instrument : section == "sample" ? e.sample : e.goniometer;
                bundle.push_back(make_ref(std::string(leaf), offset, e.values.size() - offset));
            } else if (entry.type == "group" && section == "logs" && entry.nx_class == "NXlog") {
                auto v = read_dataset(file, join_path(entry.path, "value"), &acc);
                auto t = read_dataset(file, join_path(entry.path, "time"), &acc);
                st.buffer_allocations += 2;
                if (v.dims != t.dims || v.dims.size() != 1)
                    throw SchemaError(entry.path + ": log value/time lengths differ");
                const std::size_t offset = e.values.size();
                append_values(e.values, v.dtype, v.payload, st.buffer_allocations);
                const std::size_t len = e.values.size() - offset;
                append_values(e.values, t.dtype, t.payload, st.buffer_allocations);
                e.logs.push_back(make_ref(std::string(leaf), offset, len));
            }
        }
        ws.experiments.push_back(std::move(e));
    }
    st.phase_ms.index_build_ms = rescan_ms;
    st.phase_ms.metadata_read_ms = ms_since(meta_t0) - rescan_ms;

    const auto ev_t0 = Clock::now();
    {
        auto d = read_dataset(file, layout::event_data, &acc);
        ++st.buffer_allocations;
        check_event_view(d.dtype, d.dims);
        ws.events.resize(static_cast<std::size_t>(d.dims[0]));
        if (!ws.events.empty()) ++st.buffer_allocations;
        decode_events(d.payload, n_experiments, ws.events);
    }
    st.phase_ms.event_read_ms = ms_since(ev_t0);

    st.entries_visited = acc.entries_visited;
    st.bytes_read = acc.bytes_read;
    return result;
}

// ---------------------------------------------------------------------------
// Indexed loader

LoadResult load_indexed(const Node& file) {
    LoadResult result;
    MDWorkspace& ws = result.workspace;
    LoadInstrumentation& st = result.stats;
    AccessCounters acc;

    const auto ix_t0 = Clock::now();
    const MetadataIndex ix = build_index(file);
    acc.entries_visited += ix.entries_visited();
    st.phase_ms.index_build_ms = ms_since(ix_t0);

    const auto meta_t0 = Clock::now();
    const auto entry_class = ix.lookup_class("NXentry");
    if (std::find(entry_class.begin(), entry_class.end(), layout::workspace) == entry_class.end())
        throw PathError(PathError::Kind::not_found, "no NXentry at " + std::string(layout::workspace));

    std::vector<std::uint64_t> ks;
    for (auto p : ix.lookup_prefix("NXgroup", layout::workspace)) {
        std::uint64_t k = 0;
        const std::string_view parent = p.substr(0, p.rfind('/'));
        if (parent == layout::workspace && parse_experiment_name(leaf_name(p), k)) ks.push_back(k);
    }
    const std::uint64_t n_experiments = check_contiguous(ks);

    {
        auto v = read_dataset_view(file, layout::coordinate_system, &acc);
        ws.coordinate_system = scalar_i64(v.dtype, v.payload);
    }
    {
        auto v = read_dataset_view(file, layout::dimensions, &acc);
        const std::size_t n = element_total(v.dtype, v.payload);
        ws.dimension_bins.reserve(n);
        if (n > 0) ++st.buffer_allocations;
        for (std::size_t i = 0; i < n; ++i)
            ws.dimension_bins.push_back(
                static_cast<std::int64_t>(element_as_double(v.dtype, v.payload.data() + i * element_size(v.dtype))));
    }
    {
        std::vector<std::pair<std::string_view, DatasetView>> views;
        std::size_t total = 0;
        for (auto p : ix.lookup_prefix("SDS", layout::box_structure)) {
            views.emplace_back(p, read_dataset_view(file, p, &acc));
            total += views.back().second.payload.size();
        }
        auto& box = ws.box_structure;
        box.bytes.reserve(total);
        box.entries.reserve(views.size());
        if (total > 0) ++st.buffer_allocations;
        for (const auto& [p, v] : views) {
            box.entries.push_back({std::string(leaf_name(p)), v.dtype,
                                   std::vector<std::uint64_t>(v.dims.begin(), v.dims.end()), box.bytes.size(),
                                   v.payload.size()});
            box.bytes.insert(box.bytes.end(), v.payload.begin(), v.payload.end());
        }
    }

    ws.experiments.resize(n_experiments);
    struct Pending {
        std::vector<SeriesRef>* bundle;
        std::string_view name;
        DatasetView value;
        DatasetView time;  // logs only
        bool is_log;
    };
    std::vector<Pending> pending;
    for (std::uint64_t k = 0; k < n_experiments; ++k) {
        ExperimentInfo& e = ws.experiments[k];
        e.index = k;
        const std::string prefix = layout::experiment_path(k);
        pending.clear();
        std::size_t total = 0;

        auto collect = [&](std::vector<SeriesRef>& bundle, const char* section) {
            const std::string section_path = prefix + "/" + section;
            for (auto p : ix.lookup_prefix("SDS", section_path)) {
                if (p.size() <= section_path.size() + 1 || p.find('/', section_path.size() + 1) != std::string_view::npos)
                    continue;
                auto v = read_dataset_view(file, p, &acc);
                total += element_total(v.dtype, v.payload);
                pending.push_back({&bundle, leaf_name(p), v, {}, false});
            }
        };
        collect(e.instrument, "instrument");
        collect(e.sample, "sample");
        collect(e.goniometer, "goniometer");

        const std::string logs_path = prefix + "/logs";
        for (auto p : ix.lookup_prefix("NXlog", logs_path)) {
            if (p.find('/', logs_path.size() + 1) != std::string_view::npos) continue;
            const std::string log_path(p);
            auto v = read_dataset_view(file, join_path(log_path, "value"), &acc);
            auto t = read_dataset_view(file, join_path(log_path, "time"), &acc);
            if (v.dims.size() != 1 || !std::equal(v.dims.begin(), v.dims.end(), t.dims.begin(), t.dims.end()))
                throw SchemaError(log_path + ": log value/time lengths differ");
            total += element_total(v.dtype, v.payload) + element_total(t.dtype, t.payload);
            pending.push_back({&e.logs, leaf_name(p), v, t, true});
        }

        // One arena per experiment, sized up front.
        e.values.reserve(total);
        if (total > 0) ++st.buffer_allocations;
        for (const auto& item : pending) {
            const std::size_t offset = e.values.size();
            append_values(e.values, item.value.dtype, item.value.payload, st.buffer_allocations);
            const std::size_t len = e.values.size() - offset;
            if (item.is_log) append_values(e.values, item.time.dtype, item.time.payload, st.buffer_allocations);
            item.bundle->push_back(make_ref(std::string(item.name), offset, len));
        }
    }
    st.phase_ms.metadata_read_ms = ms_since(meta_t0);

    const auto ev_t0 = Clock::now();
    {
        auto v = read_dataset_view(file, layout::event_data, &acc);
        check_event_view(v.dtype, v.dims);
        ws.events.resize(static_cast<std::size_t>(v.dims[0]));
        if (!ws.events.empty()) ++st.buffer_allocations;
        decode_events(v.payload, n_experiments, ws.events);
    }
    st.phase_ms.event_read_ms = ms_since(ev_t0);

    st.entries_visited = acc.entries_visited;
    st.bytes_read = acc.bytes_read;
    return result;
}

LoadResult load(const Node& file, LoadMode mode) {
    return mode == LoadMode::naive ? load_naive(file) : load_indexed(file);
}

LoadResult load_workspace(const std::string& filename, LoadMode mode) { return load(load_file(filename), mode); }

// ---------------------------------------------------------------------------
// Digest

namespace {

void digest_bundle(const ExperimentInfo& e, const std::vector<SeriesRef>& bundle, bool with_times,
                   detail::Sha256& h) {
    std::vector<const SeriesRef*> sorted;
    for (const auto& r : bundle) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->name < b->name; });
    h.update_le<std::uint64_t>(sorted.size());
    for (const auto* r : sorted) {
        h.update_text(r->name);
        h.update_le<std::uint64_t>(r->length);
        for (double v : e.series(*r)) h.update_le(v);
        if (with_times)
            for (double t : e.log_times(*r)) h.update_le(t);
    }
}

}  // namespace

std::string workspace_digest(const MDWorkspace& ws) {
    detail::Sha256 h;
    h.update_le<std::int64_t>(ws.coordinate_system);
    h.update_le<std::uint64_t>(ws.dimension_bins.size());
    for (auto b : ws.dimension_bins) h.update_le(b);

    std::vector<const BoxStructure::Entry*> box;
    for (const auto& b : ws.box_structure.entries) box.push_back(&b);
    std::sort(box.begin(), box.end(), [](auto* a, auto* b) { return a->name < b->name; });
    h.update_le<std::uint64_t>(box.size());
    for (const auto* b : box) {
        h.update_text(b->name);
        h.update_le<std::uint8_t>(static_cast<std::uint8_t>(b->dtype));
        h.update_le<std::uint64_t>(b->dims.size());
        for (auto d : b->dims) h.update_le(d);
        h.update_le<std::uint64_t>(b->size);
        h.update(ws.box_structure.bytes.data() + b->offset, b->size);
    }

    std::vector<const ExperimentInfo*> exps;
    for (const auto& e : ws.experiments) exps.push_back(&e);
    std::sort(exps.begin(), exps.end(), [](auto* a, auto* b) { return a->index < b->index; });
    h.update_le<std::uint64_t>(exps.size());
    for (const auto* e : exps) {
        h.update_le<std::uint64_t>(e->index);
        digest_bundle(*e, e->logs, true, h);
        digest_bundle(*e, e->sample, false, h);
        digest_bundle(*e, e->instrument, false, h);
        digest_bundle(*e, e->goniometer, false, h);
    }

    h.update_le<std::uint64_t>(ws.events.size());
    for (const auto& ev : ws.events) {
        h.update_le(ev.signal);
        h.update_le(ev.error_sq);
        h.update_le(ev.run_index);
        h.update_le(ev.detector_id);
        for (float c : ev.coords) h.update_le(c);
    }
    return h.hex();
}

// ---------------------------------------------------------------------------
// Slicing

double SliceGrid::total() const {
    double sum = 0;
    for (double c : cells) sum += c;
    return sum;
}

double bin_edge(double lo, double hi, std::size_t n, std::size_t i) noexcept {
    if (i >= n) return hi;
    return lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n));
}

namespace {

// Bin of `v`, or n when outside [lo, hi].
std::size_t locate_bin(double v, double lo, double hi, std::size_t n) {
    if (!(v >= lo && v <= hi)) return n;
    const double t = (v - lo) / (hi - lo) * static_cast<double>(n);
    std::size_t i = t >= static_cast<double>(n) ? n - 1 : static_cast<std::size_t>(t);
    // Settle against the exact edge definition so bin membership never
    // depends on rounding in the estimate above.
    while (i > 0 && v < bin_edge(lo, hi, n, i)) --i;
    while (i + 1 < n && v >= bin_edge(lo, hi, n, i + 1)) ++i;
    return i;
}

void check_range(std::pair<double, double> r, const char* axis) {
    if (!std::isfinite(r.first) || !std::isfinite(r.second) || !(r.first < r.second))
        throw std::invalid_argument(std::string("slice: ") + axis + " range must satisfy lo < hi");
}

}  // namespace

SliceGrid slice_2d(std::span<const Event> events, const SliceSpec& spec) {
    if (spec.dim_x >= MDWorkspace::n_dims || spec.dim_y >= MDWorkspace::n_dims)
        throw std::invalid_argument("slice: dimension index must be < 4");
    if (spec.dim_x == spec.dim_y) throw std::invalid_argument("slice: dimensions must differ");
    if (spec.nx == 0 || spec.ny == 0) throw std::invalid_argument("slice: bin counts must be >= 1");
    check_range(spec.range_x, "x");
    check_range(spec.range_y, "y");

    SliceGrid g{spec.nx, spec.ny, std::vector<double>(spec.nx * spec.ny, 0.0)};
    for (const auto& e : events) {
        const std::size_t ix = locate_bin(e.coords[spec.dim_x], spec.range_x.first, spec.range_x.second, spec.nx);
        if (ix == spec.nx) continue;
        const std::size_t iy = locate_bin(e.coords[spec.dim_y], spec.range_y.first, spec.range_y.second, spec.ny);
        if (iy == spec.ny) continue;
        g.cells[ix * spec.ny + iy] += e.signal;
    }
    return g;
}

}  // namespace mdload
