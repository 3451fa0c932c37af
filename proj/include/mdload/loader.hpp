#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mdload/container.hpp"

namespace mdload {

/// One MD event: signal, squared error, owning experiment, detector pixel,
/// and (Qx, Qy, Qz) in 1/Angstrom plus energy transfer in meV.
struct Event {
    float signal = 0;
    float error_sq = 0;
    std::uint32_t run_index = 0;
    std::uint32_t detector_id = 0;
    std::array<float, 4> coords{};
};

/// Names a slice of an experiment's value arena.
struct SeriesRef {
    std::string name;
    std::uint32_t offset = 0;
    std::uint32_t length = 0;
};

/// Per-orientation metadata. All real values live in one arena; logs store
/// `length` values at `offset` followed by `length` times.
struct ExperimentInfo {
    std::uint64_t index = 0;
    std::vector<double> values;
    std::vector<SeriesRef> logs;
    std::vector<SeriesRef> sample;
    std::vector<SeriesRef> instrument;
    std::vector<SeriesRef> goniometer;  // "angle", "axis", then any extras

    std::span<const double> series(const SeriesRef& r) const {
        return std::span<const double>(values).subspan(r.offset, r.length);
    }
    std::span<const double> log_times(const SeriesRef& r) const {
        return std::span<const double>(values).subspan(r.offset + r.length, r.length);
    }
    const SeriesRef* find_log(std::string_view name) const;
    /// First element of a named sample/instrument/goniometer entry.
    double scalar(std::span<const SeriesRef> bundle, std::string_view name) const;
};

/// Opaque copy of the box_structure datasets.
struct BoxStructure {
    struct Entry {
        std::string name;
        DType dtype;
        std::vector<std::uint64_t> dims;
        std::size_t offset;
        std::size_t size;
    };
    std::vector<Entry> entries;
    std::vector<std::byte> bytes;
};

struct MDWorkspace {
    static constexpr std::size_t n_dims = 4;
    static constexpr std::array<std::string_view, n_dims> dim_names = {"Qx", "Qy", "Qz", "E"};

    std::int64_t coordinate_system = 0;
    std::vector<std::int64_t> dimension_bins;
    std::vector<Event> events;
    BoxStructure box_structure;
    std::vector<ExperimentInfo> experiments;
};

struct PhaseTimes {
    double index_build_ms = 0;
    double metadata_read_ms = 0;
    double event_read_ms = 0;
};

/// Counters and phase wall-clock times of one load call.
///
/// `entries_visited` counts entries enumerated while discovering the file
/// layout (full traversals and group listings); keyed path lookups are free.
/// `buffer_allocations` counts heap buffers created for dataset contents:
/// each owning dataset read plus each capacity growth of destination storage.
struct LoadInstrumentation {
    std::uint64_t entries_visited = 0;
    std::uint64_t buffer_allocations = 0;
    std::uint64_t bytes_read = 0;
    PhaseTimes phase_ms;
};

struct LoadResult {
    MDWorkspace workspace;
    LoadInstrumentation stats;
};

enum class LoadMode { naive, indexed };

std::string_view to_string(LoadMode m) noexcept;
/// Parses "naive" or "indexed"; throws std::invalid_argument otherwise.
LoadMode parse_load_mode(std::string_view text);

/// Baseline loader: for every experiment it re-enumerates the whole
/// workspace from its root to find that experiment's entries, and reads
/// each dataset into a freshly allocated buffer.
LoadResult load_naive(const Node& file);

/// Builds the class-keyed index once, resolves every per-experiment path by
/// sorted range scans, and reads metadata into one pre-sized arena per
/// experiment via zero-copy dataset views.
LoadResult load_indexed(const Node& file);

LoadResult load(const Node& file, LoadMode mode);

/// Decodes an NXPack file and loads it.
LoadResult load_workspace(const std::string& filename, LoadMode mode);

/// Hex SHA-256 over experiments by index, logs and named bundles by name,
/// box datasets by name, and events in row order.
std::string workspace_digest(const MDWorkspace& ws);

/// Summed signal on an nx-by-ny grid; cell (ix, iy) is `cells[ix * ny + iy]`.
struct SliceGrid {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<double> cells;

    double at(std::size_t ix, std::size_t iy) const { return cells[ix * ny + iy]; }
    /// Row-major sum of all cells.
    double total() const;
};

struct SliceSpec {
    std::size_t dim_x = 0;
    std::size_t dim_y = 1;
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::pair<double, double> range_x{0, 1};
    std::pair<double, double> range_y{0, 1};
};

/// Lower edge of bin `i` of `n` equal bins over [lo, hi]; edge(n) == hi.
double bin_edge(double lo, double hi, std::size_t n, std::size_t i) noexcept;

/// Bins events by two coordinates. Bins are half-open [lo, hi) except the
/// last, which is closed; events outside either range are dropped.
/// Throws std::invalid_argument on bad dims, bin counts or ranges.
SliceGrid slice_2d(std::span<const Event> events, const SliceSpec& spec);
inline SliceGrid slice_2d(const MDWorkspace& ws, const SliceSpec& spec) { return slice_2d(ws.events, spec); }

}  // namespace mdload
