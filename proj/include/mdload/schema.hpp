#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdload/container.hpp"

namespace mdload {

/// Shape of a synthetic MDEventWorkspace ensemble. Defaults yield 1097
/// entries per experiment and 30 fixed entries.
struct EnsembleConfig {
    std::uint64_t n_experiments = 1;
    std::uint64_t logs_per_experiment = 262;
    std::uint64_t instrument_datasets = 20;
    std::uint64_t sample_entries = 17;
    std::uint64_t goniometer_datasets = 2;
    std::uint64_t events_per_experiment = 10'000;
    std::uint64_t rng_seed = 20220915;
    double signal_scale = 1.0;
};

/// Throws std::invalid_argument for configs the generator cannot honor.
void validate_config(const EnsembleConfig& cfg);

struct EntryCensus {
    std::uint64_t groups = 0;
    std::uint64_t datasets = 0;
    std::uint64_t attributes = 0;
    std::uint64_t total = 0;
    /// Group NX_class (or "NXgroup" when absent) and "SDS" for datasets.
    std::map<std::string, std::uint64_t> per_class;
};

inline constexpr std::uint64_t fixed_entries = 30;

/// Entries contributed by one experiment under `cfg`.
std::uint64_t entries_per_experiment(const EnsembleConfig& cfg) noexcept;

// Fixed layout names shared by generator, validator and loaders.
namespace layout {
inline constexpr const char* workspace = "/MDEventWorkspace";
inline constexpr const char* workspace_name = "MDEventWorkspace";
inline constexpr const char* coordinate_system = "/MDEventWorkspace/coordinate_system";
inline constexpr const char* dimensions = "/MDEventWorkspace/dimensions";
inline constexpr const char* box_structure = "/MDEventWorkspace/box_structure";
inline constexpr const char* event_data = "/MDEventWorkspace/event_data/event_data";
inline constexpr const char* process = "/MDEventWorkspace/process";
inline constexpr std::uint64_t event_columns = 8;
inline constexpr std::uint64_t box_datasets = 8;
inline constexpr std::uint64_t process_datasets = 11;

// Event table column order.
enum EventColumn : std::size_t { signal, error_sq, run_index, detector_id, qx, qy, qz, energy };

inline constexpr double q_lo = -5.0, q_hi = 5.0;        // 1/Angstrom
inline constexpr double e_lo = -10.0, e_hi = 50.0;      // meV

std::string experiment_path(std::uint64_t k);
}  // namespace layout

Node generate_ensemble(const EnsembleConfig& cfg);

EntryCensus count_entries(const Node& root);

struct Violation {
    std::string path;
    std::string message;
};

/// Empty iff `root` matches the ensemble layout.
std::vector<Violation> validate_schema(const Node& root);

}  // namespace mdload
