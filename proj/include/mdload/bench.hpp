#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdload/loader.hpp"

namespace mdload {

struct FiveNumberSummary {
    double min = 0;
    double q1 = 0;
    double median = 0;
    double q3 = 0;
    double max = 0;
};

/// Equal-width bins over [lo, hi]; half-open except the last bin.
struct Histogram {
    double lo = 0;
    double hi = 0;
    std::vector<std::uint64_t> counts;
};

struct SampleStats {
    std::size_t n = 0;
    double median = 0;
    double stddev = 0;
    FiveNumberSummary five;
    Histogram histogram;
};

/// Median (mean of the two middles for even n), sample standard deviation
/// (n - 1 denominator, 0 for a single sample), quartiles by linear
/// interpolation between order statistics, and a ceil(sqrt(n))-bin
/// histogram. Order-insensitive. Throws std::invalid_argument when empty.
SampleStats compute_stats(std::span<const double> samples);

/// 100 * (baseline - improved) / baseline. Throws std::invalid_argument
/// unless baseline is positive and finite.
double speedup_pct(double baseline_median, double improved_median);

struct BenchConfig {
    std::uint64_t reps = 25;
    std::uint64_t warmup = 3;
    std::vector<LoadMode> modes{LoadMode::naive, LoadMode::indexed};
    std::string file;
};

struct RunSample {
    std::uint64_t rep = 0;
    double wall_ms = 0;
    PhaseTimes phase_ms;
    std::uint64_t entries_visited = 0;
    std::uint64_t buffer_allocations = 0;
};

struct ModeReport {
    LoadMode mode = LoadMode::naive;
    std::vector<RunSample> runs;
    SampleStats stats;
};

struct BenchReport {
    std::string file;
    std::uint64_t reps = 0;
    std::uint64_t warmup = 0;
    std::vector<ModeReport> modes;
    /// Naive as baseline, indexed as improved; set when both modes ran.
    std::optional<double> speedup_pct;

    const ModeReport* find(LoadMode m) const;
};

/// Run order for `rounds` rounds: the modes strictly alternate, each round
/// running every mode once in the configured order.
std::vector<LoadMode> bench_schedule(std::uint64_t rounds, std::span<const LoadMode> modes);

/// Recomputes every mode's stats and the speedup from the raw samples.
void finalize_report(BenchReport& report);

/// Validates the file once, runs `warmup` discarded rounds, then `reps`
/// interleaved timed rounds. Every run decodes the file and builds a fresh
/// workspace.
BenchReport run_benchmark(const BenchConfig& cfg);

enum class ReportFormat { csv, json };

/// CSV: the raw table, a blank line, then the summary table.
std::size_t emit_report(const BenchReport& report, ReportFormat fmt, std::ostream& out);

BenchReport report_from_json(const std::string& text);

}  // namespace mdload
