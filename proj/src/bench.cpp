#include "mdload/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mdload/schema.hpp"

namespace mdload {

namespace {

// Linear interpolation between order statistics of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

SampleStats compute_stats(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("compute_stats: empty sample");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();

    SampleStats st;
    st.n = n;
    st.median = n % 2 == 1 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;

    if (n > 1) {
        double mean = 0;
        for (double x : s) mean += x;
        mean /= static_cast<double>(n);
        double ss = 0;
        for (double x : s) ss += (x - mean) * (x - mean);
        st.stddev = std::sqrt(ss / static_cast<double>(n - 1));
    }

    st.five = {s.front(), quantile_sorted(s, 0.25), st.median, quantile_sorted(s, 0.75), s.back()};

    auto& hist = st.histogram;
    hist.lo = s.front();
    hist.hi = s.back();
    const auto bins = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    hist.counts.assign(bins, 0);
    for (double x : s) {
        std::size_t b = 0;
        if (hist.hi > hist.lo) {
            b = static_cast<std::size_t>((x - hist.lo) / (hist.hi - hist.lo) * static_cast<double>(bins));
            b = std::min(b, bins - 1);
        }
        ++hist.counts[b];
    }
    return st;
}

double speedup_pct(double baseline_median, double improved_median) {
    if (!(baseline_median > 0.0) || !std::isfinite(baseline_median))
        throw std::invalid_argument("speedup_pct: baseline must be positive");
    return 100.0 * (baseline_median - improved_median) / baseline_median;
}

const ModeReport* BenchReport::find(LoadMode m) const {
    for (const auto& r : modes)
        if (r.mode == m) return &r;
    return nullptr;
}

std::vector<LoadMode> bench_schedule(std::uint64_t rounds, std::span<const LoadMode> modes) {
    std::vector<LoadMode> order;
    order.reserve(rounds * modes.size());
    for (std::uint64_t r = 0; r < rounds; ++r) order.insert(order.end(), modes.begin(), modes.end());
    return order;
}

void finalize_report(BenchReport& report) {
    for (auto& m : report.modes) {
        std::vector<double> wall;
        wall.reserve(m.runs.size());
        for (const auto& r : m.runs) wall.push_back(r.wall_ms);
        if (!wall.empty()) m.stats = compute_stats(wall);
    }
    report.speedup_pct.reset();
    const auto* naive = report.find(LoadMode::naive);
    const auto* indexed = report.find(LoadMode::indexed);
    if (naive && indexed && naive->stats.n > 0 && indexed->stats.n > 0)
        report.speedup_pct = speedup_pct(naive->stats.median, indexed->stats.median);
}

BenchReport run_benchmark(const BenchConfig& cfg) {
    if (cfg.reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
    if (cfg.modes.empty()) throw std::invalid_argument("bench: no modes selected");
    for (std::size_t i = 0; i < cfg.modes.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.modes.size(); ++j)
            if (cfg.modes[i] == cfg.modes[j]) throw std::invalid_argument("bench: duplicate mode");

    {
        const Node tree = load_file(cfg.file);
        const auto violations = validate_schema(tree);
        if (!violations.empty())
            throw SchemaError("bench: " + cfg.file + " fails validation at " + violations.front().path + ": " +
                              violations.front().message);
    }

    BenchReport report;
    report.file = cfg.file;
    report.reps = cfg.reps;
    report.warmup = cfg.warmup;
    for (auto m : cfg.modes) report.modes.push_back({m, {}, {}});

    for (auto m : bench_schedule(cfg.warmup, cfg.modes)) (void)load_workspace(cfg.file, m);

    std::vector<std::uint64_t> rep_of(cfg.modes.size(), 0);
    for (auto m : bench_schedule(cfg.reps, cfg.modes)) {
        const auto slot = static_cast<std::size_t>(std::find(cfg.modes.begin(), cfg.modes.end(), m) - cfg.modes.begin());
        const auto t0 = std::chrono::steady_clock::now();
        const LoadResult r = load_workspace(cfg.file, m);
        const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        report.modes[slot].runs.push_back(
            {rep_of[slot]++, wall, r.stats.phase_ms, r.stats.entries_visited, r.stats.buffer_allocations});
    }
    finalize_report(report);
    return report;
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const BenchReport& r, std::ostream& out) {
    out << "mode,rep,wall_ms,phase_index_ms,phase_meta_ms,phase_event_ms,entries_visited,buffer_allocations\n";
    for (const auto& m : r.modes)
        for (const auto& s : m.runs)
            out << to_string(m.mode) << ',' << s.rep << ',' << num(s.wall_ms) << ',' << num(s.phase_ms.index_build_ms)
                << ',' << num(s.phase_ms.metadata_read_ms) << ',' << num(s.phase_ms.event_read_ms) << ','
                << s.entries_visited << ',' << s.buffer_allocations << '\n';
    out << '\n';
    out << "mode,median_ms,stddev_ms,q1_ms,q3_ms,min_ms,max_ms,speedup_pct\n";
    for (const auto& m : r.modes) {
        const auto& st = m.stats;
        out << to_string(m.mode) << ',' << num(st.median) << ',' << num(st.stddev) << ',' << num(st.five.q1) << ','
            << num(st.five.q3) << ',' << num(st.five.min) << ',' << num(st.five.max) << ',';
        if (m.mode == LoadMode::indexed && r.speedup_pct) out << num(*r.speedup_pct);
        out << '\n';
    }
}

nlohmann::json to_json(const BenchReport& r) {
    using nlohmann::json;
    json modes = json::array();
    for (const auto& m : r.modes) {
        json runs = json::array();
        for (const auto& s : m.runs)
            runs.push_back({{"rep", s.rep},
                            {"wall_ms", s.wall_ms},
                            {"phase_index_ms", s.phase_ms.index_build_ms},
                            {"phase_meta_ms", s.phase_ms.metadata_read_ms},
                            {"phase_event_ms", s.phase_ms.event_read_ms},
                            {"entries_visited", s.entries_visited},
                            {"buffer_allocations", s.buffer_allocations}});
        const auto& st = m.stats;
        modes.push_back({{"mode", std::string(to_string(m.mode))},
                         {"runs", runs},
                         {"summary",
                          {{"n", st.n},
                           {"median_ms", st.median},
                           {"stddev_ms", st.stddev},
                           {"min_ms", st.five.min},
                           {"q1_ms", st.five.q1},
                           {"q3_ms", st.five.q3},
                           {"max_ms", st.five.max},
                           {"histogram",
                            {{"lo_ms", st.histogram.lo}, {"hi_ms", st.histogram.hi}, {"counts", st.histogram.counts}}}}}});
    }
    json j = {{"file", r.file}, {"reps", r.reps}, {"warmup", r.warmup}, {"modes", modes}};
    j["speedup_pct"] = r.speedup_pct ? json(*r.speedup_pct) : json(nullptr);
    return j;
}

}  // namespace

std::size_t emit_report(const BenchReport& report, ReportFormat fmt, std::ostream& out) {
    std::ostringstream buf;
    if (fmt == ReportFormat::csv) write_csv(report, buf);
    else buf << to_json(report).dump(2) << '\n';
    const std::string text = buf.str();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("emit_report: sink failure");
    return text.size();
}

BenchReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    BenchReport r;
    r.file = j.at("file").get<std::string>();
    r.reps = j.at("reps").get<std::uint64_t>();
    r.warmup = j.at("warmup").get<std::uint64_t>();
    for (const auto& m : j.at("modes")) {
        ModeReport mr;
        mr.mode = parse_load_mode(m.at("mode").get<std::string>());
        for (const auto& s : m.at("runs")) {
            RunSample rs;
            rs.rep = s.at("rep").get<std::uint64_t>();
            rs.wall_ms = s.at("wall_ms").get<double>();
            rs.phase_ms = {s.at("phase_index_ms").get<double>(), s.at("phase_meta_ms").get<double>(),
                           s.at("phase_event_ms").get<double>()};
            rs.entries_visited = s.at("entries_visited").get<std::uint64_t>();
            rs.buffer_allocations = s.at("buffer_allocations").get<std::uint64_t>();
            mr.runs.push_back(rs);
        }
        const auto& sum = m.at("summary");
        auto& st = mr.stats;
        st.n = sum.at("n").get<std::size_t>();
        st.median = sum.at("median_ms").get<double>();
        st.stddev = sum.at("stddev_ms").get<double>();
        st.five = {sum.at("min_ms").get<double>(), sum.at("q1_ms").get<double>(), st.median,
                   sum.at("q3_ms").get<double>(), sum.at("max_ms").get<double>()};
        const auto& h = sum.at("histogram");
        st.histogram = {h.at("lo_ms").get<double>(), h.at("hi_ms").get<double>(),
                        h.at("counts").get<std::vector<std::uint64_t>>()};
        r.modes.push_back(std::move(mr));
    }
    if (!j.at("speedup_pct").is_null()) r.speedup_pct = j.at("speedup_pct").get<double>();
    return r;
}

}  // namespace mdload
