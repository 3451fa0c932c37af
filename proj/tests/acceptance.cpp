// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mdload/bench.hpp"
#include "mdload/index.hpp"
#include "mdload/loader.hpp"
#include "mdload/schema.hpp"
#include "test_support.hpp"

using namespace mdload;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

bool check(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (limit_s > 0 && secs >= limit_s) o.require(false, "runtime " + std::to_string(secs) + " s over limit");
    std::printf("%s criterion %d (%s) [%.2f s]%s%s\n", o.pass ? "PASS" : "FAIL", id, title, secs,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
    return o.pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

const std::vector<std::uint64_t> ensemble_sizes{0, 1, 2, 5, 10, 40};

std::vector<std::string_view> filter_prefix(std::span<const std::string> paths, std::string_view prefix) {
    std::string dir(prefix);
    if (dir.empty() || dir.back() != '/') dir.push_back('/');
    std::vector<std::string_view> out;
    for (const auto& p : paths)
        if (p == prefix || std::string_view(p).starts_with(dir)) out.emplace_back(p);
    return out;
}

Outcome entry_counts() {
    Outcome o;
    for (std::uint64_t n : ensemble_sizes) {
        const Node& t = testkit::cached_ensemble(n);
        const auto total = count_entries(t).total;
        const auto oracle = testkit::brute_force_entry_count(t);
        o.require(total == 30 + 1097 * n && total == oracle,
                  "n=" + std::to_string(n) + " total " + std::to_string(total) + " oracle " + std::to_string(oracle));
    }
    o.require(count_entries(testkit::cached_ensemble(10)).total == 11'000, "n=10 total != 11000");
    o.require(count_entries(testkit::cached_ensemble(40)).total == 43'910, "n=40 total != 43910");
    if (o.pass) o.detail = "n=10 -> 11000, n=40 -> 43910, 30 + 1097n exact for n in {0,1,2,5,10,40}";
    return o;
}

Outcome index_oracle() {
    Outcome o;
    auto same = [](const MetadataIndex& ix, const Node& t) {
        std::map<std::string, std::vector<std::string>> got;
        for (const auto& [cls, paths] : ix.classes()) got[cls] = paths;
        return got == testkit::brute_force_index(t);
    };
    std::vector<Node> trees;
    for (std::uint64_t seed = 0; seed < 50; ++seed) trees.push_back(testkit::TreeGen(seed).tree());
    std::vector<MetadataIndex> ixs;
    for (std::size_t i = 0; i < trees.size(); ++i) {
        ixs.push_back(build_index(trees[i]));
        o.require(same(ixs.back(), trees[i]), "random tree " + std::to_string(i) + " differs");
    }
    for (std::uint64_t n : ensemble_sizes) {
        ixs.push_back(build_index(testkit::cached_ensemble(n)));
        o.require(same(ixs.back(), testkit::cached_ensemble(n)), "ensemble n=" + std::to_string(n) + " differs");
    }

    std::mt19937_64 rng(2022);
    int mismatches = 0;
    for (int q = 0; q < 200; ++q) {
        const auto& ix = ixs[rng() % ixs.size()];
        std::vector<std::string> classes{"NXmissing"};
        for (const auto& [cls, paths] : ix.classes()) classes.push_back(cls);
        const auto& cls = classes[rng() % classes.size()];
        const auto paths = ix.lookup_class(cls);
        std::string prefix = "/";
        if (!paths.empty()) {
            // An ancestor of a random path of the class, or a truncated string.
            const std::string& p = paths[rng() % paths.size()];
            std::vector<std::size_t> cuts;
            for (std::size_t i = 1; i <= p.size(); ++i)
                if (i == p.size() || p[i] == '/') cuts.push_back(i);
            prefix = p.substr(0, rng() % 4 == 0 ? 1 + rng() % p.size() : cuts[rng() % cuts.size()]);
        }
        if (ix.lookup_prefix(cls, prefix) != filter_prefix(paths, prefix)) ++mismatches;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " of 200 prefix queries differ");
    if (o.pass) o.detail = "50 random trees + 6 ensembles match; 200/200 prefix queries match";
    return o;
}

SliceSpec full_domain() { return SliceSpec{0, 3, 50, 40, {layout::q_lo, layout::q_hi}, {layout::e_lo, layout::e_hi}}; }

Outcome loader_equivalence() {
    Outcome o;
    for (std::uint64_t n : {1, 10, 40}) {
        const Node& t = testkit::cached_ensemble(n);
        const auto a = load_naive(t), b = load_indexed(t);
        o.require(workspace_digest(a.workspace) == workspace_digest(b.workspace), "digest n=" + std::to_string(n));
        const auto ga = slice_2d(a.workspace, full_domain()), gb = slice_2d(b.workspace, full_domain());
        o.require(ga.cells.size() == gb.cells.size() &&
                      std::memcmp(ga.cells.data(), gb.cells.data(), ga.cells.size() * sizeof(double)) == 0,
                  "slice grid n=" + std::to_string(n));
    }
    if (o.pass) o.detail = "digests and full-domain 50x40 grids identical for n in {1,10,40}";
    return o;
}

Outcome counter_separation() {
    Outcome o;
    const auto v10 = load_naive(testkit::cached_ensemble(10)).stats.entries_visited;
    const auto v40 = load_naive(testkit::cached_ensemble(40)).stats.entries_visited;
    const double ratio = static_cast<double>(v40) / static_cast<double>(v10);
    o.require(ratio > 4.0, fmt("naive visit ratio %.3f <= 4", ratio));
    for (std::uint64_t n : ensemble_sizes) {
        const Node& t = testkit::cached_ensemble(n);
        const auto total = count_entries(t).total;
        const auto ix = load_indexed(t).stats;
        o.require(ix.entries_visited <= total + 10 * n, "indexed visits over bound at n=" + std::to_string(n));
        if (n >= 1) {
            const auto nv = load_naive(t).stats;
            o.require(ix.buffer_allocations < nv.buffer_allocations, "allocations not lower at n=" + std::to_string(n));
        }
    }
    const auto a40 = load_indexed(testkit::cached_ensemble(40)).stats.buffer_allocations;
    const auto n40 = load_naive(testkit::cached_ensemble(40)).stats.buffer_allocations;
    if (o.pass)
        o.detail = fmt("naive visits n=40/n=10 = %.2f; indexed visits <= total + 10n; allocations n=40: indexed %.0f vs naive %.0f",
                       ratio, static_cast<double>(a40), static_cast<double>(n40));
    return o;
}

Outcome speedup_rows() {
    struct Row {
        double base, improved;
        std::vector<double> printed;
    };
    const std::vector<Row> rows{{13.3, 10.6, {20.3}},
                                {50.7, 39.6, {21.9}},
                                {101.0, 81.5, {19.2, 19.3}},
                                {216.0, 166.0, {23.1}},
                                {357.0, 285.0, {20.3}}};
    Outcome o;
    std::string all;
    for (const auto& r : rows) {
        const double got = speedup_pct(r.base, r.improved);
        double best = 1e9;
        for (double p : r.printed) best = std::min(best, std::abs(got - p));
        const std::string row = fmt("(%g,%g)->%.3f", r.base, r.improved, got);
        all += (all.empty() ? "" : ", ") + row;
        o.require(best <= 0.1, row + fmt(" is %.3f pp from printed %.1f", best, r.printed.front()));
    }
    o.detail = o.pass ? all : all + "; " + o.detail;
    return o;
}

Outcome wall_clock() {
    Outcome o;
    const auto path = (std::filesystem::temp_directory_path() /
                       ("mdload_accept_" + std::to_string(::getpid()) + ".nxp"))
                          .string();
    auto cfg = testkit::default_config(40);
    cfg.events_per_experiment = 1000;
    save_file(generate_ensemble(cfg), path);

    BenchConfig bc;
    bc.file = path;
    bc.reps = 25;
    bc.warmup = 3;
    const auto report = run_benchmark(bc);
    std::filesystem::remove(path);

    const double naive = report.find(LoadMode::naive)->stats.median;
    const double indexed = report.find(LoadMode::indexed)->stats.median;
    const double s = report.speedup_pct.value_or(0);
    o.require(indexed < naive, "median(indexed) >= median(naive)");
    o.require(s > 10.0, fmt("speedup %.2f%% <= 10%%", s));
    o.detail = fmt("median naive %.2f ms, indexed %.2f ms, speedup %.2f%%", naive, indexed, s) +
               " (production-scale reference band 19-23%)";
    return o;
}

Outcome codec_roundtrip() {
    Outcome o;
    auto round = [&](const Node& t, const std::string& label) {
        const auto bytes = encode_tree(t);
        const Node back = decode_tree(bytes);
        o.require(back == t, label + " round trip");
        o.require(canonical_digest(back) == canonical_digest(t), label + " digest");
        o.require(encode_tree(back) == bytes, label + " re-encode");
    };
    for (std::uint64_t seed = 0; seed < 50; ++seed) round(testkit::TreeGen(seed).tree(), "tree " + std::to_string(seed));
    for (std::uint64_t n : ensemble_sizes) round(testkit::cached_ensemble(n), "ensemble n=" + std::to_string(n));

    auto expect_kind = [&](std::span<const std::byte> bytes, ParseError::Kind kind, const std::string& label) {
        try {
            (void)decode_tree(bytes);
            o.require(false, label + " decoded");
        } catch (const ParseError& e) {
            o.require(e.kind() == kind, label + " wrong parse error kind");
        }
    };
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto bytes = encode_tree(testkit::TreeGen(seed).tree());
        auto bad = bytes;
        bad[0] = std::byte{'X'};
        expect_kind(bad, ParseError::Kind::bad_magic, "corrupt magic");
        for (std::size_t cut = 4; cut < bytes.size(); ++cut)
            expect_kind(std::span(bytes).first(cut), ParseError::Kind::truncated, "truncated at " + std::to_string(cut));
    }
    if (o.pass) o.detail = "50 random trees + 6 ensembles; corrupt magic and every truncation rejected";
    return o;
}

Outcome slice_oracle() {
    Outcome o;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ev = testkit::random_events(seed, 1000);
        const SliceSpec s{seed % 4, (seed + 1 + seed / 4 % 3) % 4, 1 + seed % 9, 1 + seed * 5 % 11, {-5, 5}, {-4, 3}};
        o.require(slice_2d(ev, s).cells == testkit::brute_force_slice(ev, s), "seed " + std::to_string(seed));
    }
    const auto ws = load_indexed(testkit::cached_ensemble(10)).workspace;
    double total = 0;
    for (const auto& e : ws.events) total += e.signal;
    const double grid = slice_2d(ws, full_domain()).total();
    o.require(grid == total, fmt("grid total %.17g != signal total %.17g", grid, total));
    if (o.pass) o.detail = fmt("20 event sets match oracle; full-domain total %.6f equals signal sum", total);
    return o;
}

}  // namespace

int main() {
    int failed = 0;
    failed += !check(1, "entry-count scaling", 30, entry_counts);
    failed += !check(2, "index oracle", 60, index_oracle);
    failed += !check(3, "loader equivalence", 120, loader_equivalence);
    failed += !check(4, "counter separation", 0, counter_separation);
    failed += !check(5, "speedup arithmetic", 0, speedup_rows);
    failed += !check(6, "wall-clock improvement", 300, wall_clock);
    failed += !check(7, "codec round-trip", 30, codec_roundtrip);
    failed += !check(8, "slice oracle", 0, slice_oracle);
    std::printf("%d of 8 criteria passed\n", 8 - failed);
    return failed == 0 ? 0 : 1;
}
