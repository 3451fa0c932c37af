#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "mdload/loader.hpp"
#include "mdload/schema.hpp"
#include "test_support.hpp"

using namespace mdload;

namespace {

SliceSpec full_domain(std::size_t dx, std::size_t dy, std::size_t nx, std::size_t ny) {
    auto range = [](std::size_t d) {
        return d == 3 ? std::pair{layout::e_lo, layout::e_hi} : std::pair{layout::q_lo, layout::q_hi};
    };
    return SliceSpec{dx, dy, nx, ny, range(dx), range(dy)};
}

double signal_sum(const std::vector<Event>& ev) {
    double s = 0;
    for (const auto& e : ev) s += e.signal;
    return s;
}

}  // namespace

TEST(LoadMode, ParseAndPrint) {
    EXPECT_EQ(parse_load_mode("naive"), LoadMode::naive);
    EXPECT_EQ(parse_load_mode("indexed"), LoadMode::indexed);
    EXPECT_EQ(to_string(LoadMode::indexed), "indexed");
    EXPECT_THROW(parse_load_mode("fast"), std::invalid_argument);
}

TEST(Loaders, NoExperimentsStillLoadsEvents) {
    const Node& t = testkit::cached_ensemble(0);
    for (auto mode : {LoadMode::naive, LoadMode::indexed}) {
        const auto r = load(t, mode);
        EXPECT_TRUE(r.workspace.experiments.empty());
        EXPECT_TRUE(r.workspace.events.empty());
        EXPECT_EQ(r.workspace.dimension_bins, (std::vector<std::int64_t>{200, 200, 200, 150}));
        EXPECT_EQ(r.workspace.box_structure.entries.size(), 8u);
    }
    auto cfg = testkit::default_config(0);
    const auto r = load_indexed(generate_ensemble(cfg));
    EXPECT_EQ(r.stats.entries_visited, fixed_entries);
}

TEST(Loaders, TenExperimentsWithAllLogs) {
    const Node& t = testkit::cached_ensemble(10);
    for (auto mode : {LoadMode::naive, LoadMode::indexed}) {
        const auto r = load(t, mode);
        ASSERT_EQ(r.workspace.experiments.size(), 10u);
        EXPECT_EQ(r.workspace.events.size(), 100'000u);
        for (std::size_t k = 0; k < 10; ++k) {
            const auto& e = r.workspace.experiments[k];
            EXPECT_EQ(e.index, k);
            EXPECT_EQ(e.logs.size(), 262u);
            EXPECT_EQ(e.instrument.size(), 20u);
            EXPECT_EQ(e.sample.size(), 17u);
            EXPECT_EQ(e.goniometer.size(), 2u);
            EXPECT_DOUBLE_EQ(e.scalar(e.goniometer, "angle"), 2.0 * static_cast<double>(k));
            for (const auto& log : e.logs) EXPECT_EQ(e.series(log).size(), e.log_times(log).size());
        }
        for (const auto& ev : r.workspace.events) ASSERT_LT(ev.run_index, 10u);
    }
}

TEST(Loaders, LoadedValuesMatchFileContents) {
    const Node& t = testkit::cached_ensemble(2);
    const auto r = load_indexed(t);
    const auto& e = r.workspace.experiments[1];
    const SeriesRef* log = e.find_log("gd_prtn_chrg");
    ASSERT_NE(log, nullptr);
    const auto raw = read_dataset(t, "/MDEventWorkspace/experiment1/logs/gd_prtn_chrg/value");
    ASSERT_EQ(raw.dims.size(), 1u);
    ASSERT_EQ(e.series(*log).size(), raw.dims[0]);
    for (std::size_t i = 0; i < raw.dims[0]; ++i)
        EXPECT_EQ(e.series(*log)[i], load_le<double>(raw.payload.data() + 8 * i));
}

TEST(Loaders, DigestsAgree) {
    for (std::uint64_t n : {1, 10, 40}) {
        const Node& t = testkit::cached_ensemble(n);
        EXPECT_EQ(workspace_digest(load_naive(t).workspace), workspace_digest(load_indexed(t).workspace))
            << "n=" << n;
    }
}

TEST(Loaders, DigestStableAndSensitive) {
    const Node& t = testkit::cached_ensemble(2);
    const auto a = load_indexed(t);
    EXPECT_EQ(workspace_digest(a.workspace), workspace_digest(load_indexed(t).workspace));

    MDWorkspace ws = a.workspace;
    const SeriesRef* log = ws.experiments[1].find_log("gd_prtn_chrg");
    ASSERT_NE(log, nullptr);
    ws.experiments[1].values[log->offset] += 1.0;
    EXPECT_NE(workspace_digest(ws), workspace_digest(a.workspace));

    ws = a.workspace;
    ws.events.back().coords[3] = std::nextafter(ws.events.back().coords[3], 1e9f);
    EXPECT_NE(workspace_digest(ws), workspace_digest(a.workspace));
}

TEST(Loaders, FileDecodePathMatchesInMemory) {
    const auto path = std::filesystem::path(::testing::TempDir()) / "loader_roundtrip.nxp";
    const Node& t = testkit::cached_ensemble(2);
    save_file(t, path.string());
    EXPECT_EQ(workspace_digest(load_workspace(path.string(), LoadMode::naive).workspace),
              workspace_digest(load_indexed(t).workspace));
    std::filesystem::remove(path);
}

TEST(Loaders, MissingWorkspaceRejected) {
    EXPECT_THROW(load_naive(Node{}), PathError);
    EXPECT_THROW(load_indexed(Node{}), PathError);
}

TEST(Loaders, BadRunIndexRejected) {
    auto cfg = testkit::default_config(1);
    cfg.events_per_experiment = 4;
    Node t = generate_ensemble(cfg);
    Node& ev = *t.find_child("MDEventWorkspace")->find_child("event_data")->find_child("event_data");
    store_le<float>(ev.mutable_payload().data() + 8, 3.0f);
    EXPECT_THROW(load_naive(t), SchemaError);
    EXPECT_THROW(load_indexed(t), SchemaError);
}

// ---------------------------------------------------------------------------
// Counters

TEST(Counters, IndexedVisitsEachEntryOnce) {
    for (std::uint64_t n : {1, 2, 10, 40}) {
        const Node& t = testkit::cached_ensemble(n);
        const auto total = count_entries(t).total;
        const auto r = load_indexed(t);
        EXPECT_EQ(r.stats.entries_visited, total) << "n=" << n;
        EXPECT_LE(r.stats.entries_visited, total + 10 * n);
    }
}

TEST(Counters, NaiveVisitsGrowSuperlinearly) {
    std::vector<std::uint64_t> visits;
    for (std::uint64_t n : {1, 2, 5, 10, 40}) visits.push_back(load_naive(testkit::cached_ensemble(n)).stats.entries_visited);
    for (std::size_t i = 1; i < visits.size(); ++i) EXPECT_GT(visits[i], visits[i - 1]);
    // Per-experiment cost grows with n.
    EXPECT_GT(visits[3] / 10.0, visits[1] / 2.0);
    EXPECT_GT(static_cast<double>(visits[4]) / static_cast<double>(visits[3]), 4.0);
}

TEST(Counters, IndexedAllocatesLess) {
    for (std::uint64_t n : {1, 2, 10}) {
        const Node& t = testkit::cached_ensemble(n);
        const auto naive = load_naive(t).stats;
        const auto indexed = load_indexed(t).stats;
        EXPECT_LT(indexed.buffer_allocations, naive.buffer_allocations) << "n=" << n;
        // One arena per experiment plus dimensions, box bytes and events.
        EXPECT_LE(indexed.buffer_allocations, n + 3) << "n=" << n;
        EXPECT_GE(naive.buffer_allocations, n * 1097 / 2) << "n=" << n;
    }
}

TEST(Counters, PhaseTimesNonNegative) {
    for (auto mode : {LoadMode::naive, LoadMode::indexed}) {
        const auto s = load(testkit::cached_ensemble(2), mode).stats;
        EXPECT_GE(s.phase_ms.index_build_ms, 0);
        EXPECT_GE(s.phase_ms.metadata_read_ms, 0);
        EXPECT_GE(s.phase_ms.event_read_ms, 0);
        EXPECT_GT(s.bytes_read, 0u);
    }
}

// ---------------------------------------------------------------------------
// Slicing

TEST(Slice, SingleEventAtCenter) {
    Event e;
    e.signal = 5.0f;
    e.coords = {0.5f, 0.5f, 0, 0};
    const std::vector<Event> ev{e};
    const auto g = slice_2d(ev, SliceSpec{0, 1, 1, 1, {0, 1}, {0, 1}});
    ASSERT_EQ(g.cells.size(), 1u);
    EXPECT_EQ(g.at(0, 0), 5.0);
}

TEST(Slice, EdgesHalfOpenLastClosed) {
    auto at = [](float x, float y) {
        Event e;
        e.signal = 1.0f;
        e.coords = {x, y, 0, 0};
        return e;
    };
    const std::vector<Event> ev{at(0, 0), at(1, 0), at(2, 2), at(-0.001f, 1), at(2.001f, 1)};
    const auto g = slice_2d(ev, SliceSpec{0, 1, 2, 2, {0, 2}, {0, 2}});
    EXPECT_EQ(g.at(0, 0), 1.0);
    EXPECT_EQ(g.at(1, 0), 1.0);
    EXPECT_EQ(g.at(1, 1), 1.0);
    EXPECT_EQ(g.at(0, 1), 0.0);
    EXPECT_EQ(g.total(), 3.0);
}

TEST(Slice, BinEdgeEndpoints) {
    EXPECT_EQ(bin_edge(-5, 5, 10, 0), -5.0);
    EXPECT_EQ(bin_edge(-5, 5, 10, 10), 5.0);
    EXPECT_EQ(bin_edge(-5, 5, 10, 5), 0.0);
}

TEST(Slice, MatchesBruteForceOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ev = testkit::random_events(seed, 1000);
        testkit::TreeGen pick(seed + 1000);
        SliceSpec s;
        s.dim_x = static_cast<std::size_t>(pick.uniform(0, 3));
        do s.dim_y = static_cast<std::size_t>(pick.uniform(0, 3));
        while (s.dim_y == s.dim_x);
        s.nx = static_cast<std::size_t>(pick.uniform(1, 13));
        s.ny = static_cast<std::size_t>(pick.uniform(1, 13));
        s.range_x = {-5, 5};
        s.range_y = {-4.0 + pick.uniform(0, 2), 3};
        const auto g = slice_2d(ev, s);
        EXPECT_EQ(g.cells, testkit::brute_force_slice(ev, s)) << "seed " << seed;
    }
}

TEST(Slice, FullDomainConservesSignal) {
    const Node& t = testkit::cached_ensemble(2);
    const auto ws = load_indexed(t).workspace;
    for (auto [dx, dy] : {std::pair{0, 1}, {2, 3}, {3, 0}}) {
        const auto g = slice_2d(ws, full_domain(dx, dy, 40, 30));
        EXPECT_EQ(g.total(), signal_sum(ws.events)) << dx << "," << dy;
    }
}

TEST(Slice, LoadersGiveBitwiseIdenticalGrids) {
    for (std::uint64_t n : {1, 10}) {
        const Node& t = testkit::cached_ensemble(n);
        const auto a = slice_2d(load_naive(t).workspace, full_domain(0, 3, 50, 40));
        const auto b = slice_2d(load_indexed(t).workspace, full_domain(0, 3, 50, 40));
        ASSERT_EQ(a.cells.size(), b.cells.size());
        EXPECT_EQ(std::memcmp(a.cells.data(), b.cells.data(), a.cells.size() * sizeof(double)), 0);
    }
}

TEST(Slice, InvalidArgumentsRejected) {
    const std::vector<Event> ev;
    EXPECT_THROW(slice_2d(ev, SliceSpec{0, 0, 1, 1, {0, 1}, {0, 1}}), std::invalid_argument);
    EXPECT_THROW(slice_2d(ev, SliceSpec{0, 4, 1, 1, {0, 1}, {0, 1}}), std::invalid_argument);
    EXPECT_THROW(slice_2d(ev, SliceSpec{0, 1, 0, 1, {0, 1}, {0, 1}}), std::invalid_argument);
    EXPECT_THROW(slice_2d(ev, SliceSpec{0, 1, 1, 1, {1, 1}, {0, 1}}), std::invalid_argument);
    EXPECT_THROW(slice_2d(ev, SliceSpec{0, 1, 1, 1, {0, 1}, {2, -1}}), std::invalid_argument);
}
