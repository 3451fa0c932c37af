#include "mdload/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mdload/bench.hpp"
#include "mdload/container.hpp"
#include "mdload/index.hpp"
#include "mdload/loader.hpp"
#include "mdload/schema.hpp"

namespace mdload {

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) parts.push_back(item);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("invalid ") + what + ": '" + s + "'");
}

std::size_t parse_dim(const std::string& s) {
    for (std::size_t i = 0; i < MDWorkspace::n_dims; ++i)
        if (s == MDWorkspace::dim_names[i] || s == std::to_string(i)) return i;
    throw UsageError("unknown dimension '" + s + "' (use Qx, Qy, Qz, E or 0-3)");
}

SliceSpec parse_slice_spec(const std::string& dims, const std::string& bins, const std::string& range) {
    SliceSpec spec;
    auto d = split(dims, ',');
    if (d.size() != 2) throw UsageError("--dims expects X,Y");
    spec.dim_x = parse_dim(d[0]);
    spec.dim_y = parse_dim(d[1]);

    auto b = split(bins, 'x');
    if (b.size() != 2) throw UsageError("--bins expects NXxNY");
    const double nx = parse_double(b[0], "bin count"), ny = parse_double(b[1], "bin count");
    if (nx < 1 || ny < 1 || nx != std::floor(nx) || ny != std::floor(ny)) throw UsageError("bin counts must be >= 1");
    spec.nx = static_cast<std::size_t>(nx);
    spec.ny = static_cast<std::size_t>(ny);

    auto r = split(range, ',');
    if (r.size() != 2) throw UsageError("--range expects x0:x1,y0:y1");
    auto rx = split(r[0], ':'), ry = split(r[1], ':');
    if (rx.size() != 2 || ry.size() != 2) throw UsageError("--range expects x0:x1,y0:y1");
    spec.range_x = {parse_double(rx[0], "range"), parse_double(rx[1], "range")};
    spec.range_y = {parse_double(ry[0], "range"), parse_double(ry[1], "range")};
    return spec;
}

void write_grid_csv(const SliceGrid& g, std::ostream& out) {
    char buf[32];
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
            std::snprintf(buf, sizeof buf, "%.6g", g.at(ix, iy));
            if (iy) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

Node load_validated(const std::string& file) {
    Node tree = load_file(file);
    const auto violations = validate_schema(tree);
    if (!violations.empty()) {
        std::string msg = file + " does not match the workspace layout:";
        for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
        throw SchemaError(msg);
    }
    return tree;
}

void print_census(const EntryCensus& c, std::ostream& out) {
    out << "groups\t" << c.groups << '\n'
        << "datasets\t" << c.datasets << '\n'
        << "attributes\t" << c.attributes << '\n'
        << "total\t" << c.total << '\n';
    for (const auto& [cls, n] : c.per_class) out << "class\t" << cls << '\t' << n << '\n';
}

void print_load(const LoadResult& r, LoadMode mode, std::ostream& out) {
    const auto& s = r.stats;
    out << "mode\t" << to_string(mode) << '\n'
        << "experiments\t" << r.workspace.experiments.size() << '\n'
        << "events\t" << r.workspace.events.size() << '\n'
        << "entries_visited\t" << s.entries_visited << '\n'
        << "buffer_allocations\t" << s.buffer_allocations << '\n'
        << "phase_index_ms\t" << s.phase_ms.index_build_ms << '\n'
        << "phase_meta_ms\t" << s.phase_ms.metadata_read_ms << '\n'
        << "phase_event_ms\t" << s.phase_ms.event_read_ms << '\n'
        << "digest\t" << workspace_digest(r.workspace) << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Synthetic MD workspace files: generate, inspect, load, slice and benchmark"};
    app.name("mdload");
    app.require_subcommand(1);

    EnsembleConfig gen_cfg;
    std::string gen_out;
    auto* generate = app.add_subcommand("generate", "Write a synthetic ensemble file");
    generate->add_option("--experiments", gen_cfg.n_experiments, "Number of experiments")->required();
    generate->add_option("--logs", gen_cfg.logs_per_experiment, "Logs per experiment")->capture_default_str();
    generate->add_option("--events", gen_cfg.events_per_experiment, "Events per experiment")->capture_default_str();
    generate->add_option("--seed", gen_cfg.rng_seed, "RNG seed")->capture_default_str();
    generate->add_option("--out", gen_out, "Output file")->required();

    std::string inspect_file;
    bool show_index = false, show_census = false;
    auto* inspect = app.add_subcommand("inspect", "Validate and summarize a file");
    inspect->add_option("file", inspect_file)->required();
    inspect->add_flag("--index", show_index, "Dump the class index as class<TAB>path lines");
    inspect->add_flag("--census", show_census, "Print entry counts");

    std::string load_file_name, load_mode = "indexed";
    bool verify = false;
    auto* load_cmd = app.add_subcommand("load", "Load a file and report instrumentation");
    load_cmd->add_option("file", load_file_name)->required();
    load_cmd->add_option("--mode", load_mode, "naive or indexed")
        ->check(CLI::IsMember({"naive", "indexed"}))
        ->capture_default_str();
    load_cmd->add_flag("--verify", verify, "Run both loaders and compare workspace digests");

    std::string slice_file, slice_dims, slice_bins, slice_range, slice_out, slice_mode = "indexed";
    auto* slice = app.add_subcommand("slice", "Bin summed signal on two dimensions, emit CSV");
    slice->add_option("file", slice_file)->required();
    slice->add_option("--dims", slice_dims, "X,Y as names (Qx,Qy,Qz,E) or indices")->required();
    slice->add_option("--bins", slice_bins, "NXxNY, e.g. 50x40")->required();
    slice->add_option("--range", slice_range, "x0:x1,y0:y1")->required();
    slice->add_option("--out", slice_out, "'csv' for stdout, or a CSV file path")->required();
    slice->add_option("--mode", slice_mode)->check(CLI::IsMember({"naive", "indexed"}))->capture_default_str();

    BenchConfig bench_cfg;
    std::string bench_out, bench_format;
    std::vector<std::string> bench_modes{"naive", "indexed"};
    auto* bench = app.add_subcommand("bench", "Interleaved wall-clock benchmark of both loaders");
    bench->add_option("file", bench_cfg.file)->required();
    bench->add_option("--reps", bench_cfg.reps, "Timed rounds")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bench_cfg.warmup, "Discarded rounds")->capture_default_str();
    bench->add_option("--modes", bench_modes, "Subset of naive,indexed")
        ->delimiter(',')
        ->check(CLI::IsMember({"naive", "indexed"}));
    bench->add_option("--out", bench_out, "Report file")->required();
    bench->add_option("--format", bench_format, "csv or json (default from extension)")
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "mdload: " << e.what() << '\n' << "Run with --help for usage.\n";
        return exit_usage;
    }

    try {
        if (*generate) {
            const Node tree = generate_ensemble(gen_cfg);
            save_file(tree, gen_out);
            const auto census = count_entries(tree);
            out << "wrote " << gen_out << ": " << gen_cfg.n_experiments << " experiments, " << census.total
                << " entries\n";
            return exit_ok;
        }
        if (*inspect) {
            const Node tree = load_file(inspect_file);
            const auto violations = validate_schema(tree);
            for (const auto& v : violations) err << "violation\t" << v.path << '\t' << v.message << '\n';
            if (show_census) print_census(count_entries(tree), out);
            if (show_index) {
                const auto ix = build_index(tree);
                for (const auto& w : ix.warnings()) err << "warning\t" << w << '\n';
                dump_index(ix, out);
            }
            if (!show_census && !show_index)
                out << (violations.empty() ? "valid" : "invalid") << '\t' << count_entries(tree).total
                    << " entries\n";
            return violations.empty() ? exit_ok : exit_failure;
        }
        if (*load_cmd) {
            const Node tree = load_validated(load_file_name);
            const LoadMode mode = parse_load_mode(load_mode);
            const LoadResult r = load(tree, mode);
            print_load(r, mode, out);
            if (verify) {
                const LoadMode other = mode == LoadMode::naive ? LoadMode::indexed : LoadMode::naive;
                const LoadResult r2 = load(tree, other);
                const auto a = workspace_digest(r.workspace), b = workspace_digest(r2.workspace);
                if (a != b) {
                    err << "verify: digest mismatch between naive and indexed loaders\n"
                        << "  " << to_string(mode) << '\t' << a << '\n'
                        << "  " << to_string(other) << '\t' << b << '\n';
                    return exit_failure;
                }
                out << "verify\tok\n";
            }
            return exit_ok;
        }
        if (*slice) {
            const SliceSpec spec = parse_slice_spec(slice_dims, slice_bins, slice_range);
            const Node tree = load_validated(slice_file);
            const LoadResult r = load(tree, parse_load_mode(slice_mode));
            const SliceGrid grid = slice_2d(r.workspace, spec);
            if (slice_out == "csv" || slice_out == "-") {
                write_grid_csv(grid, out);
            } else {
                std::ofstream f(slice_out);
                if (!f) throw IoError("cannot open '" + slice_out + "'");
                write_grid_csv(grid, f);
                if (!f) throw IoError("error writing '" + slice_out + "'");
            }
            return exit_ok;
        }
        if (*bench) {
            bench_cfg.modes.clear();
            for (const auto& m : bench_modes) bench_cfg.modes.push_back(parse_load_mode(m));
            ReportFormat fmt = ReportFormat::csv;
            if (bench_format == "json" || (bench_format.empty() && bench_out.ends_with(".json")))
                fmt = ReportFormat::json;
            const BenchReport report = run_benchmark(bench_cfg);
            std::ofstream f(bench_out);
            if (!f) throw IoError("cannot open '" + bench_out + "'");
            emit_report(report, fmt, f);
            for (const auto& m : report.modes)
                out << to_string(m.mode) << "\tmedian_ms\t" << m.stats.median << "\tstddev_ms\t" << m.stats.stddev
                    << '\n';
            if (report.speedup_pct)
                out << "speedup_pct\t" << *report.speedup_pct << "\t(production-scale reference band: 19-23%)\n";
            return exit_ok;
        }
    } catch (const UsageError& e) {
        err << "mdload: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "mdload: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "mdload: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_usage;
}

}  // namespace mdload
