#include "mdload/schema.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <stdexcept>

namespace mdload {

namespace {

constexpr std::array<const char*, 20> instrument_names = {
    "source_sample_distance", "sample_detector_distance", "incident_energy", "fermi_frequency",
    "t0_frequency",           "fermi_phase",              "t0_phase",        "moderator_temperature",
    "beam_width",             "beam_height",              "slit_width",      "slit_height",
    "detector_pressure",      "detector_efficiency",      "pixel_count",     "bank_count",
    "tof_min",                "tof_max",                  "proton_charge",   "run_duration"};

constexpr std::array<const char*, 17> sample_names = {
    "lattice_a", "lattice_b", "lattice_c", "alpha", "beta",        "gamma",     "u_x",    "u_y",  "u_z",
    "v_x",       "v_y",       "v_z",       "mass",  "temperature", "thickness", "height", "width"};

constexpr std::array<const char*, 12> log_base_names = {
    "gd_prtn_chrg", "proton_charge", "run_start",  "SampleTemp", "omega", "phi",
    "chi",          "Ei",            "s1_width",   "s1_height",  "s2_width", "s2_height"};

constexpr std::array<const char*, 8> box_names = {
    "box_type",           "depth",           "extents",   "inverse_volume", "box_children",
    "box_signal_errorsq", "box_event_index", "controller"};

std::string numbered(const char* stem, std::uint64_t i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%03llu", stem, static_cast<unsigned long long>(i));
    return buf;
}

std::string pick_name(std::span<const char* const> base, const char* stem, std::uint64_t i) {
    return i < base.size() ? std::string(base[i]) : numbered(stem, i);
}

// Platform-independent uniform draw in [0, 1).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
};

template <class T>
std::vector<std::byte> le(std::initializer_list<T> values) {
    return to_le_bytes(std::span<const T>(values.begin(), values.size()));
}

template <class T>
std::vector<std::byte> le(const std::vector<T>& values) {
    return to_le_bytes(std::span<const T>(values));
}

Node scalar_f64(std::string name, double v) { return Node::dataset(std::move(name), DType::f64, {}, le({v})); }

Node classed_group(std::string name, const char* nx_class) {
    Node g = Node::group(std::move(name));
    g.set_attribute("NX_class", std::string(nx_class));
    return g;
}

Node make_experiment(const EnsembleConfig& cfg, std::uint64_t k, Rng& rng) {
    Node exp = classed_group("experiment" + std::to_string(k), "NXgroup");

    Node& instrument = exp.add_child(classed_group("instrument", "NXinstrument"));
    for (std::uint64_t i = 0; i < cfg.instrument_datasets; ++i)
        instrument.add_child(scalar_f64(pick_name(instrument_names, "param", i), rng.uniform(0.0, 100.0)));

    Node& sample = exp.add_child(classed_group("sample", "NXdata"));
    for (std::uint64_t i = 0; i < cfg.sample_entries; ++i)
        sample.add_child(scalar_f64(pick_name(sample_names, "property", i), rng.uniform(0.5, 20.0)));

    // 2 degree rotation offsets between orientations.
    Node& gonio = exp.add_child(classed_group("goniometer", "NXpositioner"));
    gonio.add_child(scalar_f64("angle", 2.0 * static_cast<double>(k)));
    gonio.add_child(Node::dataset("axis", DType::f64, {3}, le({0.0, 1.0, 0.0})));
    for (std::uint64_t i = 2; i < cfg.goniometer_datasets; ++i)
        gonio.add_child(scalar_f64(numbered("offset", i), rng.uniform(-0.5, 0.5)));

    Node& logs = exp.add_child(classed_group("logs", "NXgroup"));
    for (std::uint64_t i = 0; i < cfg.logs_per_experiment; ++i) {
        Node log = classed_group(pick_name(log_base_names, "sensor", i), "NXlog");
        const std::uint64_t len = 1 + i % 8;
        std::vector<double> values(len), times(len);
        double t = 0.0;
        for (std::uint64_t j = 0; j < len; ++j) {
            values[j] = rng.uniform(-1e3, 1e3);
            t += rng.uniform(0.5, 60.0);
            times[j] = t;
        }
        log.add_child(Node::dataset("value", DType::f64, {len}, le(values)));
        log.add_child(Node::dataset("time", DType::f64, {len}, le(times)));
        logs.add_child(std::move(log));
    }
    return exp;
}

}  // namespace

std::string layout::experiment_path(std::uint64_t k) {
    return std::string(workspace) + "/experiment" + std::to_string(k);
}

void validate_config(const EnsembleConfig& cfg) {
    if (cfg.goniometer_datasets < 2)
        throw std::invalid_argument("goniometer_datasets must be >= 2 (angle and axis)");
    if (!(cfg.signal_scale > 0.0) || !std::isfinite(cfg.signal_scale))
        throw std::invalid_argument("signal_scale must be positive and finite");
    if (cfg.n_experiments > (1u << 24))
        throw std::invalid_argument("n_experiments must stay below 2^24 (run index stored as f32)");
}

std::uint64_t entries_per_experiment(const EnsembleConfig& cfg) noexcept {
    return 2                              // experiment group + NX_class
           + 2 + cfg.instrument_datasets  // instrument
           + 2 + cfg.sample_entries       // sample
           + 2 + cfg.goniometer_datasets  // goniometer
           + 2                            // logs group + NX_class
           + 4 * cfg.logs_per_experiment; // NXlog group + NX_class + value + time
}

Node generate_ensemble(const EnsembleConfig& cfg) {
    validate_config(cfg);
    Rng rng(cfg.rng_seed);

    Node root;
    Node& ws = root.add_child(classed_group(layout::workspace_name, "NXentry"));
    ws.add_child(Node::dataset("coordinate_system", DType::i64, {}, le<std::int64_t>({2})));
    ws.add_child(Node::dataset("dimensions", DType::i64, {4}, le<std::int64_t>({200, 200, 200, 150})));

    const std::uint64_t n_events = cfg.n_experiments * cfg.events_per_experiment;
    std::vector<float> events(n_events * layout::event_columns);
    double total_signal = 0.0, total_error = 0.0;
    for (std::uint64_t e = 0; e < n_events; ++e) {
        float* row = events.data() + e * layout::event_columns;
        const auto signal = static_cast<float>(cfg.signal_scale * rng.uniform(0.1, 10.0));
        row[layout::signal] = signal;
        row[layout::error_sq] = signal;
        row[layout::run_index] = static_cast<float>(e / cfg.events_per_experiment);
        row[layout::detector_id] = static_cast<float>(rng.below(117'760));
        row[layout::qx] = static_cast<float>(rng.uniform(layout::q_lo, layout::q_hi));
        row[layout::qy] = static_cast<float>(rng.uniform(layout::q_lo, layout::q_hi));
        row[layout::qz] = static_cast<float>(rng.uniform(layout::q_lo, layout::q_hi));
        row[layout::energy] = static_cast<float>(rng.uniform(layout::e_lo, layout::e_hi));
        total_signal += signal;
        total_error += signal;
    }

    // A single root box holding every event; contents are carried opaquely.
    Node& box = ws.add_child(classed_group("box_structure", "NXdata"));
    const auto n_ev = static_cast<std::int64_t>(n_events);
    box.add_child(Node::dataset(box_names[0], DType::i32, {1}, le<std::int32_t>({1})));
    box.add_child(Node::dataset(box_names[1], DType::i32, {1}, le<std::int32_t>({0})));
    box.add_child(Node::dataset(box_names[2], DType::f64, {1, 8},
                                le({layout::q_lo, layout::q_hi, layout::q_lo, layout::q_hi, layout::q_lo,
                                    layout::q_hi, layout::e_lo, layout::e_hi})));
    const double volume = std::pow(layout::q_hi - layout::q_lo, 3) * (layout::e_hi - layout::e_lo);
    box.add_child(Node::dataset(box_names[3], DType::f64, {1}, le({1.0 / volume})));
    box.add_child(Node::dataset(box_names[4], DType::i32, {1, 2}, le<std::int32_t>({0, 0})));
    box.add_child(Node::dataset(box_names[5], DType::f64, {1, 2}, le({total_signal, total_error})));
    box.add_child(Node::dataset(box_names[6], DType::i64, {1, 2}, le<std::int64_t>({0, n_ev})));
    const std::string controller = R"({"max_depth":20,"split_into":[5,5,5,5],"split_threshold":1000})";
    const auto* cb = reinterpret_cast<const std::byte*>(controller.data());
    box.add_child(Node::dataset(box_names[7], DType::bytes, {controller.size()},
                                std::vector<std::byte>(cb, cb + controller.size())));

    Node& ev_group = ws.add_child(classed_group("event_data", "NXdata"));
    ev_group.add_child(Node::dataset("event_data", DType::f32, {n_events, layout::event_columns}, le(events)));

    Node& process = ws.add_child(classed_group("process", "NXgroup"));
    for (std::uint64_t i = 0; i < layout::process_datasets; ++i) {
        const std::string text = "step " + std::to_string(i) + ": SaveMD";
        const auto* tb = reinterpret_cast<const std::byte*>(text.data());
        process.add_child(Node::dataset(numbered("history", i), DType::bytes, {text.size()},
                                        std::vector<std::byte>(tb, tb + text.size())));
    }

    for (std::uint64_t k = 0; k < cfg.n_experiments; ++k) ws.add_child(make_experiment(cfg, k, rng));
    return root;
}

namespace {

void census_into(const Node& n, EntryCensus& c) {
    c.attributes += n.attributes().size();
    for (const auto& child : n.children()) {
        if (child.is_group()) {
            ++c.groups;
            std::string cls = "NXgroup";
            if (const auto* v = child.find_attribute("NX_class"))
                if (const auto* s = std::get_if<std::string>(v)) cls = *s;
            ++c.per_class[cls];
            census_into(child, c);
        } else {
            ++c.datasets;
            ++c.per_class["SDS"];
            c.attributes += child.attributes().size();
        }
    }
}

}  // namespace

EntryCensus count_entries(const Node& root) {
    EntryCensus c;
    census_into(root, c);
    c.total = c.groups + c.datasets + c.attributes;
    return c;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

class Validator {
public:
    std::vector<Violation> out;

    void add(std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); }

    const Node* group(const Node& parent, const std::string& parent_path, std::string_view name,
                      std::string_view expected_class) {
        const std::string path = join_path(parent_path, name);
        const Node* g = parent.find_child(name);
        if (!g) {
            add(path, "missing group");
            return nullptr;
        }
        if (!g->is_group()) {
            add(path, "expected a group, found a dataset");
            return nullptr;
        }
        const AttributeValue* cls = g->find_attribute("NX_class");
        const std::string* text = cls ? std::get_if<std::string>(cls) : nullptr;
        if (!text)
            add(path, "missing NX_class, expected '" + std::string(expected_class) + "'");
        else if (*text != expected_class)
            add(path, "NX_class is '" + *text + "', expected '" + std::string(expected_class) + "'");
        return g;
    }

    const Node* dataset(const Node& parent, const std::string& parent_path, std::string_view name) {
        const std::string path = join_path(parent_path, name);
        const Node* d = parent.find_child(name);
        if (!d) {
            add(path, "missing dataset");
            return nullptr;
        }
        if (!d->is_dataset()) {
            add(path, "expected a dataset, found a group");
            return nullptr;
        }
        return d;
    }

    void expect_shape(const Node* d, const std::string& path, DType dtype, std::vector<std::uint64_t> dims) {
        if (!d) return;
        if (d->dtype() != dtype || d->dims() != dims)
            add(path, "unexpected dtype or dims (found " + std::string(to_string(d->dtype())) + ")");
    }

    void check_all_datasets_plain(const Node& n, const std::string& path) {
        for (const auto& c : n.children()) {
            const std::string p = join_path(path, c.name());
            if (c.is_dataset()) {
                if (!c.attributes().empty()) add(p, "datasets must not carry attributes");
            } else {
                check_all_datasets_plain(c, p);
            }
        }
    }

    void experiment(const Node& exp, const std::string& path) {
        const auto* cls = exp.find_attribute("NX_class");
        if (!cls || *cls != AttributeValue(std::string("NXgroup"))) add(path, "NX_class must be 'NXgroup'");
        group(exp, path, "instrument", "NXinstrument");
        group(exp, path, "sample", "NXdata");
        if (const Node* g = group(exp, path, "goniometer", "NXpositioner")) {
            const std::string gp = path + "/goniometer";
            expect_shape(dataset(*g, gp, "angle"), gp + "/angle", DType::f64, {});
            expect_shape(dataset(*g, gp, "axis"), gp + "/axis", DType::f64, {3});
        }
        if (const Node* logs = group(exp, path, "logs", "NXgroup")) {
            const std::string lp = path + "/logs";
            for (const auto& log : logs->children()) {
                const std::string p = join_path(lp, log.name());
                if (!log.is_group()) {
                    add(p, "log entry must be an NXlog group");
                    continue;
                }
                group(*logs, lp, log.name(), "NXlog");
                const Node* v = dataset(log, p, "value");
                const Node* t = dataset(log, p, "time");
                if (v && t) {
                    if (v->dtype() != DType::f64 || t->dtype() != DType::f64 || v->dims().size() != 1 ||
                        v->dims() != t->dims())
                        add(p, "log value/time must be equal-length 1-D f64 series");
                }
            }
        }
    }
};

// Parses "experiment<k>" with k in canonical decimal form.
bool parse_experiment_index(std::string_view name, std::uint64_t& k) {
    constexpr std::string_view stem = "experiment";
    if (!name.starts_with(stem) || name.size() == stem.size()) return false;
    auto digits = name.substr(stem.size());
    if (digits.size() > 1 && digits.front() == '0') return false;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    return ec == std::errc{} && ptr == digits.data() + digits.size();
}

}  // namespace

std::vector<Violation> validate_schema(const Node& root) {
    Validator v;
    const Node* ws = v.group(root, "/", layout::workspace_name, "NXentry");
    if (!ws) return std::move(v.out);
    const std::string wp = layout::workspace;

    v.expect_shape(v.dataset(*ws, wp, "coordinate_system"), layout::coordinate_system, DType::i64, {});
    v.expect_shape(v.dataset(*ws, wp, "dimensions"), layout::dimensions, DType::i64, {4});
    if (const Node* box = v.group(*ws, wp, "box_structure", "NXdata")) {
        if (box->children().size() != layout::box_datasets)
            v.add(layout::box_structure, "expected " + std::to_string(layout::box_datasets) + " datasets");
    }
    if (const Node* ev = v.group(*ws, wp, "event_data", "NXdata")) {
        const Node* d = v.dataset(*ev, wp + "/event_data", "event_data");
        if (d && (d->dtype() != DType::f32 || d->dims().size() != 2 || d->dims()[1] != layout::event_columns))
            v.add(layout::event_data, "event_data must be f32 with 8 columns");
    }
    v.group(*ws, wp, "process", "NXgroup");

    std::set<std::uint64_t> indices;
    for (const auto& c : ws->children()) {
        std::uint64_t k = 0;
        if (!parse_experiment_index(c.name(), k)) continue;
        const std::string p = join_path(wp, c.name());
        if (!c.is_group()) {
            v.add(p, "experiment entry must be a group");
            continue;
        }
        indices.insert(k);
        v.experiment(c, p);
    }
    if (!indices.empty() && (*indices.begin() != 0 || *indices.rbegin() != indices.size() - 1))
        v.add(wp, "non-contiguous experiment indices");

    v.check_all_datasets_plain(*ws, wp);
    return std::move(v.out);
}

}  // namespace mdload
