#include "pqc/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pqc/errors.hpp"
#include "pqc/harness.hpp"
#include "pqc/sysid.hpp"

namespace pqc::cli {

namespace fs = std::filesystem;

namespace {

// I/O failure while emitting results.
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> sets;
    std::vector<std::string> grid;
    std::string seed;
    std::string mode;
};

std::vector<Override> collect_overrides(const Options& opts) {
    std::vector<Override> overrides;
    for (const std::string& s : opts.sets) overrides.push_back(parse_override(s));
    if (!opts.seed.empty()) overrides.emplace_back("seed", opts.seed);
    if (!opts.mode.empty()) overrides.emplace_back("mode", opts.mode);
    return overrides;
}

ExperimentConfig load(const Options& opts, const std::vector<Override>& extra = {}) {
    std::vector<Override> overrides = collect_overrides(opts);
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    if (opts.config_path.empty()) return parse_config_text("", overrides);
    return parse_config(opts.config_path, overrides);
}

fs::path prepare_out(const Options& opts) {
    const fs::path dir(opts.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw OutputError("cannot create output directory '" + dir.string() + "'");
    }
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw OutputError("cannot open '" + path.string() + "' for writing");
    file << content;
    file.flush();
    if (!file) throw OutputError("failed writing '" + path.string() + "'");
}

std::string trace_text(const std::vector<FrameRecord>& records) {
    std::ostringstream s;
    write_trace_csv(s, records);
    return s.str();
}

std::string fixed6(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
    return std::string(buf, r.ptr);
}

int simulate_cmd(const Options& opts, std::ostream& out) {
    const ExperimentConfig config = load(opts);
    const auto records = run_experiment(config);
    const MetricsReport metrics = compute_metrics(records, config.objective);
    const ObjectiveTerms terms = objective_terms(records, config.objective);

    const fs::path dir = prepare_out(opts);
    write_file(dir / "trace.csv", trace_text(records));
    write_file(dir / "metrics.json", metrics_to_json(metrics));

    out << "mode: " << to_string(config.mode) << ", frames: " << records.size() << '\n'
        << "avg_psnr " << fixed6(metrics.avg_psnr) << " dB, control_error "
        << fixed6(metrics.control_error_db) << " dB, quality_fluc "
        << fixed6(metrics.quality_fluc_db) << " dB\n"
        << "tracking term mean " << fixed6(terms.mean_tracking) << " dB, fluctuation term rms "
        << fixed6(terms.rms_fluctuation) << " dB\n"
        << "wrote " << (dir / "trace.csv").string() << ", " << (dir / "metrics.json").string()
        << '\n';
    return kExitOk;
}

int identify_cmd(const Options& opts, std::ostream& out) {
    const ExperimentConfig config = load(opts);
    const ImpulseExperiment exp = run_impulse(config.plant, config.range, config.impulse_frames);
    const OrderEstimate est = estimate_order(exp.response, config.sysid);

    std::ostringstream report;
    report << "order: " << est.order << '\n'
           << "pole: " << (est.pole ? fixed6(*est.pole) : std::string("none")) << '\n'
           << "residual: " << fixed6(est.fit_residual) << '\n'
           << "frames: " << exp.response.size() << '\n'
           << "qp_min: " << config.range.qp_min << '\n'
           << "qp_max: " << config.range.qp_max << '\n'
           << "settled_psnr_db: " << fixed6(exp.settled_psnr) << '\n';
    std::ostringstream csv;
    csv << "frame,error_db\n";
    for (std::size_t t = 0; t < exp.response.size(); ++t) {
        csv << t << ',' << fixed6(exp.response[t]) << '\n';
    }

    const fs::path dir = prepare_out(opts);
    write_file(dir / "identify.txt", report.str() + "\n" + csv.str());
    write_file(dir / "impulse_response.csv", csv.str());
    out << report.str();
    return kExitOk;
}

int compare_cmd(const Options& opts, std::ostream& out) {
    ExperimentConfig controlled = load(opts);
    controlled.mode = RunMode::Controlled;
    ExperimentConfig baseline = controlled;
    baseline.mode = RunMode::FixedQp;

    const auto ctrl_records = run_closed_loop(controlled);
    const auto base_records = run_fixed_qp(baseline);
    const MetricsReport ctrl = compute_metrics(ctrl_records, controlled.objective);
    const MetricsReport base = compute_metrics(base_records, baseline.objective);
    const std::string table = format_comparison(compare(ctrl, base));

    const fs::path dir = prepare_out(opts);
    write_file(dir / "trace_controlled.csv", trace_text(ctrl_records));
    write_file(dir / "trace_fixed.csv", trace_text(base_records));
    write_file(dir / "metrics_controlled.json", metrics_to_json(ctrl));
    write_file(dir / "metrics_fixed.json", metrics_to_json(base));
    write_file(dir / "comparison.txt", table);
    out << table;
    return kExitOk;
}

int sweep_cmd(const Options& opts, std::ostream& out) {
    const std::vector<GridAxis> axes = parse_grid(opts.grid);
    if (axes.empty()) {
        throw CLI::ValidationError("--grid", "sweep needs at least one --grid key=v1,v2,...");
    }
    const auto points = expand_grid(axes);

    std::vector<ExperimentConfig> configs;
    configs.reserve(points.size());
    for (const auto& point : points) configs.push_back(load(opts, point));
    const auto results = run_batch(configs);

    std::ostringstream csv;
    for (const GridAxis& axis : axes) csv << axis.key << ',';
    csv << "avg_psnr,control_error_db,control_error_pct,quality_fluc_db,bitrate_mean,bit_fluc\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (const auto& [key, value] : points[i]) csv << value << ',';
        const MetricsReport m = compute_metrics(results[i], configs[i].objective);
        csv << fixed6(m.avg_psnr) << ',' << fixed6(m.control_error_db) << ','
            << fixed6(m.control_error_pct) << ',' << fixed6(m.quality_fluc_db) << ','
            << fixed6(m.bitrate_mean) << ',' << fixed6(m.bit_fluc) << '\n';
    }

    const fs::path dir = prepare_out(opts);
    write_file(dir / "sweep.csv", csv.str());
    out << points.size() << " grid points, wrote " << (dir / "sweep.csv").string() << '\n';
    return kExitOk;
}

}  // namespace

std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs) {
    std::vector<GridAxis> axes;
    for (const std::string& spec : specs) {
        const auto [key, list] = parse_override(spec);
        if (list.empty()) {
            throw ConfigError(ConfigError::Kind::Parse, key, key + ": grid has no values");
        }
        auto axis = std::find_if(axes.begin(), axes.end(),
                                 [&](const GridAxis& a) { return a.key == key; });
        if (axis == axes.end()) {
            axes.push_back({key, {}});
            axis = axes.end() - 1;
        }

        std::stringstream ss(list);
        std::string raw;
        while (std::getline(ss, raw, ',')) {
            const auto [k, value] = parse_override(key + "=" + raw);
            ExperimentConfig probe;
            apply_setting(probe, key, value);
            const std::string canonical = config_value(probe, key);
            if (std::find(axis->values.begin(), axis->values.end(), canonical) ==
                axis->values.end()) {
                axis->values.push_back(canonical);
            }
        }
    }
    return axes;
}

std::vector<std::vector<Override>> expand_grid(const std::vector<GridAxis>& axes) {
    std::vector<std::vector<Override>> points;
    if (axes.empty()) return points;
    points.emplace_back();
    for (const GridAxis& axis : axes) {
        std::vector<std::vector<Override>> next;
        for (const auto& partial : points) {
            for (const std::string& value : axis.values) {
                auto point = partial;
                point.emplace_back(axis.key, value);
                next.push_back(std::move(point));
            }
        }
        points = std::move(next);
    }
    return points;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"PID-based quality control simulator", "pqc"};
    app.require_subcommand(1);

    Options opts;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "Config file (dotted key = value lines)");
        sub->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--set", opts.sets, "Override a config key: key=value (repeatable)");
        sub->add_option("--seed", opts.seed, "Disturbance seed");
        sub->add_option("--mode", opts.mode, "controlled or fixed")
            ->check(CLI::IsMember({"controlled", "fixed"}));
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Run one experiment, write trace and metrics");
    CLI::App* identify = app.add_subcommand("identify", "Impulse experiment and order estimate");
    CLI::App* compare = app.add_subcommand("compare", "Controlled vs fixed-QP comparison table");
    CLI::App* sweep = app.add_subcommand("sweep", "Metrics over a parameter grid");
    for (CLI::App* sub : {simulate, identify, compare, sweep}) add_common(sub);
    sweep->add_option("--grid", opts.grid, "Grid axis: key=v1,v2,... (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "pqc: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return simulate_cmd(opts, out);
        if (identify->parsed()) return identify_cmd(opts, out);
        if (compare->parsed()) return compare_cmd(opts, out);
        return sweep_cmd(opts, out);
    } catch (const ConfigError& e) {
        err << "pqc: config " << to_string(e.kind());
        if (!e.key().empty()) err << " [" << e.key() << "]";
        err << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const CLI::Error& e) {
        err << "pqc: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "pqc: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace pqc::cli
