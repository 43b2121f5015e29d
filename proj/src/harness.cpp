#include "pqc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "pqc/errors.hpp"

#include <json.hpp>

namespace pqc {

namespace {

void append_fixed6(std::string& out, double value) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 6);
    out.append(buf, r.ptr);
}

PlantModel fresh_plant(const ExperimentConfig& config) {
    PlantModel plant = config.plant;
    plant.disturbance.seed = config.seed;
    return plant;
}

// e_t of the recorded PSNR series, same rule the controller applies.
void fill_errors(std::vector<FrameRecord>& records, const ControlObjective& objective) {
    for (std::size_t t = 0; t < records.size(); ++t) {
        const double prev = t == 0 ? records[t].psnr : records[t - 1].psnr;
        records[t].error = compute_error(records[t].psnr, prev, objective);
    }
}

}  // namespace

const char* to_string(RunMode mode) {
    return mode == RunMode::FixedQp ? "fixed" : "controlled";
}

void ExperimentConfig::validate() const {
    plant.validate();
    gains.validate();
    objective.validate();
    range.validate();
    if (!std::isfinite(qp_offset)) throw InputDomainError("qp_offset must be finite");
    if (n_frames < 1) throw InputDomainError("n_frames must be at least 1");
    if (schedule.intra_period < 0) throw InputDomainError("schedule.intra_period must be >= 0");
    if (impulse_frames < kMinImpulseFrames) {
        throw InputDomainError("sysid.frames must be at least 8");
    }
}

std::vector<FrameRecord> run_closed_loop(const ExperimentConfig& config) {
    if (config.mode != RunMode::Controlled) {
        throw InputDomainError("run_closed_loop needs mode=controlled");
    }
    config.validate();

    PlantModel plant = fresh_plant(config);
    ControllerState state = reset(ControllerState{}, config.qp_offset);

    std::vector<FrameRecord> records;
    records.reserve(static_cast<std::size_t>(config.n_frames));
    std::optional<double> last_psnr;
    for (std::int64_t t = 0; t < config.n_frames; ++t) {
        const FrameDecision decision = controller_frame_detailed(
            last_psnr, config.schedule.kind_at(t), state, config.gains, config.objective,
            config.range, config.freeze_when_clamped);
        const FrameOutcome outcome = step_plant(plant, decision.qp, t);
        records.push_back({t, decision.qp, outcome.psnr, outcome.bits, 0.0, decision.o});
        last_psnr = outcome.psnr;
    }
    fill_errors(records, config.objective);
    return records;
}

std::vector<FrameRecord> run_fixed_qp(const ExperimentConfig& config) {
    if (config.mode != RunMode::FixedQp) {
        throw InputDomainError("run_fixed_qp needs mode=fixed");
    }
    config.validate();

    PlantModel plant = fresh_plant(config);
    const int qp = clamp_round_qp(config.qp_offset, config.range);

    std::vector<FrameRecord> records;
    records.reserve(static_cast<std::size_t>(config.n_frames));
    for (std::int64_t t = 0; t < config.n_frames; ++t) {
        const FrameOutcome outcome = step_plant(plant, qp, t);
        records.push_back({t, qp, outcome.psnr, outcome.bits, 0.0, 0.0});
    }
    fill_errors(records, config.objective);
    return records;
}

std::vector<FrameRecord> run_experiment(const ExperimentConfig& config) {
    return config.mode == RunMode::Controlled ? run_closed_loop(config) : run_fixed_qp(config);
}

std::vector<std::vector<FrameRecord>> run_batch(std::span<const ExperimentConfig> configs,
                                                unsigned max_threads) {
    std::vector<std::vector<FrameRecord>> results(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    if (max_threads == 0) max_threads = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = std::min<std::size_t>(max_threads, configs.size());

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                results[i] = run_experiment(configs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

MetricsReport compute_metrics(std::span<const FrameRecord> records,
                              const ControlObjective& objective) {
    if (records.empty()) {
        throw DegenerateInputError("metrics need at least one frame");
    }
    const double n = static_cast<double>(records.size());
    double psnr_sum = 0.0;
    double bits_sum = 0.0;
    for (const FrameRecord& r : records) {
        psnr_sum += r.psnr;
        bits_sum += r.bits;
    }
    const double psnr_mean = psnr_sum / n;
    const double bits_mean = bits_sum / n;

    double psnr_ss = 0.0;
    double bits_ss = 0.0;
    for (const FrameRecord& r : records) {
        psnr_ss += (r.psnr - psnr_mean) * (r.psnr - psnr_mean);
        bits_ss += (r.bits - bits_mean) * (r.bits - bits_mean);
    }

    MetricsReport m;
    m.avg_psnr = psnr_mean;
    m.control_error_db = std::abs(psnr_mean - objective.target_psnr);
    m.control_error_pct = 100.0 * m.control_error_db / objective.target_psnr;
    m.quality_fluc_db = std::sqrt(psnr_ss / n);
    m.bitrate_mean = bits_mean;
    m.bit_fluc = std::sqrt(bits_ss / n);
    return m;
}

ObjectiveTerms objective_terms(std::span<const FrameRecord> records,
                               const ControlObjective& objective) {
    if (records.empty()) {
        throw DegenerateInputError("objective terms need at least one frame");
    }
    ObjectiveTerms terms;
    double diff_ss = 0.0;
    for (std::size_t t = 0; t < records.size(); ++t) {
        terms.mean_tracking += records[t].psnr - objective.target_psnr;
        if (t > 0) {
            const double d = records[t].psnr - records[t - 1].psnr;
            diff_ss += d * d;
        }
    }
    terms.mean_tracking /= static_cast<double>(records.size());
    if (records.size() > 1) {
        terms.rms_fluctuation = std::sqrt(diff_ss / static_cast<double>(records.size() - 1));
    }
    return terms;
}

Comparison compare(const MetricsReport& controlled, const MetricsReport& baseline) {
    Comparison c;
    c.rows = {{"PQC", controlled}, {"Fixed QP", baseline}};
    const double base = baseline.quality_fluc_db;
    const double ctrl = controlled.quality_fluc_db;
    if (base == ctrl) {
        c.fluc_reduction_pct = 0.0;
    } else if (base != 0.0) {
        c.fluc_reduction_pct = 100.0 * (base - ctrl) / base;
    }
    return c;
}

std::string format_comparison(const Comparison& comparison) {
    const std::vector<std::string> heads = {
        "Method",          "Avg. PSNR (dB)",     "Control Error (dB)",   "Control Error (%)",
        "Quality Fluc. (dB)", "Bit Rate (bits/frame)", "Bit Fluc. (bits/frame)"};

    std::vector<std::vector<std::string>> cells;
    for (const ComparisonRow& row : comparison.rows) {
        const MetricsReport& m = row.metrics;
        auto num = [](double v, int precision) {
            std::ostringstream s;
            s << std::fixed << std::setprecision(precision) << v;
            return s.str();
        };
        cells.push_back({row.method, num(m.avg_psnr, 4), num(m.control_error_db, 4),
                         num(m.control_error_pct, 2), num(m.quality_fluc_db, 4),
                         num(m.bitrate_mean, 1), num(m.bit_fluc, 1)});
    }

    std::vector<std::size_t> width(heads.size());
    for (std::size_t c = 0; c < heads.size(); ++c) {
        width[c] = heads[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == 0) {
                out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            } else {
                out << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
            }
        }
        out << '\n';
    };
    emit(heads);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& row : cells) emit(row);

    out << "Quality fluctuation reduction: ";
    if (comparison.fluc_reduction_pct) {
        out << std::fixed << std::setprecision(1) << *comparison.fluc_reduction_pct << "%\n";
    } else {
        out << "n/a\n";
    }
    return out.str();
}

void write_trace_csv(std::ostream& out, std::span<const FrameRecord> records) {
    std::string text = "frame,qp,psnr_db,bits,error,o\n";
    for (const FrameRecord& r : records) {
        text += std::to_string(r.frame);
        text += ',';
        text += std::to_string(r.qp);
        for (double v : {r.psnr, r.bits, r.error, r.o}) {
            text += ',';
            append_fixed6(text, v);
        }
        text += '\n';
    }
    out << text;
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["avg_psnr"] = report.avg_psnr;
    j["control_error_db"] = report.control_error_db;
    j["control_error_pct"] = report.control_error_pct;
    j["quality_fluc_db"] = report.quality_fluc_db;
    j["bitrate_mean"] = report.bitrate_mean;
    j["bit_fluc"] = report.bit_fluc;
    return j.dump(2) + "\n";
}

}  // namespace pqc
