#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pqc/controller.hpp"
#include "pqc/plant.hpp"
#include "pqc/sysid.hpp"

namespace pqc {

enum class RunMode { Controlled, FixedQp };

const char* to_string(RunMode mode);

/// Frame-type schedule. intra_period 0 means all inter frames; N > 0 puts an
/// intra frame at every multiple of N (1 means all intra).
struct FrameSchedule {
    std::int64_t intra_period = 0;

    FrameKind kind_at(std::int64_t frame) const {
        return intra_period > 0 && frame % intra_period == 0 ? FrameKind::Intra
                                                             : FrameKind::Inter;
    }
    bool operator==(const FrameSchedule&) const = default;
};

struct ExperimentConfig {
    PlantModel plant;
    PidGains gains;
    ControlObjective objective;
    QpRange range;
    double qp_offset = 32.0;
    FrameSchedule schedule;
    std::int64_t n_frames = 300;
    std::uint64_t seed = 0;  // drives the SeededNoise disturbance
    RunMode mode = RunMode::Controlled;
    bool freeze_when_clamped = false;

    // Used by the identify subcommand.
    std::size_t impulse_frames = 64;
    OrderEstimatorOptions sysid;

    // Source of plant.trace when the plant is trace-driven.
    std::string trace_path;

    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

struct FrameRecord {
    std::int64_t frame = 0;
    int qp = 0;
    double psnr = 0.0;
    double bits = 0.0;
    double error = 0.0;  // e_t of this frame
    double o = 0.0;      // control output that produced this frame's QP

    bool operator==(const FrameRecord&) const = default;
};

struct MetricsReport {
    double avg_psnr = 0.0;
    double control_error_db = 0.0;
    double control_error_pct = 0.0;
    double quality_fluc_db = 0.0;
    double bitrate_mean = 0.0;  // bits per frame
    double bit_fluc = 0.0;      // bits per frame

    bool operator==(const MetricsReport&) const = default;
};

/// The two parts of the error signal, reported separately.
struct ObjectiveTerms {
    double mean_tracking = 0.0;      // mean of (psnr - T)
    double rms_fluctuation = 0.0;    // RMS of (psnr_t - psnr_{t-1}), 0 for one frame
};

std::vector<FrameRecord> run_closed_loop(const ExperimentConfig& config);
std::vector<FrameRecord> run_fixed_qp(const ExperimentConfig& config);
/// Dispatches on config.mode.
std::vector<FrameRecord> run_experiment(const ExperimentConfig& config);

/// Runs independent experiments on up to `max_threads` threads. Results are in
/// the order of `configs`.
std::vector<std::vector<FrameRecord>> run_batch(std::span<const ExperimentConfig> configs,
                                                unsigned max_threads = 0);

MetricsReport compute_metrics(std::span<const FrameRecord> records,
                              const ControlObjective& objective);
ObjectiveTerms objective_terms(std::span<const FrameRecord> records,
                               const ControlObjective& objective);

struct ComparisonRow {
    std::string method;
    MetricsReport metrics;
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    /// 100 * (baseline - controlled) / baseline quality fluctuation. Empty when
    /// the baseline is flat and the controlled run is not.
    std::optional<double> fluc_reduction_pct;
};

Comparison compare(const MetricsReport& controlled, const MetricsReport& baseline);

/// Aligned text table: Method, Avg. PSNR, Control Error (dB, %), Quality Fluc.,
/// Bit Rate, Bit Fluc.
std::string format_comparison(const Comparison& comparison);

/// `frame,qp,psnr_db,bits,error,o`, reals with six decimals.
void write_trace_csv(std::ostream& out, std::span<const FrameRecord> records);
/// JSON object with the six MetricsReport fields.
std::string metrics_to_json(const MetricsReport& report);

}  // namespace pqc
