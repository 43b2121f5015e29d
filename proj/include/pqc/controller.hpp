#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace pqc {

/// Weights of the proportional, integral and derivative terms. All must be >= 0.
struct PidGains {
    double kp = 2.12;
    double ki = 0.10;
    double kd = 0.60;

    void validate() const;
    bool operator==(const PidGains&) const = default;
};

/// Target quality and the weight between tracking it and keeping quality smooth.
///
/// `lambda` = 1 regulates PSNR onto the target only; `lambda` = 0 only
/// penalises frame-to-frame PSNR change.
struct ControlObjective {
    double target_psnr = 37.2;
    double lambda = 0.8;

    void validate() const;
    bool operator==(const ControlObjective&) const = default;
};

struct QpRange {
    int qp_min = 0;
    int qp_max = 51;

    void validate() const;
    bool contains(int qp) const { return qp >= qp_min && qp <= qp_max; }
    bool operator==(const QpRange&) const = default;
};

enum class FrameKind { Inter, Intra };

const char* to_string(FrameKind kind);

/// Incremental accumulators of the controller. Size is fixed; nothing grows
/// with the frame index.
struct ControllerState {
    double prev_error = 0.0;           // e_{t-1}, valid once has_error is set
    double error_integral = 0.0;       // running sum of e
    double prev_derivative_src = 0.0;  // e_{t-2}
    double o_integral = 0.0;           // running sum of o (inter policy)
    double o_double_integral = 0.0;    // running sum of o_integral (intra policy)
    double prev_psnr = 0.0;            // D_{t-1}, valid once has_psnr is set
    double qp_offset = 32.0;           // QP anchor, the integration constant
    std::int64_t frame_index = 0;

    bool has_error = false;
    bool has_psnr = false;
    bool output_pending = false;  // pid_step ran, policy_qp not yet applied

    bool operator==(const ControllerState&) const = default;
};

/// Clears every accumulator and sets the QP anchor.
ControllerState reset(ControllerState state, double qp_offset);

/// Per-frame error: lambda * (psnr - T) + (1 - lambda) * (psnr - prev_psnr).
double compute_error(double psnr, double prev_psnr, const ControlObjective& objective);

/// Feeds e_{t-1} into the PID law and returns the control variable o_t:
///
///   o_t = Kp e_{t-1} + Ki sum_{tau <= t-1} e_tau - Kd (e_{t-1} - e_{t-2})
///
/// The derivative term is subtracted. For the first error the derivative is 0.
double pid_step(double e_prev, ControllerState& state, const PidGains& gains);

/// Nearest integer (ties away from zero), clamped into `range`.
int clamp_round_qp(double raw_qp, const QpRange& range);

/// Advances the o accumulators once and maps them to a QP.
///
/// Inter frames use the single sum of o, intra frames the double sum. With
/// `freeze_when_clamped` set, the accumulators hold while the raw QP is
/// already at or beyond a range limit and o pushes it further out.
int policy_qp(double o, FrameKind kind, ControllerState& state, const QpRange& range,
              bool freeze_when_clamped = false);

struct FrameDecision {
    int qp = 0;
    double error = 0.0;  // e_{t-1} fed to the PID law (0 on frame 0)
    double o = 0.0;      // PID output (0 on frame 0)
};

/// Full per-frame step. `psnr_prev_frame` is the measured PSNR of frame t-1;
/// it must be empty for frame 0 and present afterwards.
int controller_frame(std::optional<double> psnr_prev_frame, FrameKind kind,
                     ControllerState& state, const PidGains& gains,
                     const ControlObjective& objective, const QpRange& range,
                     bool freeze_when_clamped = false);

/// controller_frame, also reporting the error and control output it used.
FrameDecision controller_frame_detailed(std::optional<double> psnr_prev_frame, FrameKind kind,
                                        ControllerState& state, const PidGains& gains,
                                        const ControlObjective& objective,
                                        const QpRange& range, bool freeze_when_clamped = false);

/// Plain `key=value` lines, one per ControllerState field.
std::string to_key_value(const ControllerState& state);
ControllerState state_from_key_value(const std::string& text);

struct ControllerSettings {
    PidGains gains;
    ControlObjective objective;
    QpRange range;
    double qp_offset = 32.0;
    bool freeze_when_clamped = false;

    bool operator==(const ControllerSettings&) const = default;
};

/// One controller per video stream. Not internally synchronised.
class QualityController {
public:
    explicit QualityController(ControllerSettings settings = {});

    /// QP for the next frame given the PSNR measured on the previous one.
    int next_qp(std::optional<double> psnr_prev_frame, FrameKind kind = FrameKind::Inter);

    void reset();
    void reset(double qp_offset);

    const ControllerState& state() const { return state_; }
    const ControllerSettings& settings() const { return settings_; }
    /// Control variable emitted for the latest frame (0 for frame 0).
    double last_output() const { return last_output_; }
    /// Error signal fed into the PID law for the latest frame.
    double last_error() const { return last_error_; }

private:
    ControllerSettings settings_;
    ControllerState state_;
    double last_output_ = 0.0;
    double last_error_ = 0.0;
};

}  // namespace pqc
