#include "pqc/controller.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "pqc/errors.hpp"

namespace pqc {

namespace {

void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw InputDomainError(std::string(what) + " must be finite");
    }
}

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw InputDomainError("state field '" + key + "': bad number '" + text + "'");
    }
    return value;
}

}  // namespace

void PidGains::validate() const {
    require_finite(kp, "gains.kp");
    require_finite(ki, "gains.ki");
    require_finite(kd, "gains.kd");
    if (kp < 0.0 || ki < 0.0 || kd < 0.0) {
        throw InputDomainError("PID gains must be non-negative");
    }
}

void ControlObjective::validate() const {
    require_finite(target_psnr, "objective.target_psnr");
    require_finite(lambda, "objective.lambda");
    if (target_psnr <= 0.0) {
        throw InputDomainError("objective.target_psnr must be positive");
    }
    if (lambda < 0.0 || lambda > 1.0) {
        throw InputDomainError("objective.lambda must lie in [0, 1]");
    }
}

void QpRange::validate() const {
    if (qp_min > qp_max) {
        throw InputDomainError("range.qp_min must not exceed range.qp_max");
    }
}

const char* to_string(FrameKind kind) {
    return kind == FrameKind::Intra ? "intra" : "inter";
}

ControllerState reset(ControllerState /*state*/, double qp_offset) {
    require_finite(qp_offset, "qp_offset");
    ControllerState fresh;
    fresh.qp_offset = qp_offset;
    return fresh;
}

double compute_error(double psnr, double prev_psnr, const ControlObjective& objective) {
    require_finite(psnr, "psnr");
    require_finite(prev_psnr, "prev_psnr");
    const double tracking = psnr - objective.target_psnr;
    const double fluctuation = psnr - prev_psnr;
    return objective.lambda * tracking + (1.0 - objective.lambda) * fluctuation;
}

double pid_step(double e_prev, ControllerState& state, const PidGains& gains) {
    require_finite(e_prev, "error");
    const double derivative = state.has_error ? e_prev - state.prev_error : 0.0;
    state.error_integral += e_prev;
    state.prev_derivative_src = state.has_error ? state.prev_error : e_prev;
    state.prev_error = e_prev;
    state.has_error = true;
    state.output_pending = true;
    return gains.kp * e_prev + gains.ki * state.error_integral - gains.kd * derivative;
}

int clamp_round_qp(double raw_qp, const QpRange& range) {
    require_finite(raw_qp, "raw QP");
    const double rounded = std::round(raw_qp);
    const double clamped = std::clamp(rounded, static_cast<double>(range.qp_min),
                                      static_cast<double>(range.qp_max));
    return static_cast<int>(clamped);
}

int policy_qp(double o, FrameKind kind, ControllerState& state, const QpRange& range,
              bool freeze_when_clamped) {
    if (!state.output_pending) {
        throw SequencingError("policy_qp called twice for frame " +
                              std::to_string(state.frame_index));
    }
    require_finite(o, "control output");

    const double next_single = state.o_integral + o;
    const double next_double = state.o_double_integral + next_single;
    const auto raw_of = [&](double single, double dbl) {
        return state.qp_offset + (kind == FrameKind::Inter ? single : dbl);
    };

    bool advance = true;
    if (freeze_when_clamped) {
        const double current = raw_of(state.o_integral, state.o_double_integral);
        const double candidate = raw_of(next_single, next_double);
        const bool pushes_up = current >= range.qp_max && candidate > current;
        const bool pushes_down = current <= range.qp_min && candidate < current;
        advance = !(pushes_up || pushes_down);
    }
    if (advance) {
        state.o_integral = next_single;
        state.o_double_integral = next_double;
    }
    state.output_pending = false;
    ++state.frame_index;
    return clamp_round_qp(raw_of(state.o_integral, state.o_double_integral), range);
}

FrameDecision controller_frame_detailed(std::optional<double> psnr_prev_frame, FrameKind kind,
                                        ControllerState& state, const PidGains& gains,
                                        const ControlObjective& objective,
                                        const QpRange& range, bool freeze_when_clamped) {
    if (state.frame_index == 0) {
        if (psnr_prev_frame) {
            throw SequencingError("frame 0 has no previous frame to measure");
        }
        ++state.frame_index;
        return {clamp_round_qp(state.qp_offset, range), 0.0, 0.0};
    }
    if (!psnr_prev_frame) {
        throw SequencingError("missing PSNR of frame " + std::to_string(state.frame_index - 1));
    }

    const double psnr = *psnr_prev_frame;
    // The first measured frame has no predecessor: its fluctuation term is 0.
    const double prev = state.has_psnr ? state.prev_psnr : psnr;
    const double e = compute_error(psnr, prev, objective);
    state.prev_psnr = psnr;
    state.has_psnr = true;

    const double o = pid_step(e, state, gains);
    return {policy_qp(o, kind, state, range, freeze_when_clamped), e, o};
}

int controller_frame(std::optional<double> psnr_prev_frame, FrameKind kind,
                     ControllerState& state, const PidGains& gains,
                     const ControlObjective& objective, const QpRange& range,
                     bool freeze_when_clamped) {
    return controller_frame_detailed(psnr_prev_frame, kind, state, gains, objective, range,
                                     freeze_when_clamped)
        .qp;
}

std::string to_key_value(const ControllerState& state) {
    std::ostringstream out;
    out << "prev_error=" << format_double(state.prev_error) << '\n'
        << "error_integral=" << format_double(state.error_integral) << '\n'
        << "prev_derivative_src=" << format_double(state.prev_derivative_src) << '\n'
        << "o_integral=" << format_double(state.o_integral) << '\n'
        << "o_double_integral=" << format_double(state.o_double_integral) << '\n'
        << "prev_psnr=" << format_double(state.prev_psnr) << '\n'
        << "qp_offset=" << format_double(state.qp_offset) << '\n'
        << "frame_index=" << state.frame_index << '\n'
        << "has_error=" << state.has_error << '\n'
        << "has_psnr=" << state.has_psnr << '\n'
        << "output_pending=" << state.output_pending << '\n';
    return out.str();
}

ControllerState state_from_key_value(const std::string& text) {
    std::map<std::string, std::string> fields;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputDomainError("state line without '=': " + line);
        }
        fields[line.substr(0, eq)] = line.substr(eq + 1);
    }

    ControllerState state;
    const std::pair<const char*, double*> reals[] = {
        {"prev_error", &state.prev_error},
        {"error_integral", &state.error_integral},
        {"prev_derivative_src", &state.prev_derivative_src},
        {"o_integral", &state.o_integral},
        {"o_double_integral", &state.o_double_integral},
        {"prev_psnr", &state.prev_psnr},
        {"qp_offset", &state.qp_offset},
    };
    const std::pair<const char*, bool*> flags[] = {
        {"has_error", &state.has_error},
        {"has_psnr", &state.has_psnr},
        {"output_pending", &state.output_pending},
    };

    const auto take = [&](const char* key) {
        auto it = fields.find(key);
        if (it == fields.end()) {
            throw InputDomainError(std::string("state field missing: ") + key);
        }
        std::string value = std::move(it->second);
        fields.erase(it);
        return value;
    };

    for (auto [key, slot] : reals) *slot = parse_double(key, take(key));
    for (auto [key, slot] : flags) {
        const std::string v = take(key);
        if (v != "0" && v != "1") {
            throw InputDomainError(std::string("state field '") + key + "' must be 0 or 1");
        }
        *slot = v == "1";
    }
    const double index = parse_double("frame_index", take("frame_index"));
    if (index < 0.0 || index != std::floor(index)) {
        throw InputDomainError("state field 'frame_index' must be a non-negative integer");
    }
    state.frame_index = static_cast<std::int64_t>(index);

    if (!fields.empty()) {
        throw InputDomainError("unknown state field: " + fields.begin()->first);
    }
    return state;
}

QualityController::QualityController(ControllerSettings settings)
    : settings_(std::move(settings)) {
    settings_.gains.validate();
    settings_.objective.validate();
    settings_.range.validate();
    state_ = pqc::reset(state_, settings_.qp_offset);
}

int QualityController::next_qp(std::optional<double> psnr_prev_frame, FrameKind kind) {
    const FrameDecision d = controller_frame_detailed(
        psnr_prev_frame, kind, state_, settings_.gains, settings_.objective, settings_.range,
        settings_.freeze_when_clamped);
    last_error_ = d.error;
    last_output_ = d.o;
    return d.qp;
}

void QualityController::reset() { reset(settings_.qp_offset); }

void QualityController::reset(double qp_offset) {
    settings_.qp_offset = qp_offset;
    state_ = pqc::reset(state_, qp_offset);
    last_output_ = 0.0;
    last_error_ = 0.0;
}

}  // namespace pqc
