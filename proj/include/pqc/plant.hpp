#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pqc {

enum class DisturbanceKind { None, Constant, Step, Sinusoid, SeededNoise };

/// Additive PSNR disturbance standing in for changing frame content.
struct DisturbanceSpec {
    DisturbanceKind kind = DisturbanceKind::None;
    double amplitude = 0.0;      // dB
    double period = 30.0;        // frames, Sinusoid
    std::int64_t step_frame = 0; // first frame of the Step
    std::uint64_t seed = 0;      // SeededNoise

    void validate() const;
    bool operator==(const DisturbanceSpec&) const = default;
};

/// Disturbance in dB at a frame. SeededNoise is uniform on [-amplitude, amplitude]
/// and a pure function of (seed, frame_index).
double disturbance_at(const DisturbanceSpec& spec, std::int64_t frame_index);

struct FrameOutcome {
    double psnr = 0.0;
    double bits = 0.0;
    bool operator==(const FrameOutcome&) const = default;
};

struct TraceRow {
    std::int64_t frame = 0;
    int qp = 0;
    double psnr_db = 0.0;
    double bits = 0.0;
};

/// Per-frame PSNR/bits measured at a few QPs, as read from a
/// `frame,qp,psnr_db,bits` CSV. Frames are contiguous from 0 and rows sorted
/// by (frame, qp).
class TraceTable {
public:
    static TraceTable from_rows(std::vector<TraceRow> rows);
    static TraceTable parse(std::istream& in);
    static TraceTable load(const std::string& path);

    void write(std::ostream& out) const;

    /// Linear interpolation between the bracketing tabulated QPs of `frame`.
    FrameOutcome lookup(std::int64_t frame, int qp) const;

    std::int64_t frame_count() const { return static_cast<std::int64_t>(frames_.size()); }
    const std::vector<TraceRow>& rows() const { return rows_; }

    bool operator==(const TraceTable& other) const;

private:
    std::vector<TraceRow> rows_;
    // frames_[f] = [begin, end) into rows_
    std::vector<std::pair<std::size_t, std::size_t>> frames_;
};

enum class PlantKind { ZeroOrder, FirstOrder, TraceDriven };

/// Stand-in for the encoder's QP -> quality map.
///
/// ZeroOrder:   psnr = c0 - c1 * qp + w
/// FirstOrder:  psnr = alpha * prev_psnr + (1 - alpha) * (c0 - c1 * qp) + w
/// TraceDriven: psnr/bits from the table (+ w)
///
/// When `prev_psnr` is unset the first-order plant starts at rest at the
/// steady value of its first QP.
struct PlantModel {
    PlantKind kind = PlantKind::FirstOrder;
    double psnr_intercept = 50.0;  // c0, dB
    double psnr_slope = 0.4;       // c1, dB per QP, > 0
    double inertia = 0.5;          // alpha in [0, 1)
    double rate_ref_bits = 100000.0;
    int rate_ref_qp = 32;
    DisturbanceSpec disturbance;
    std::shared_ptr<const TraceTable> trace;
    std::optional<double> prev_psnr;

    void validate() const;
    /// Compares trace tables by content, not by pointer.
    bool operator==(const PlantModel& other) const;
    /// Noiseless steady-state PSNR of the analytic core at `qp`.
    double steady_psnr(int qp) const { return psnr_intercept - psnr_slope * qp; }
};

/// Bits per frame: rate_ref_bits * 2^(-(qp - rate_ref_qp) / 6).
double rate_model(const PlantModel& model, int qp);

/// Encodes one frame and advances the plant's memory.
FrameOutcome step_plant(PlantModel& model, int qp, std::int64_t frame_index);

const char* to_string(PlantKind kind);
const char* to_string(DisturbanceKind kind);

}  // namespace pqc
