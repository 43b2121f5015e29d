#include "pqc/plant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pqc/errors.hpp"

namespace pqc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

template <typename T>
T parse_field(const std::string& text, std::size_t line_no, const char* name) {
    T value{};
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("trace line " + std::to_string(line_no) + ": bad " + name + " '" +
                         text + "'");
    }
    return value;
}

std::string trim_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

void DisturbanceSpec::validate() const {
    if (!std::isfinite(amplitude)) {
        throw InputDomainError("disturbance amplitude must be finite");
    }
    if (kind == DisturbanceKind::Sinusoid && !(period > 0.0 && std::isfinite(period))) {
        throw InputDomainError("sinusoid period must be positive");
    }
    if (kind == DisturbanceKind::SeededNoise && amplitude < 0.0) {
        throw InputDomainError("noise amplitude must be non-negative");
    }
}

double disturbance_at(const DisturbanceSpec& spec, std::int64_t frame_index) {
    switch (spec.kind) {
        case DisturbanceKind::None:
            return 0.0;
        case DisturbanceKind::Constant:
            return spec.amplitude;
        case DisturbanceKind::Step:
            return frame_index >= spec.step_frame ? spec.amplitude : 0.0;
        case DisturbanceKind::Sinusoid:
            return spec.amplitude *
                   std::sin(2.0 * std::numbers::pi * static_cast<double>(frame_index) / spec.period);
        case DisturbanceKind::SeededNoise: {
            const std::uint64_t bits =
                splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(frame_index)));
            const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
            return spec.amplitude * (2.0 * unit - 1.0);
        }
    }
    return 0.0;
}

TraceTable TraceTable::from_rows(std::vector<TraceRow> rows) {
    if (rows.empty()) {
        throw ParseError("trace table has no rows");
    }
    TraceTable table;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const TraceRow& row = rows[i];
        if (!std::isfinite(row.psnr_db) || !std::isfinite(row.bits) || row.bits < 0.0) {
            throw ParseError("trace row " + std::to_string(i) + ": psnr must be finite, bits >= 0");
        }
        if (i == 0) {
            if (row.frame != 0) throw ParseError("trace must start at frame 0");
            continue;
        }
        const TraceRow& prev = rows[i - 1];
        if (row.frame == prev.frame) {
            if (row.qp <= prev.qp) {
                throw ParseError("trace row " + std::to_string(i) +
                                 ": qps must be strictly increasing within a frame");
            }
        } else if (row.frame == prev.frame + 1) {
            table.frames_.emplace_back(begin, i);
            begin = i;
        } else {
            throw ParseError("trace row " + std::to_string(i) +
                             ": frames must be contiguous and sorted");
        }
    }
    table.frames_.emplace_back(begin, rows.size());
    table.rows_ = std::move(rows);
    return table;
}

TraceTable TraceTable::parse(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim_cr(line) != "frame,qp,psnr_db,bits") {
        throw ParseError("trace header must be 'frame,qp,psnr_db,bits'");
    }
    std::vector<TraceRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) {
            throw ParseError("trace line " + std::to_string(line_no) + ": expected 4 fields");
        }
        rows.push_back({parse_field<std::int64_t>(cells[0], line_no, "frame"),
                        parse_field<int>(cells[1], line_no, "qp"),
                        parse_field<double>(cells[2], line_no, "psnr_db"),
                        parse_field<double>(cells[3], line_no, "bits")});
    }
    return from_rows(std::move(rows));
}

TraceTable TraceTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open trace table '" + path + "'");
    }
    return parse(in);
}

void TraceTable::write(std::ostream& out) const {
    out << "frame,qp,psnr_db,bits\n";
    char buf[64];
    for (const TraceRow& row : rows_) {
        out << row.frame << ',' << row.qp << ',';
        auto r = std::to_chars(buf, buf + sizeof(buf), row.psnr_db, std::chars_format::fixed, 6);
        out.write(buf, r.ptr - buf);
        out << ',';
        r = std::to_chars(buf, buf + sizeof(buf), row.bits, std::chars_format::fixed);
        out.write(buf, r.ptr - buf);
        out << '\n';
    }
}

FrameOutcome TraceTable::lookup(std::int64_t frame, int qp) const {
    if (frame < 0 || frame >= frame_count()) {
        throw TraceDomainError("trace has no frame " + std::to_string(frame));
    }
    const auto [begin, end] = frames_[static_cast<std::size_t>(frame)];
    const auto first = rows_.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = rows_.begin() + static_cast<std::ptrdiff_t>(end);
    const auto hi = std::lower_bound(first, last, qp,
                                     [](const TraceRow& row, int q) { return row.qp < q; });
    if (hi == last || (hi->qp != qp && hi == first)) {
        throw TraceDomainError("trace frame " + std::to_string(frame) + " does not cover QP " +
                               std::to_string(qp));
    }
    if (hi->qp == qp) {
        return {hi->psnr_db, hi->bits};
    }
    const auto lo = hi - 1;
    const double w = static_cast<double>(qp - lo->qp) / static_cast<double>(hi->qp - lo->qp);
    return {lo->psnr_db + w * (hi->psnr_db - lo->psnr_db), lo->bits + w * (hi->bits - lo->bits)};
}

bool TraceTable::operator==(const TraceTable& other) const {
    if (rows_.size() != other.rows_.size()) return false;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const TraceRow& a = rows_[i];
        const TraceRow& b = other.rows_[i];
        if (a.frame != b.frame || a.qp != b.qp || a.psnr_db != b.psnr_db || a.bits != b.bits) {
            return false;
        }
    }
    return true;
}

void PlantModel::validate() const {
    disturbance.validate();
    if (kind == PlantKind::TraceDriven) {
        if (!trace) throw InputDomainError("trace-driven plant needs a trace table");
        return;
    }
    if (!std::isfinite(psnr_intercept)) {
        throw InputDomainError("plant.c0 must be finite");
    }
    if (!(psnr_slope > 0.0) || !std::isfinite(psnr_slope)) {
        throw InputDomainError("plant.c1 must be positive");
    }
    if (!(inertia >= 0.0 && inertia < 1.0)) {
        throw InputDomainError("plant.alpha must lie in [0, 1)");
    }
    if (!(rate_ref_bits >= 0.0) || !std::isfinite(rate_ref_bits)) {
        throw InputDomainError("plant.rate_ref_bits must be non-negative");
    }
}

bool PlantModel::operator==(const PlantModel& other) const {
    const bool same_trace = trace == other.trace ||
                            (trace && other.trace && *trace == *other.trace);
    return kind == other.kind && psnr_intercept == other.psnr_intercept &&
           psnr_slope == other.psnr_slope && inertia == other.inertia &&
           rate_ref_bits == other.rate_ref_bits && rate_ref_qp == other.rate_ref_qp &&
           disturbance == other.disturbance && same_trace && prev_psnr == other.prev_psnr;
}

double rate_model(const PlantModel& model, int qp) {
    return model.rate_ref_bits * std::exp2(-static_cast<double>(qp - model.rate_ref_qp) / 6.0);
}

FrameOutcome step_plant(PlantModel& model, int qp, std::int64_t frame_index) {
    const double w = disturbance_at(model.disturbance, frame_index);
    FrameOutcome out;
    switch (model.kind) {
        case PlantKind::ZeroOrder:
            out.psnr = model.steady_psnr(qp) + w;
            out.bits = rate_model(model, qp);
            break;
        case PlantKind::FirstOrder: {
            const double core = model.steady_psnr(qp);
            const double prev = model.prev_psnr.value_or(core);
            out.psnr = model.inertia * prev + (1.0 - model.inertia) * core + w;
            out.bits = rate_model(model, qp);
            break;
        }
        case PlantKind::TraceDriven: {
            if (!model.trace) throw InputDomainError("trace-driven plant needs a trace table");
            out = model.trace->lookup(frame_index, qp);
            out.psnr += w;
            break;
        }
    }
    model.prev_psnr = out.psnr;
    return out;
}

const char* to_string(PlantKind kind) {
    switch (kind) {
        case PlantKind::ZeroOrder: return "zero_order";
        case PlantKind::FirstOrder: return "first_order";
        case PlantKind::TraceDriven: return "trace";
    }
    return "?";
}

const char* to_string(DisturbanceKind kind) {
    switch (kind) {
        case DisturbanceKind::None: return "none";
        case DisturbanceKind::Constant: return "constant";
        case DisturbanceKind::Step: return "step";
        case DisturbanceKind::Sinusoid: return "sinusoid";
        case DisturbanceKind::SeededNoise: return "noise";
    }
    return "?";
}

}  // namespace pqc
