#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pqc/controller.hpp"
#include "pqc/plant.hpp"

namespace pqc {

/// Impulse run: frame 0 at qp_min, every later frame at qp_max.
struct ImpulseExperiment {
    std::vector<int> qp_sequence;
    std::vector<double> response;  // e_t with lambda = 1 against the settled PSNR
    double settled_psnr = 0.0;
};

struct OrderEstimate {
    int order = 0;
    std::optional<double> pole;  // present iff order == 1
    double fit_residual = 0.0;   // relative RMS of the one-step fit
};

/// Classification thresholds for estimate_order.
struct OrderEstimatorOptions {
    double min_pole = 0.05;        // |r| below this is order 0
    double max_residual = 0.1;     // relative RMS above this is order 0
    double settle_fraction = 0.05; // transient ends once |d| < fraction * peak
    double noise_band = 3.0;       // multiples of the settled-tail RMS treated as noise

    bool operator==(const OrderEstimatorOptions&) const = default;
};

inline constexpr std::size_t kMinImpulseFrames = 8;

/// Drives a copy of `plant` (disturbance disabled) with the impulse QP sequence.
ImpulseExperiment run_impulse(const PlantModel& plant, const QpRange& range, std::size_t n);

/// Fits d_{t+1} = r d_t to the de-trended transient and decides between
/// zero and one pole.
OrderEstimate estimate_order(std::span<const double> response,
                             const OrderEstimatorOptions& options = {});

}  // namespace pqc
