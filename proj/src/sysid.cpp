#include "pqc/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pqc/errors.hpp"

namespace pqc {

ImpulseExperiment run_impulse(const PlantModel& plant, const QpRange& range, std::size_t n) {
    if (n < kMinImpulseFrames) {
        throw InputDomainError("impulse experiment needs at least " +
                               std::to_string(kMinImpulseFrames) + " frames");
    }
    range.validate();

    PlantModel model = plant;
    model.disturbance = DisturbanceSpec{};
    model.prev_psnr.reset();

    ImpulseExperiment exp;
    exp.qp_sequence.assign(n, range.qp_max);
    exp.qp_sequence.front() = range.qp_min;

    std::vector<double> psnr(n);
    for (std::size_t t = 0; t < n; ++t) {
        psnr[t] = step_plant(model, exp.qp_sequence[t], static_cast<std::int64_t>(t)).psnr;
    }

    // lambda = 1, target = where the response comes to rest.
    exp.settled_psnr = psnr.back();
    ControlObjective objective{exp.settled_psnr, 1.0};
    exp.response.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        exp.response[t] = compute_error(psnr[t], t == 0 ? psnr[t] : psnr[t - 1], objective);
    }
    return exp;
}

OrderEstimate estimate_order(std::span<const double> response,
                             const OrderEstimatorOptions& options) {
    const std::size_t n = response.size();
    if (n < kMinImpulseFrames) {
        throw InputDomainError("order estimation needs at least " +
                               std::to_string(kMinImpulseFrames) + " samples");
    }
    for (double v : response) {
        if (!std::isfinite(v)) throw InputDomainError("response must be finite");
    }

    // Settled value = mean of the last quarter.
    const std::size_t tail = std::max<std::size_t>(1, n / 4);
    double settled = 0.0;
    for (std::size_t t = n - tail; t < n; ++t) settled += response[t];
    settled /= static_cast<double>(tail);

    std::vector<double> d(n);
    for (std::size_t t = 0; t < n; ++t) d[t] = response[t] - settled;

    double tail_energy = 0.0;
    for (std::size_t t = n - tail; t < n; ++t) tail_energy += d[t] * d[t];
    const double band = options.noise_band * std::sqrt(tail_energy / static_cast<double>(tail));

    std::size_t peak_at = 0;
    for (std::size_t t = 1; t < n; ++t) {
        if (std::abs(d[t]) > std::abs(d[peak_at])) peak_at = t;
    }
    const double peak = std::abs(d[peak_at]);
    if (peak == 0.0) {
        throw DegenerateInputError("response has no transient; order is undefined");
    }

    // Transient: from the peak until the deviation drops into the floor.
    const double floor = std::max(options.settle_fraction * peak, band);
    std::size_t end = peak_at;
    while (end < n - 1 && std::abs(d[end]) >= floor) ++end;
    end = std::max(end, peak_at + 1);
    if (end >= n) {
        throw DegenerateInputError("response peaks on its last sample");
    }

    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t t = peak_at; t < end; ++t) {
        sxx += d[t] * d[t];
        sxy += d[t] * d[t + 1];
    }
    const double r = sxy / sxx;
    double sse = 0.0;
    for (std::size_t t = peak_at; t < end; ++t) {
        const double resid = d[t + 1] - r * d[t];
        sse += resid * resid;
    }

    OrderEstimate est;
    est.fit_residual = std::sqrt(sse / sxx);
    // A pole is only visible if the sample after the peak leaves the noise band.
    const bool rises_above_noise = std::abs(d[peak_at + 1]) > band;
    if (std::abs(r) >= options.min_pole && std::abs(r) < 1.0 && est.fit_residual <= options.max_residual &&
        rises_above_noise) {
        est.order = 1;
        est.pole = r;
    }
    return est;
}

}  // namespace pqc
