// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "oracles.hpp"
#include "pqc/cli.hpp"
#include "pqc/controller.hpp"
#include "pqc/harness.hpp"
#include "pqc/plant.hpp"
#include "pqc/sysid.hpp"

using namespace pqc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig reference_config() {
    ExperimentConfig c;
    c.plant.kind = PlantKind::FirstOrder;
    c.plant.inertia = 0.5;
    c.plant.psnr_intercept = 50.0;
    c.plant.psnr_slope = 0.4;
    c.objective = {37.2, 0.8};
    c.gains = {2.12, 0.10, 0.60};
    c.n_frames = 300;
    return c;
}

Outcome setpoint_convergence() {
    double worst = 0.0, slowest = 0.0;
    for (double anchor : {32.0, 27.0, 37.0}) {
        ExperimentConfig c = reference_config();
        c.qp_offset = anchor;
        const auto start = Clock::now();
        const auto recs = run_closed_loop(c);
        slowest = std::max(slowest, seconds_since(start));
        double sum = 0.0;
        for (std::size_t t = 200; t < 300; ++t) sum += recs[t].psnr;
        worst = std::max(worst, std::abs(sum / 100.0 - c.objective.target_psnr));
    }
    return {worst <= 0.05 && slowest < 1.0,
            fmt("max |mean(200..299) - T| = %.6f dB over anchors 32/27/37, slowest run %.4f s",
                worst, slowest)};
}

Outcome fluctuation_reduction() {
    ExperimentConfig c = reference_config();
    c.plant.disturbance = {DisturbanceKind::Sinusoid, 1.0, 30.0};
    const MetricsReport ctrl = compute_metrics(run_closed_loop(c), c.objective);
    c.mode = RunMode::FixedQp;
    const MetricsReport base = compute_metrics(run_fixed_qp(c), c.objective);
    return {ctrl.quality_fluc_db <= 0.5 * base.quality_fluc_db,
            fmt("controlled %.4f dB vs fixed QP %.4f dB (%.1f%% reduction)", ctrl.quality_fluc_db,
                base.quality_fluc_db,
                100.0 * (base.quality_fluc_db - ctrl.quality_fluc_db) / base.quality_fluc_db)};
}

Outcome order_identification() {
    const std::size_t frames = ExperimentConfig{}.impulse_frames;
    const auto start = Clock::now();
    bool ok = true;
    std::string detail;
    for (double alpha : {0.2, 0.5, 0.8}) {
        PlantModel p = reference_config().plant;
        p.inertia = alpha;
        const OrderEstimate e = estimate_order(run_impulse(p, {0, 51}, frames).response);
        const bool hit = e.order == 1 && e.pole && std::abs(*e.pole - alpha) <= 0.01;
        ok = ok && hit;
        detail += fmt("alpha %.1f -> order %d pole %.6f; ", alpha, e.order, e.pole.value_or(-1.0));
    }
    PlantModel z = reference_config().plant;
    z.kind = PlantKind::ZeroOrder;
    const OrderEstimate e0 = estimate_order(run_impulse(z, {0, 51}, frames).response);
    ok = ok && e0.order == 0 && !e0.pole;
    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 1.0;
    detail += fmt("zero-order -> order %d; %.4f s", e0.order, elapsed);
    return {ok, detail};
}

Outcome intra_inter_policy() {
    // Proportional-only gains with a constant error give a constant o.
    const PidGains g{1.0, 0.0, 0.0};
    const int n = 60;
    double worst = 0.0;
    bool ok = true;
    for (double o : {0.01, -0.0125, 0.003}) {
        ControllerState inter = reset({}, 0.0), intra = reset({}, 25.0);
        std::vector<double> feed;
        for (int t = 1; t <= n; ++t) {
            feed.push_back(pid_step(o, inter, g));
            const int qp_inter = policy_qp(feed.back(), FrameKind::Inter, inter, {-100, 100});
            pid_step(o, intra, g);
            const int qp_intra = policy_qp(feed.back(), FrameKind::Intra, intra, {0, 51});

            const double lin = oracle::cumulative_sum(feed, t);
            const double quad = oracle::double_cumulative_sum(feed, t);
            ok = ok && oracle::close_rel(inter.o_integral, lin, 1e-9) &&
                 oracle::close_rel(intra.o_double_integral, quad, 1e-9) &&
                 oracle::close_rel(lin, o * t, 1e-9) &&
                 oracle::close_rel(quad, o * t * (t + 1) / 2.0, 1e-9) &&
                 qp_inter == clamp_round_qp(lin, {-100, 100}) &&
                 qp_intra == clamp_round_qp(25.0 + quad, {0, 51});
            worst = std::max({worst, std::abs(inter.o_integral - lin) / std::abs(lin),
                              std::abs(intra.o_double_integral - quad) / std::abs(quad)});
        }
    }
    return {ok, fmt("inter tracks o*t, intra tracks o*t(t+1)/2 over %d frames; max rel dev %.2e",
                    n, worst)};
}

Outcome constant_work() {
    static_assert(std::is_trivially_copyable_v<ControllerState>);
    const PidGains gains{2.12, 0.10, 0.60};
    const ControlObjective obj{37.2, 0.8};
    const QpRange range{0, 51};

    ControllerState s = reset({}, 32.0);
    ControllerState early{}, late{};
    controller_frame(std::nullopt, FrameKind::Inter, s, gains, obj, range);
    for (std::int64_t t = 1; t <= 1'000'000; ++t) {
        if (t == 100) early = s;
        controller_frame(37.2 + 0.3 * std::sin(0.1 * static_cast<double>(t)), FrameKind::Inter, s,
                         gains, obj, range);
    }
    late = s;

    volatile int sink = 0;
    auto time_from = [&](const ControllerState& saved) {
        const int iters = 1'000'000;
        double best = 1e30;
        for (int rep = 0; rep < 5; ++rep) {
            const auto start = Clock::now();
            for (int i = 0; i < iters; ++i) {
                ControllerState st = saved;
                sink = sink + controller_frame(37.0 + 1e-7 * (i & 7), FrameKind::Inter, st, gains,
                                               obj, range);
            }
            best = std::min(best, seconds_since(start) / iters);
        }
        return best;
    };
    const double t_early = time_from(early);
    const double t_late = time_from(late);
    const double ratio = std::max(t_early, t_late) / std::min(t_early, t_late);
    return {ratio <= 2.0 && early.frame_index == 100 && late.frame_index == 1'000'001,
            fmt("state %zu bytes at every frame; %.1f ns/frame at t=1e2, %.1f ns/frame at t=1e6 "
                "(ratio %.2f)",
                sizeof(ControllerState), t_early * 1e9, t_late * 1e9, ratio)};
}

double run_pid(const std::vector<double>& history, const PidGains& gains) {
    ControllerState s;
    double o = 0.0;
    for (double e : history) o = pid_step(e, s, gains);
    return o;
}

Outcome pid_algebra() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dyadic(-512, 512);
    std::uniform_real_distribution<double> real(-3.0, 3.0);
    std::uniform_int_distribution<std::size_t> length(1, 64);
    const PidGains exact{2.125, 0.125, 0.625};
    const PidGains paper{2.12, 0.10, 0.60};
    int linear_fail = 0, prop_fail = 0, incr_fail = 0;

    for (int h = 0; h < 1000; ++h) {
        const std::size_t n = length(rng);
        std::vector<double> a(n), b(n), sum(n), scaled(n), x(n);
        const double c = dyadic(rng) / 16.0;
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = dyadic(rng) / 64.0;
            b[k] = dyadic(rng) / 64.0;
            sum[k] = a[k] + b[k];
            scaled[k] = c * a[k];
            x[k] = real(rng);
        }
        if (run_pid(sum, exact) != run_pid(a, exact) + run_pid(b, exact) ||
            run_pid(scaled, exact) != c * run_pid(a, exact)) {
            ++linear_fail;
        }

        const double kp = real(rng);
        ControllerState s;
        for (double e : x) {
            if (pid_step(e, s, {kp, 0.0, 0.0}) != kp * e) ++prop_fail;
            s.output_pending = false;
        }

        ControllerState inc;
        const auto expected = oracle::pid_outputs(x, paper);
        for (std::size_t k = 0; k < n; ++k) {
            if (!oracle::close_rel(pid_step(x[k], inc, paper), expected[k], 1e-9, 1e-12)) {
                ++incr_fail;
            }
            inc.output_pending = false;
        }
        if (!oracle::close_rel(inc.error_integral, oracle::cumulative_sum(x, n), 1e-9, 1e-12)) {
            ++incr_fail;
        }
    }
    return {linear_fail == 0 && prop_fail == 0 && incr_fail == 0,
            fmt("1000 histories: linearity failures %d, proportional-only failures %d, "
                "incremental mismatches %d",
                linear_fail, prop_fail, incr_fail)};
}

Outcome metric_oracle() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> psnr(25.0, 45.0), bits(1e3, 5e5);
    std::uniform_int_distribution<int> length(1, 400);
    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<FrameRecord> recs(static_cast<std::size_t>(length(rng)));
        for (std::size_t t = 0; t < recs.size(); ++t) {
            recs[t].frame = static_cast<std::int64_t>(t);
            recs[t].psnr = psnr(rng);
            recs[t].bits = bits(rng);
        }
        const ControlObjective obj{psnr(rng), 0.8};
        const MetricsReport m = compute_metrics(recs, obj);
        const oracle::BruteMetrics o = oracle::metrics(recs, obj.target_psnr);
        const bool ok = oracle::close_rel(m.avg_psnr, o.avg_psnr, 1e-9) &&
                        oracle::close_rel(m.control_error_db, o.control_error_db, 1e-9, 1e-9) &&
                        oracle::close_rel(m.control_error_pct, o.control_error_pct, 1e-9, 1e-9) &&
                        oracle::close_rel(m.quality_fluc_db, o.quality_fluc_db, 1e-9, 1e-9) &&
                        oracle::close_rel(m.bitrate_mean, o.bitrate_mean, 1e-9) &&
                        oracle::close_rel(m.bit_fluc, o.bit_fluc, 1e-9, 1e-6);
        if (!ok) ++mismatches;
    }
    std::vector<FrameRecord> pair(2);
    pair[0].psnr = 30.0;
    pair[1].psnr = 32.0;
    pair[1].frame = 1;
    const MetricsReport hand = compute_metrics(pair, {30.0, 0.8});
    const bool exact = hand.quality_fluc_db == 1.0 && hand.avg_psnr == 31.0 &&
                       hand.control_error_db == 1.0;
    return {mismatches == 0 && exact,
            fmt("100 random traces, %d mismatches; {30, 32} vs T=30 gives fluc %.17g", mismatches,
                hand.quality_fluc_db)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int simulate(const fs::path& out, std::vector<std::string> extra) {
    std::vector<std::string> args = {"pqc", "simulate", "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream sink_out, sink_err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), sink_out, sink_err);
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "pqc_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::vector<std::string>> invocations = {
        {},
        {"--seed", "9", "--set", "plant.disturbance.kind=noise", "--set",
         "plant.disturbance.amplitude=1.5"},
        {"--seed", "3", "--mode", "fixed", "--set", "plant.disturbance.kind=noise", "--set",
         "plant.disturbance.amplitude=0.5"},
        {"--seed", "11", "--set", "schedule.intra_period=8", "--set",
         "plant.disturbance.kind=sinusoid", "--set", "plant.disturbance.amplitude=1"},
    };
    int identical = 0;
    for (std::size_t i = 0; i < invocations.size(); ++i) {
        const fs::path a = root / fmt("%zu_a", i), b = root / fmt("%zu_b", i);
        if (simulate(a, invocations[i]) != 0 || simulate(b, invocations[i]) != 0) continue;
        const std::string ta = slurp(a / "trace.csv");
        if (!ta.empty() && ta == slurp(b / "trace.csv")) ++identical;
    }
    fs::remove_all(root);
    return {identical == static_cast<int>(invocations.size()),
            fmt("%d of %zu simulate invocations byte-identical across reruns", identical,
                invocations.size())};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"setpoint convergence", setpoint_convergence},
        {"fluctuation reduction", fluctuation_reduction},
        {"order identification", order_identification},
        {"intra/inter policy", intra_inter_policy},
        {"constant per-frame work", constant_work},
        {"PID algebra", pid_algebra},
        {"metric oracle", metric_oracle},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str());
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
