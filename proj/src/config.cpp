#include "pqc/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pqc/errors.hpp"

namespace pqc {

namespace {

using Kind = ConfigError::Kind;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError(Kind::Parse, key, key + ": expected a number, got '" + v + "'");
    }
    if (!std::isfinite(out)) {
        throw ConfigError(Kind::InvariantViolation, key, key + ": must be finite");
    }
    return out;
}

template <typename Int>
Int to_integer(const std::string& key, const std::string& v) {
    Int out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError(Kind::Parse, key, key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(Kind::Parse, key, key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

template <typename Int>
std::string fmt_int(Int v) {
    return std::to_string(v);
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(Kind::InvariantViolation, key, key + ": " + what);
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string& key, const std::string& value,
                       const std::string& base_dir)>
        set;
    std::function<std::string(ExperimentConfig&)> get;
};

Field real(std::string key, std::function<double&(ExperimentConfig&)> ref,
           std::function<bool(double)> ok = {}, std::string what = {}) {
    auto get_ref = ref;
    return Field{
        std::move(key),
        [ref, ok, what](ExperimentConfig& c, const std::string& k, const std::string& v,
                        const std::string&) {
            const double x = to_double(k, v);
            if (ok) require(ok(x), k, what);
            ref(c) = x;
        },
        [get_ref](ExperimentConfig& c) {
            return fmt(get_ref(c));
        }};
}

template <typename Int>
Field integer(std::string key, std::function<Int&(ExperimentConfig&)> ref,
              std::function<bool(Int)> ok = {}, std::string what = {}) {
    auto get_ref = ref;
    return Field{
        std::move(key),
        [ref, ok, what](ExperimentConfig& c, const std::string& k, const std::string& v,
                        const std::string&) {
            const Int x = to_integer<Int>(k, v);
            if (ok) require(ok(x), k, what);
            ref(c) = x;
        },
        [get_ref](ExperimentConfig& c) {
            return fmt_int(get_ref(c));
        }};
}

template <typename Enum>
Field choice(std::string key, std::function<Enum&(ExperimentConfig&)> ref,
             std::vector<std::pair<std::string, Enum>> names) {
    return Field{
        std::move(key),
        [ref, names](ExperimentConfig& c, const std::string& k, const std::string& v,
                     const std::string&) {
            for (const auto& [name, value] : names) {
                if (name == v) {
                    ref(c) = value;
                    return;
                }
            }
            std::string allowed;
            for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : "|") + name;
            throw ConfigError(Kind::Parse, k, k + ": expected " + allowed + ", got '" + v + "'");
        },
        [ref, names](ExperimentConfig& c) {
            const Enum current = ref(c);
            for (const auto& [name, value] : names) {
                if (value == current) return name;
            }
            return std::string("?");
        }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        const auto nonneg = [](double x) { return x >= 0.0; };

        f.push_back(choice<PlantKind>("plant.kind", [](ExperimentConfig& c) -> PlantKind& { return c.plant.kind; },
                                      {{"zero_order", PlantKind::ZeroOrder},
                                       {"first_order", PlantKind::FirstOrder},
                                       {"trace", PlantKind::TraceDriven}}));
        f.push_back(real("plant.c0", [](ExperimentConfig& c) -> double& { return c.plant.psnr_intercept; }));
        f.push_back(real("plant.c1", [](ExperimentConfig& c) -> double& { return c.plant.psnr_slope; },
                         [](double x) { return x > 0.0; }, "must be > 0"));
        f.push_back(real("plant.alpha", [](ExperimentConfig& c) -> double& { return c.plant.inertia; },
                         [](double x) { return x >= 0.0 && x < 1.0; }, "must lie in [0, 1)"));
        f.push_back(real("plant.rate_ref_bits", [](ExperimentConfig& c) -> double& { return c.plant.rate_ref_bits; },
                         nonneg, "must be >= 0"));
        f.push_back(integer<int>("plant.rate_ref_qp", [](ExperimentConfig& c) -> int& { return c.plant.rate_ref_qp; }));
        f.push_back(Field{
            "plant.initial_psnr",
            [](ExperimentConfig& c, const std::string& k, const std::string& v, const std::string&) {
                if (v == "auto") {
                    c.plant.prev_psnr.reset();
                } else {
                    c.plant.prev_psnr = to_double(k, v);
                }
            },
            [](const ExperimentConfig& c) {
                return c.plant.prev_psnr ? fmt(*c.plant.prev_psnr) : std::string("auto");
            }});
        f.push_back(Field{
            "plant.trace",
            [](ExperimentConfig& c, const std::string&, const std::string& v,
               const std::string& base_dir) {
                if (v.empty()) {
                    c.trace_path.clear();
                    return;
                }
                std::filesystem::path p(v);
                if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
                c.trace_path = p.lexically_normal().string();
            },
            [](const ExperimentConfig& c) { return c.trace_path; }});
        f.push_back(choice<DisturbanceKind>(
            "plant.disturbance.kind",
            [](ExperimentConfig& c) -> DisturbanceKind& { return c.plant.disturbance.kind; },
            {{"none", DisturbanceKind::None},
             {"constant", DisturbanceKind::Constant},
             {"step", DisturbanceKind::Step},
             {"sinusoid", DisturbanceKind::Sinusoid},
             {"noise", DisturbanceKind::SeededNoise}}));
        f.push_back(real("plant.disturbance.amplitude",
                         [](ExperimentConfig& c) -> double& { return c.plant.disturbance.amplitude; }));
        f.push_back(real("plant.disturbance.period",
                         [](ExperimentConfig& c) -> double& { return c.plant.disturbance.period; },
                         [](double x) { return x > 0.0; }, "must be > 0"));
        f.push_back(integer<std::int64_t>(
            "plant.disturbance.step_frame",
            [](ExperimentConfig& c) -> std::int64_t& { return c.plant.disturbance.step_frame; }));

        f.push_back(real("gains.kp", [](ExperimentConfig& c) -> double& { return c.gains.kp; }, nonneg, "must be >= 0"));
        f.push_back(real("gains.ki", [](ExperimentConfig& c) -> double& { return c.gains.ki; }, nonneg, "must be >= 0"));
        f.push_back(real("gains.kd", [](ExperimentConfig& c) -> double& { return c.gains.kd; }, nonneg, "must be >= 0"));
        f.push_back(real("objective.target_psnr", [](ExperimentConfig& c) -> double& { return c.objective.target_psnr; },
                         [](double x) { return x > 0.0; }, "must be > 0"));
        f.push_back(real("objective.lambda", [](ExperimentConfig& c) -> double& { return c.objective.lambda; },
                         [](double x) { return x >= 0.0 && x <= 1.0; }, "must lie in [0, 1]"));
        f.push_back(integer<int>("range.qp_min", [](ExperimentConfig& c) -> int& { return c.range.qp_min; }));
        f.push_back(integer<int>("range.qp_max", [](ExperimentConfig& c) -> int& { return c.range.qp_max; }));
        f.push_back(real("qp_offset", [](ExperimentConfig& c) -> double& { return c.qp_offset; }));
        f.push_back(integer<std::int64_t>(
            "schedule.intra_period", [](ExperimentConfig& c) -> std::int64_t& { return c.schedule.intra_period; },
            [](std::int64_t x) { return x >= 0; }, "must be >= 0"));
        f.push_back(integer<std::int64_t>(
            "n_frames", [](ExperimentConfig& c) -> std::int64_t& { return c.n_frames; },
            [](std::int64_t x) { return x >= 1; }, "must be >= 1"));
        f.push_back(integer<std::uint64_t>("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
        f.push_back(choice<RunMode>("mode", [](ExperimentConfig& c) -> RunMode& { return c.mode; },
                                    {{"controlled", RunMode::Controlled}, {"fixed", RunMode::FixedQp}}));
        f.push_back(Field{
            "controller.freeze_when_clamped",
            [](ExperimentConfig& c, const std::string& k, const std::string& v, const std::string&) {
                c.freeze_when_clamped = to_bool(k, v);
            },
            [](const ExperimentConfig& c) {
                return std::string(c.freeze_when_clamped ? "true" : "false");
            }});

        f.push_back(integer<std::size_t>(
            "sysid.frames", [](ExperimentConfig& c) -> std::size_t& { return c.impulse_frames; },
            [](std::size_t x) { return x >= kMinImpulseFrames; }, "must be >= 8"));
        f.push_back(real("sysid.min_pole", [](ExperimentConfig& c) -> double& { return c.sysid.min_pole; },
                         nonneg, "must be >= 0"));
        f.push_back(real("sysid.max_residual", [](ExperimentConfig& c) -> double& { return c.sysid.max_residual; },
                         nonneg, "must be >= 0"));
        f.push_back(real("sysid.settle_fraction",
                         [](ExperimentConfig& c) -> double& { return c.sysid.settle_fraction; },
                         [](double x) { return x > 0.0 && x < 1.0; }, "must lie in (0, 1)"));
        f.push_back(real("sysid.noise_band", [](ExperimentConfig& c) -> double& { return c.sysid.noise_band; },
                         nonneg, "must be >= 0"));
        return f;
    }();
    return table;
}

const Field* find_field(const std::string& key) {
    for (const Field& f : fields()) {
        if (f.key == key) return &f;
    }
    return nullptr;
}

void finalize(ExperimentConfig& config) {
    if (config.plant.kind == PlantKind::TraceDriven) {
        if (config.trace_path.empty()) {
            throw ConfigError(Kind::InvariantViolation, "plant.trace",
                              "plant.trace: required when plant.kind=trace");
        }
        if (!std::filesystem::exists(config.trace_path)) {
            throw ConfigError(Kind::MissingFile, "plant.trace",
                              "plant.trace: no such file '" + config.trace_path + "'");
        }
        try {
            config.plant.trace =
                std::make_shared<const TraceTable>(TraceTable::load(config.trace_path));
        } catch (const ParseError& e) {
            throw ConfigError(Kind::Parse, "plant.trace", std::string("plant.trace: ") + e.what());
        }
    } else {
        config.plant.trace.reset();
    }

    if (config.range.qp_min > config.range.qp_max) {
        throw ConfigError(Kind::InvariantViolation, "range.qp_min",
                          "range.qp_min: must not exceed range.qp_max");
    }
    try {
        config.validate();
    } catch (const InputDomainError& e) {
        throw ConfigError(Kind::InvariantViolation, "", e.what());
    }
}

}  // namespace

const char* to_string(ConfigError::Kind kind) {
    switch (kind) {
        case Kind::MissingFile: return "missing file";
        case Kind::Parse: return "parse error";
        case Kind::InvariantViolation: return "invariant violation";
        case Kind::UnknownKey: return "unknown key";
    }
    return "?";
}

Override parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
        throw ConfigError(Kind::Parse, "", "expected key=value, got '" + text + "'");
    }
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Field& f : fields()) keys.push_back(f.key);
    return keys;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value,
                   const std::string& base_dir) {
    const Field* field = find_field(key);
    if (!field) {
        throw ConfigError(Kind::UnknownKey, key, "unknown config key '" + key + "'");
    }
    field->set(config, key, value, base_dir);
}

ExperimentConfig parse_config_text(const std::string& text, const std::vector<Override>& overrides,
                                   const std::string& base_dir) {
    ExperimentConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(Kind::Parse, "",
                              "line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second) {
            throw ConfigError(Kind::Parse, key,
                              "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        apply_setting(config, key, trim(line.substr(eq + 1)), base_dir);
    }
    for (const auto& [key, value] : overrides) {
        apply_setting(config, key, value, ".");
    }
    finalize(config);
    return config;
}

ExperimentConfig parse_config(const std::string& path, const std::vector<Override>& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(Kind::MissingFile, "", "cannot open config file '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_config_text(text.str(), overrides, dir.empty() ? "." : dir.string());
}

std::string config_value(const ExperimentConfig& config, const std::string& key) {
    const Field* field = find_field(key);
    if (!field) {
        throw ConfigError(Kind::UnknownKey, key, "unknown config key '" + key + "'");
    }
    ExperimentConfig copy = config;
    return field->get(copy);
}

std::string emit_config(const ExperimentConfig& config) {
    ExperimentConfig copy = config;
    std::string out;
    for (const Field& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(copy);
        out += '\n';
    }
    return out;
}

}  // namespace pqc
