// JSON run configuration. Parsing is strict: unknown keys are rejected by
// name, section by section, so typos surface as config errors instead of
// silently running defaults. Every random element of a run (noise streams,
// drawn initial estimates) derives from the single simulation seed.

#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "harness.hpp"

namespace gyrobs {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MonteCarloDefaults {
    int trials = 100;
    double init_box = 10.0;
    double bias_box = 1.0;
};

struct OutputSpec {
    std::string csv = "run.csv";
    std::string summary = "summary.json";
};

struct LoadedConfig {
    RunConfig run;
    MonteCarloDefaults montecarlo;
    OutputSpec output;
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ConfigError("config: expected an object at " + where);
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
        }
    }
}

inline const json& require(const json& obj, const std::string& where, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError("config: missing key \"" + std::string(key) + "\" in " + where);
    }
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ConfigError("config: expected a number at " + where);
    }
    return j.get<double>();
}

inline std::uint64_t unsigned_integer(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) {
        throw ConfigError("config: expected a non-negative integer at " + where);
    }
    return j.get<std::uint64_t>();
}

inline Vector3 vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError("config: expected a 3-vector at " + where);
    }
    Vector3 v;
    for (int i = 0; i < 3; ++i) v(i) = number(j[i], where);
    return v;
}

inline Matrix3 mat3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError("config: expected three matrix rows at " + where);
    }
    Matrix3 m;
    for (int r = 0; r < 3; ++r) {
        const Vector3 row = vec3(j[r], where);
        m.row(r) = row.transpose();
    }
    return m;
}

inline AngularVelocityProfile parse_profile(const json& j) {
    const std::string where = "motion.angular_velocity";
    const json& kind_j = require(j, where, "kind");
    if (!kind_j.is_string()) throw ConfigError("config: expected a string at " + where + ".kind");
    const std::string kind = kind_j.get<std::string>();
    if (kind == "constant") {
        check_keys(j, where, {"kind", "value"});
        return AngularVelocityProfile::constant(vec3(require(j, where, "value"), where + ".value"));
    }
    if (kind == "sinusoidal") {
        check_keys(j, where, {"kind", "amplitude", "frequency_hz", "phase_rad"});
        const Vector3 amp = vec3(require(j, where, "amplitude"), where + ".amplitude");
        const Vector3 freq = vec3(require(j, where, "frequency_hz"), where + ".frequency_hz");
        Vector3 phase = Vector3::Zero();
        if (j.contains("phase_rad")) phase = vec3(j["phase_rad"], where + ".phase_rad");
        return AngularVelocityProfile::sinusoidal(amp, freq, phase);
    }
    if (kind == "piecewise") {
        check_keys(j, where, {"kind", "times", "values"});
        const json& times_j = require(j, where, "times");
        const json& values_j = require(j, where, "values");
        if (!times_j.is_array() || !values_j.is_array()) {
            throw ConfigError("config: expected arrays at " + where + ".times/.values");
        }
        std::vector<double> times;
        std::vector<Vector3> values;
        for (const auto& t : times_j) times.push_back(number(t, where + ".times"));
        for (const auto& v : values_j) values.push_back(vec3(v, where + ".values"));
        try {
            return AngularVelocityProfile::piecewise(std::move(times), std::move(values));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    throw ConfigError("config: unknown angular velocity kind \"" + kind + "\"");
}

inline Rotation3 parse_attitude(const json& j, const std::string& where) {
    if (j.is_string()) {
        if (j.get<std::string>() == "identity") return Rotation3::identity();
        throw ConfigError("config: unknown attitude literal at " + where);
    }
    check_keys(j, where, {"axis_angle", "matrix"});
    if (j.contains("axis_angle")) {
        return Rotation3::from_axis_angle(vec3(j["axis_angle"], where + ".axis_angle"));
    }
    if (j.contains("matrix")) {
        try {
            return Rotation3(mat3(j["matrix"], where + ".matrix"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config: " + std::string(e.what()) + " at " + where);
        }
    }
    throw ConfigError("config: attitude needs axis_angle or matrix at " + where);
}

inline VectorScene parse_scene(const json& j, ObserverKind kind) {
    const std::string where = "observer.scene";
    check_keys(j, where, {"directions", "weights", "noise_std"});
    const json& dirs_j = require(j, where, "directions");
    if (!dirs_j.is_array() || dirs_j.empty()) {
        throw ConfigError("config: expected direction list at " + where + ".directions");
    }
    const int m = static_cast<int>(dirs_j.size());
    Eigen::Matrix3Xd s(3, m);
    for (int i = 0; i < m; ++i) s.col(i) = vec3(dirs_j[i], where + ".directions");

    const json& w_j = require(j, where, "weights");
    try {
        if (kind == ObserverKind::DiagonalForm || kind == ObserverKind::MahonyBaseline) {
            if (!w_j.is_array() || static_cast<int>(w_j.size()) != m) {
                throw ConfigError("config: expected one weight per direction at " + where + ".weights");
            }
            Eigen::VectorXd w(m);
            for (int i = 0; i < m; ++i) w(i) = number(w_j[i], where + ".weights");
            return VectorScene::diagonal(s, w);
        }
        if (kind == ObserverKind::QuadraticForm) {
            if (!w_j.is_array() || static_cast<int>(w_j.size()) != m) {
                throw ConfigError("config: expected an m x m weight matrix at " + where + ".weights");
            }
            Eigen::MatrixXd w(m, m);
            for (int r = 0; r < m; ++r) {
                const json& row = w_j[r];
                if (!row.is_array() || static_cast<int>(row.size()) != m) {
                    throw ConfigError("config: expected an m x m weight matrix at " + where + ".weights");
                }
                for (int c = 0; c < m; ++c) w(r, c) = number(row[c], where + ".weights");
            }
            return VectorScene::quadratic(s, w);
        }
        // linear
        if (!w_j.is_array() || w_j.size() != 3) {
            throw ConfigError("config: expected a 3 x m weight matrix at " + where + ".weights");
        }
        Eigen::MatrixXd w(3, m);
        for (int r = 0; r < 3; ++r) {
            const json& row = w_j[r];
            if (!row.is_array() || static_cast<int>(row.size()) != m) {
                throw ConfigError("config: expected a 3 x m weight matrix at " + where + ".weights");
            }
            for (int c = 0; c < m; ++c) w(r, c) = number(row[c], where + ".weights");
        }
        return VectorScene::linear(s, w);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
}

inline MatrixSignalModel parse_signal(const json& j) {
    const std::string where = "observer.signal";
    check_keys(j, where, {"matrix", "spin"});
    Matrix3 g = Matrix3::Identity();
    const json& m_j = require(j, where, "matrix");
    if (m_j.is_string()) {
        if (m_j.get<std::string>() != "identity") {
            throw ConfigError("config: unknown signal matrix literal at " + where);
        }
    } else {
        g = mat3(m_j, where + ".matrix");
    }
    Vector3 spin = Vector3::Zero();
    if (j.contains("spin")) spin = vec3(j["spin"], where + ".spin");
    try {
        if (spin.norm() > 0.0) return MatrixSignalModel::rotating(g, spin);
        return MatrixSignalModel::constant(g);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
}

inline ObserverKind parse_kind(const std::string& name) {
    if (name == "base") return ObserverKind::Base;
    if (name == "g_identity") return ObserverKind::GIdentity;
    if (name == "inverse") return ObserverKind::Inverse;
    if (name == "time_varying") return ObserverKind::TimeVarying;
    if (name == "linear_form") return ObserverKind::LinearForm;
    if (name == "quadratic_form") return ObserverKind::QuadraticForm;
    if (name == "diagonal_form") return ObserverKind::DiagonalForm;
    if (name == "mahony_baseline") return ObserverKind::MahonyBaseline;
    throw ConfigError("config: unknown observer kind \"" + name + "\"");
}

}  // namespace config_detail

inline LoadedConfig parse_config(const nlohmann::json& root,
                                 std::optional<std::uint64_t> seed_override = {}) {
    using namespace config_detail;

    check_keys(root, "top level",
               {"simulation", "motion", "gyro", "observer", "montecarlo", "output"});

    LoadedConfig loaded;
    RunConfig& run = loaded.run;

    const json& sim = require(root, "top level", "simulation");
    check_keys(sim, "simulation", {"duration_s", "step_s", "seed"});
    run.duration_s = number(require(sim, "simulation", "duration_s"), "simulation.duration_s");
    run.step_s = number(require(sim, "simulation", "step_s"), "simulation.step_s");
    run.seed = sim.contains("seed") ? unsigned_integer(sim["seed"], "simulation.seed") : 0;
    if (seed_override) run.seed = *seed_override;

    const json& motion = require(root, "top level", "motion");
    check_keys(motion, "motion", {"initial_attitude", "angular_velocity"});
    run.attitude0 = parse_attitude(require(motion, "motion", "initial_attitude"),
                                   "motion.initial_attitude");
    run.profile = parse_profile(require(motion, "motion", "angular_velocity"));

    const json& gyro = require(root, "top level", "gyro");
    check_keys(gyro, "gyro", {"bias", "noise_std"});
    if (gyro.contains("bias")) run.gyro.bias = vec3(gyro["bias"], "gyro.bias");
    if (gyro.contains("noise_std")) {
        run.gyro.noise_std = number(gyro["noise_std"], "gyro.noise_std");
        if (run.gyro.noise_std < 0.0) throw ConfigError("config: gyro.noise_std must be non-negative");
    }
    run.gyro.seed = derive_seed(run.seed, 1);

    const json& obs = require(root, "top level", "observer");
    check_keys(obs, "observer", {"kind", "gains", "scene", "signal", "initial_estimate"});
    const json& kind_j = require(obs, "observer", "kind");
    if (!kind_j.is_string()) throw ConfigError("config: expected a string at observer.kind");
    const ObserverKind kind = parse_kind(kind_j.get<std::string>());

    const json& gains_j = require(obs, "observer", "gains");
    check_keys(gains_j, "observer.gains", {"kp", "ki"});
    try {
        run.gains = Gains(number(require(gains_j, "observer.gains", "kp"), "observer.gains.kp"),
                          number(require(gains_j, "observer.gains", "ki"), "observer.gains.ki"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }

    const bool scene_kind = kind == ObserverKind::LinearForm || kind == ObserverKind::QuadraticForm
                         || kind == ObserverKind::DiagonalForm
                         || kind == ObserverKind::MahonyBaseline;
    if (scene_kind) {
        if (obs.contains("signal")) {
            throw ConfigError("config: observer.signal not allowed for vector-measurement kinds");
        }
        const json& scene_j = require(obs, "observer", "scene");
        if (scene_j.is_object() && scene_j.contains("noise_std")) {
            run.vector_noise_std = number(scene_j["noise_std"], "observer.scene.noise_std");
            if (run.vector_noise_std < 0.0) {
                throw ConfigError("config: observer.scene.noise_std must be non-negative");
            }
        }
        const VectorScene scene = parse_scene(scene_j, kind);
        switch (kind) {
            case ObserverKind::LinearForm: run.variant = ObserverVariant::linear_form(scene); break;
            case ObserverKind::QuadraticForm: run.variant = ObserverVariant::quadratic_form(scene); break;
            case ObserverKind::DiagonalForm: run.variant = ObserverVariant::diagonal_form(scene); break;
            default: run.variant = ObserverVariant::mahony_baseline(scene); break;
        }
    } else {
        if (obs.contains("scene")) {
            throw ConfigError("config: observer.scene not allowed for matrix-signal kinds");
        }
        if (kind == ObserverKind::GIdentity) {
            if (obs.contains("signal")) {
                throw ConfigError("config: observer.signal not allowed for g_identity");
            }
            run.variant = ObserverVariant::g_identity();
        } else {
            const MatrixSignalModel model = parse_signal(require(obs, "observer", "signal"));
            switch (kind) {
                case ObserverKind::Base: run.variant = ObserverVariant::base(model); break;
                case ObserverKind::Inverse: run.variant = ObserverVariant::inverse(model); break;
                default: run.variant = ObserverVariant::time_varying(model); break;
            }
        }
    }

    // Initial estimate, resolved against G(0) and the initial attitude.
    const json& init = require(obs, "observer", "initial_estimate");
    check_keys(init, "observer.initial_estimate", {"signal", "bias"});
    const Matrix3 g0 = run.variant.G(0.0);
    const json& sig0 = require(init, "observer.initial_estimate", "signal");
    const std::string sig_where = "observer.initial_estimate.signal";
    if (sig0.is_string()) {
        const std::string lit = sig0.get<std::string>();
        if (lit == "truth") {
            run.signal_est0 = g0 * run.attitude0.matrix();
        } else if (lit == "zero") {
            run.signal_est0 = Matrix3::Zero();
        } else {
            throw ConfigError("config: unknown literal at " + sig_where);
        }
    } else {
        check_keys(sig0, sig_where, {"relative_rotation", "matrix", "uniform_box"});
        if (sig0.contains("relative_rotation")) {
            const json& rel = sig0["relative_rotation"];
            check_keys(rel, sig_where + ".relative_rotation", {"axis", "angle_pi"});
            Vector3 axis = vec3(require(rel, sig_where, "axis"), sig_where + ".axis");
            const double angle =
                number(require(rel, sig_where, "angle_pi"), sig_where + ".angle_pi") * M_PI;
            const double n = axis.norm();
            if (n <= 0.0) throw ConfigError("config: zero axis at " + sig_where);
            axis /= n;
            run.signal_est0 = g0 * run.attitude0.matrix() * exp_so3(angle * axis);
        } else if (sig0.contains("matrix")) {
            run.signal_est0 = mat3(sig0["matrix"], sig_where + ".matrix");
        } else if (sig0.contains("uniform_box")) {
            const double box = number(sig0["uniform_box"], sig_where + ".uniform_box");
            if (!(box > 0.0)) throw ConfigError("config: uniform_box must be positive");
            Rng rng(derive_seed(run.seed, 0x1E57));
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) run.signal_est0(r, c) = rng.uniform(-box, box);
        } else {
            throw ConfigError("config: empty initial estimate at " + sig_where);
        }
    }

    const json& bias0 = require(init, "observer.initial_estimate", "bias");
    const std::string bias_where = "observer.initial_estimate.bias";
    if (bias0.is_string()) {
        if (bias0.get<std::string>() != "truth") {
            throw ConfigError("config: unknown literal at " + bias_where);
        }
        run.bias_est0 = run.gyro.bias;
    } else if (bias0.is_array()) {
        run.bias_est0 = vec3(bias0, bias_where);
    } else {
        check_keys(bias0, bias_where, {"uniform_box"});
        const double box = number(require(bias0, bias_where, "uniform_box"), bias_where);
        if (!(box > 0.0)) throw ConfigError("config: uniform_box must be positive");
        Rng rng(derive_seed(run.seed, 0xB1A5));
        for (int i = 0; i < 3; ++i) run.bias_est0(i) = rng.uniform(-box, box);
    }

    if (root.contains("montecarlo")) {
        const json& mc = root["montecarlo"];
        check_keys(mc, "montecarlo", {"trials", "init_box", "bias_box"});
        if (mc.contains("trials")) {
            loaded.montecarlo.trials =
                static_cast<int>(unsigned_integer(mc["trials"], "montecarlo.trials"));
        }
        if (mc.contains("init_box")) {
            loaded.montecarlo.init_box = number(mc["init_box"], "montecarlo.init_box");
        }
        if (mc.contains("bias_box")) {
            loaded.montecarlo.bias_box = number(mc["bias_box"], "montecarlo.bias_box");
        }
    }

    if (root.contains("output")) {
        const json& out = root["output"];
        check_keys(out, "output", {"csv", "summary"});
        if (out.contains("csv")) loaded.output.csv = out["csv"].get<std::string>();
        if (out.contains("summary")) loaded.output.summary = out["summary"].get<std::string>();
    }

    try {
        run.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    return loaded;
}

inline LoadedConfig load_config(const std::string& path,
                                std::optional<std::uint64_t> seed_override = {}) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path);
    }
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: JSON parse error in " + path + ": " + e.what());
    }
    return parse_config(root, seed_override);
}

}  // namespace gyrobs
