// Simulation harness: co-integrates truth and observer with a fixed-step
// classical Runge-Kutta scheme, records error metrics and certificate
// values per sample, fits exponential decay rates, runs Monte Carlo sweeps
// over observer initial conditions, and compares the proposed observer
// against the Mahony-style baseline on a shared truth trajectory.
//
// Integration contract: truth and observer form one coupled ODE whose
// measurements are evaluated at the integrator's substep states and times,
// so an exact-equilibrium initialization stays at equilibrium to roundoff
// and the scheme keeps its fourth-order convergence. Noise, when enabled,
// is sampled once per step and held across the step's substeps. The truth
// attitude is re-projected onto SO(3) once per step; the observer state is
// never projected (its state space really is R^{3x3} x R^3); the baseline's
// attitude is re-projected because its state space is the group.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dynamics.hpp"
#include "lyapunov.hpp"
#include "matrix_lie.hpp"
#include "observers.hpp"
#include "rng.hpp"

namespace gyrobs {

inline constexpr double kMaxStep = 0.1;

// States beyond this norm are treated as divergent. Well-posed runs stay
// within a few multiples of the signal-matrix norm plus the initial draw.
inline constexpr double kDivergenceNorm = 1e12;

// Thrown when an integrated state stops being finite.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    double duration_s = 30.0;
    double step_s = 0.02;
    AngularVelocityProfile profile = AngularVelocityProfile::constant(Vector3::Zero());
    GyroModel gyro;
    ObserverVariant variant;
    Gains gains;
    Rotation3 attitude0;
    Matrix3 signal_est0 = Matrix3::Zero();
    Vector3 bias_est0 = Vector3::Zero();
    double vector_noise_std = 0.0;  // body-vector measurement noise
    std::uint64_t seed = 0;         // stream for vector measurement noise
    bool attach_certificate = true;

    void validate() const {
        if (!(duration_s > 0.0)) {
            throw std::invalid_argument("run config: duration must be positive");
        }
        if (!(step_s > 0.0) || step_s > kMaxStep) {
            throw std::invalid_argument("run config: step must be in (0, 0.1]");
        }
    }
};

struct RunRecord {
    std::vector<double> t;
    std::vector<double> signal_error;          // ||A - Abar||
    std::vector<double> bias_error;            // ||b - bbar||
    std::vector<double> attitude_error;        // ||R - G^{-1} Abar||
    std::vector<double> attitude_error_polar;  // ||R - polar(G^{-1} Abar)||, nan if degenerate
    std::vector<double> value;                 // V, nan without certificate
    std::vector<double> value_bound;           // V(0) e^{-beta t}, nan without certificate

    std::optional<LyapunovCertificate> certificate;
    Rotation3 final_attitude;
    Vector3 final_bias = Vector3::Zero();
    Matrix3 final_signal_est = Matrix3::Zero();
    Vector3 final_bias_est = Vector3::Zero();

    std::size_t samples() const { return t.size(); }
};

struct ErrorMetrics {
    double signal_error = 0.0;
    double bias_error = 0.0;
    double attitude_error = 0.0;
    double attitude_error_polar = std::numeric_limits<double>::quiet_NaN();
};

// Error norms of an observer state against the truth. The attitude errors
// are read out through G: the raw one from G^{-1} Abar, the polar one from
// its nearest rotation when that exists.
inline ErrorMetrics error_metrics(const TrueState& truth, const ObserverState& state,
                                  const Matrix3& g) {
    ErrorMetrics m;
    const Matrix3 signal = g * truth.attitude.matrix();
    m.signal_error = (signal - state.signal_est).norm();
    m.bias_error = (truth.gyro_bias - state.bias_est).norm();
    const AttitudeEstimate est = attitude_estimate(state, g);
    m.attitude_error = (truth.attitude.matrix() - est.raw).norm();
    if (!est.degenerate()) {
        m.attitude_error_polar = (truth.attitude.matrix() - est.rotation->matrix()).norm();
    }
    return m;
}

namespace detail {

struct FlowState {
    Matrix3 attitude;  // truth R, re-projected per step
    Matrix3 est;       // Abar, or the baseline's attitude estimate
    Vector3 bias_est;
};

struct FlowDerivative {
    Matrix3 attitude_dot;
    Matrix3 est_dot;
    Vector3 bias_dot;
};

inline FlowState flow_add(const FlowState& s, const FlowDerivative& d, double h) {
    return {s.attitude + h * d.attitude_dot, s.est + h * d.est_dot, s.bias_est + h * d.bias_dot};
}

}  // namespace detail

inline RunRecord integrate_run(const RunConfig& cfg) {
    cfg.validate();
    const bool baseline = cfg.variant.kind() == ObserverKind::MahonyBaseline;
    const double h = cfg.step_s;
    const long n_steps = std::lround(cfg.duration_s / h);
    if (n_steps < 1) {
        throw std::invalid_argument("run config: duration shorter than one step");
    }

    RunRecord rec;
    rec.t.reserve(n_steps + 1);

    detail::FlowState state;
    state.attitude = cfg.attitude0.matrix();
    state.bias_est = cfg.bias_est0;
    if (baseline) {
        // The baseline starts from the attitude read-out of the proposed
        // initial estimate so comparisons share initial conditions; a
        // degenerate read-out falls back to the identity.
        const Matrix3 g0 = cfg.variant.G(0.0);
        const Matrix3 raw = g0.lu().solve(cfg.signal_est0);
        state.est = std::abs(raw.determinant()) > kSingularTol
                        ? polar_rotation_factor(raw).matrix()
                        : Matrix3::Identity();
    } else {
        state.est = cfg.signal_est0;
    }

    if (!baseline && cfg.attach_certificate && cfg.variant.has_certificate()) {
        rec.certificate = make_certificate(
            cfg.variant.G(0.0), cfg.variant.base_equivalent_gains(cfg.gains),
            SignalBounds(cfg.profile.bound(), cfg.gyro.bias.norm()));
    }

    const bool scene_based = cfg.variant.uses_scene();
    const bool noisy_vectors = scene_based && cfg.vector_noise_std > 0.0;

    // Noise held across one step's substeps.
    Vector3 held_gyro_noise = Vector3::Zero();
    Eigen::Matrix3Xd held_vector_noise;
    if (noisy_vectors) {
        held_vector_noise.resize(3, cfg.variant.scene().count());
        held_vector_noise.setZero();
    }

    auto evaluate = [&](double t, const detail::FlowState& s) -> detail::FlowDerivative {
        detail::FlowDerivative d;
        const Vector3 omega = cfg.profile.omega(t);
        d.attitude_dot = s.attitude * hat(omega);
        const Vector3 omega_meas = omega + cfg.gyro.bias + held_gyro_noise;

        if (scene_based) {
            Eigen::Matrix3Xd measured =
                s.attitude.transpose() * cfg.variant.scene().directions();
            if (noisy_vectors) {
                for (Eigen::Index i = 0; i < measured.cols(); ++i) {
                    const bool unit = std::abs(measured.col(i).norm() - 1.0) <= 1e-9;
                    measured.col(i) += held_vector_noise.col(i);
                    const double n = measured.col(i).norm();
                    if (unit && n > 1e-12) measured.col(i) /= n;
                }
            }
            if (baseline) {
                const StateDerivative sd = mahony_derivative(
                    {s.est, s.bias_est}, omega_meas, cfg.variant.scene(), measured, cfg.gains);
                d.est_dot = sd.est_dot;
                d.bias_dot = sd.bias_dot;
            } else {
                SignalSample sample;
                sample.omega_meas = omega_meas;
                sample.measured = measured;
                const StateDerivative sd =
                    observer_derivative(cfg.variant, {s.est, s.bias_est}, sample, cfg.gains);
                d.est_dot = sd.est_dot;
                d.bias_dot = sd.bias_dot;
            }
        } else {
            SignalSample sample;
            sample.omega_meas = omega_meas;
            sample.g = cfg.variant.G(t);
            sample.g_dot = cfg.variant.G_dot(t);
            sample.signal = sample.g * s.attitude;
            const StateDerivative sd =
                observer_derivative(cfg.variant, {s.est, s.bias_est}, sample, cfg.gains);
            d.est_dot = sd.est_dot;
            d.bias_dot = sd.bias_dot;
        }
        return d;
    };

    double value0 = std::numeric_limits<double>::quiet_NaN();

    auto record_sample = [&](long k) {
        const double t = k * h;
        const Rotation3 attitude{state.attitude};
        const TrueState truth{attitude, cfg.gyro.bias};
        rec.t.push_back(t);
        if (baseline) {
            const Matrix3 g = cfg.variant.G(t);
            rec.signal_error.push_back((g * (state.attitude - state.est)).norm());
            rec.bias_error.push_back((cfg.gyro.bias - state.bias_est).norm());
            const double att_err = (state.attitude - state.est).norm();
            rec.attitude_error.push_back(att_err);
            rec.attitude_error_polar.push_back(att_err);
            rec.value.push_back(std::numeric_limits<double>::quiet_NaN());
            rec.value_bound.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            const Matrix3 g = cfg.variant.G(t);
            const ErrorMetrics m = error_metrics(truth, {state.est, state.bias_est}, g);
            rec.signal_error.push_back(m.signal_error);
            rec.bias_error.push_back(m.bias_error);
            rec.attitude_error.push_back(m.attitude_error);
            rec.attitude_error_polar.push_back(m.attitude_error_polar);
            if (rec.certificate) {
                ErrorState err;
                err.signal_error = g * state.attitude - state.est;
                err.bias_error = cfg.gyro.bias - state.bias_est;
                const double v =
                    lyapunov_value(err, g * state.attitude, *rec.certificate);
                if (rec.t.size() == 1) value0 = v;
                rec.value.push_back(v);
                rec.value_bound.push_back(value0 * std::exp(-rec.certificate->beta * t));
            } else {
                rec.value.push_back(std::numeric_limits<double>::quiet_NaN());
                rec.value_bound.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
    };

    record_sample(0);

    Rng vector_noise_rng(derive_seed(cfg.seed, 0x76656374));

    for (long k = 0; k < n_steps; ++k) {
        const double t0 = k * h;
        held_gyro_noise = cfg.gyro.noise_at(t0);
        if (noisy_vectors) {
            for (Eigen::Index i = 0; i < held_vector_noise.cols(); ++i) {
                held_vector_noise.col(i) =
                    cfg.vector_noise_std * random_gaussian_vector(vector_noise_rng);
            }
        }

        const detail::FlowDerivative k1 = evaluate(t0, state);
        const detail::FlowDerivative k2 = evaluate(t0 + 0.5 * h, detail::flow_add(state, k1, 0.5 * h));
        const detail::FlowDerivative k3 = evaluate(t0 + 0.5 * h, detail::flow_add(state, k2, 0.5 * h));
        const detail::FlowDerivative k4 = evaluate(t0 + h, detail::flow_add(state, k3, h));

        state.attitude += (h / 6.0) * (k1.attitude_dot + 2.0 * k2.attitude_dot
                                     + 2.0 * k3.attitude_dot + k4.attitude_dot);
        state.est += (h / 6.0) * (k1.est_dot + 2.0 * k2.est_dot + 2.0 * k3.est_dot + k4.est_dot);
        state.bias_est += (h / 6.0) * (k1.bias_dot + 2.0 * k2.bias_dot + 2.0 * k3.bias_dot
                                     + k4.bias_dot);

        state.attitude = polar_rotation_factor(state.attitude).matrix();
        if (baseline) {
            state.est = polar_rotation_factor(state.est).matrix();
        }

        if (!state.est.allFinite() || !state.bias_est.allFinite() || !state.attitude.allFinite()
            || state.est.norm() > kDivergenceNorm || state.bias_est.norm() > kDivergenceNorm) {
            throw DivergenceError("run diverged: unbounded state");
        }

        record_sample(k + 1);
    }

    rec.final_attitude = Rotation3(state.attitude);
    rec.final_bias = cfg.gyro.bias;
    rec.final_signal_est = state.est;
    rec.final_bias_est = state.bias_est;
    return rec;
}

struct RateFit {
    double rate = 0.0;       // a in y ~ amplitude * exp(-a t)
    double amplitude = 0.0;
    double residual_rms = 0.0;  // RMS of log-domain residuals
    int samples_used = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
};

// Least-squares fit of log y against t over the samples with y inside
// [floor, ceiling]. The window cuts off the initial transient (above) and
// the roundoff floor (below) when the caller passes finite limits.
inline RateFit fit_exponential_rate(std::span<const double> t, std::span<const double> y,
                                    double floor = 1e-12,
                                    double ceiling = std::numeric_limits<double>::infinity()) {
    if (t.size() != y.size()) {
        throw std::invalid_argument("rate fit: series length mismatch");
    }
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    int n = 0;
    double t_begin = 0.0, t_end = 0.0;
    std::vector<std::pair<double, double>> used;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(y[i] >= floor) || !(y[i] <= ceiling)) continue;
        const double ly = std::log(y[i]);
        if (n == 0) t_begin = t[i];
        t_end = t[i];
        st += t[i];
        sy += ly;
        stt += t[i] * t[i];
        sty += t[i] * ly;
        used.emplace_back(t[i], ly);
        ++n;
    }
    if (n < 2) {
        throw std::runtime_error("rate fit: insufficient decay data in window");
    }
    const double denom = n * stt - st * st;
    double slope = 0.0;
    double intercept = sy / n;
    if (denom > 0.0) {
        slope = (n * sty - st * sy) / denom;
        intercept = (sy - slope * st) / n;
    }
    RateFit fit;
    fit.rate = -slope;
    fit.amplitude = std::exp(intercept);
    fit.samples_used = n;
    fit.t_begin = t_begin;
    fit.t_end = t_end;
    double ss = 0.0;
    for (const auto& [ti, lyi] : used) {
        const double r = lyi - (intercept + slope * ti);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / n);
    return fit;
}

// Fit window used by the convergence analyses: below the transient, above
// the roundoff floor.
inline constexpr double kFitCeiling = 1e-2;
inline constexpr double kFitFloor = 1e-10;

struct TrialResult {
    std::uint64_t seed = 0;
    bool converged = false;
    double final_error = 0.0;  // ||E_A|| + ||e_b|| at the end
    double rate = 0.0;
    double max_value_ratio = 0.0;
    bool decay_ok = true;
};

struct MonteCarloSummary {
    int trials = 0;
    double fraction_converged = 0.0;
    double rate_min = 0.0;
    double rate_median = 0.0;
    double rate_max = 0.0;
    int decay_violations = 0;
    double convergence_threshold = 1e-6;
    std::vector<TrialResult> results;
};

// Sweeps observer initial conditions: Abar(0) entries uniform in
// [-init_box, init_box], bbar(0) entries uniform in [-bias_box, bias_box].
// Each trial derives its own seed from the base config's seed, so results
// do not depend on execution order.
inline MonteCarloSummary monte_carlo_global(const RunConfig& base, int n_trials, double init_box,
                                            double bias_box = 1.0,
                                            double convergence_threshold = 1e-6) {
    if (n_trials < 1) {
        throw std::invalid_argument("monte carlo: need at least one trial");
    }
    if (!(init_box > 0.0) || !(bias_box > 0.0)) {
        throw std::invalid_argument("monte carlo: boxes must be positive");
    }
    MonteCarloSummary summary;
    summary.trials = n_trials;
    summary.convergence_threshold = convergence_threshold;
    summary.results.reserve(n_trials);

    std::vector<double> rates;
    int converged_count = 0;
    for (int trial = 0; trial < n_trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(base.seed, static_cast<std::uint64_t>(trial));
        Rng rng(trial_seed);

        RunConfig cfg = base;
        cfg.seed = derive_seed(trial_seed, 1);
        cfg.gyro.seed = derive_seed(trial_seed, 2);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cfg.signal_est0(r, c) = rng.uniform(-init_box, init_box);
        for (int i = 0; i < 3; ++i) cfg.bias_est0(i) = rng.uniform(-bias_box, bias_box);

        TrialResult result;
        result.seed = trial_seed;
        try {
            const RunRecord rec = integrate_run(cfg);
            result.final_error = rec.signal_error.back() + rec.bias_error.back();
            result.converged = result.final_error < convergence_threshold;
            std::vector<double> sum(rec.samples());
            for (std::size_t i = 0; i < rec.samples(); ++i) {
                sum[i] = rec.signal_error[i] + rec.bias_error[i];
            }
            result.rate = fit_exponential_rate(rec.t, sum, kFitFloor, kFitCeiling).rate;
            if (rec.certificate) {
                const DecayReport report =
                    verify_decay(rec.t, rec.value, sum, *rec.certificate);
                result.decay_ok = report.passed;
                result.max_value_ratio = report.max_value_ratio;
            }
        } catch (const std::exception&) {
            result.converged = false;
            result.decay_ok = false;
        }
        if (result.converged) ++converged_count;
        if (!result.decay_ok) ++summary.decay_violations;
        if (result.converged) rates.push_back(result.rate);
        summary.results.push_back(result);
    }

    summary.fraction_converged = static_cast<double>(converged_count) / n_trials;
    if (!rates.empty()) {
        std::sort(rates.begin(), rates.end());
        summary.rate_min = rates.front();
        summary.rate_max = rates.back();
        summary.rate_median = rates[rates.size() / 2];
    }
    return summary;
}

struct ThresholdCrossing {
    double threshold = 0.0;
    double t_proposed = -1.0;  // -1: never reached
    double t_baseline = -1.0;
};

struct ComparisonReport {
    RunRecord proposed;
    RunRecord baseline;
    std::vector<ThresholdCrossing> crossings;
    double peak_bias_error_proposed = 0.0;
    double peak_bias_error_baseline = 0.0;
};

// Runs the configured diagonal-form observer and the Mahony-style baseline
// on the same truth trajectory, gains, and initial conditions, and tabulates
// when each drives the polar attitude error below a ladder of thresholds.
inline ComparisonReport compare_observers(const RunConfig& cfg) {
    if (cfg.variant.kind() != ObserverKind::DiagonalForm) {
        throw std::invalid_argument(
            "comparison requires the diagonal vector-measurement form");
    }
    ComparisonReport report;
    report.proposed = integrate_run(cfg);

    RunConfig baseline_cfg = cfg;
    baseline_cfg.variant = ObserverVariant::mahony_baseline(cfg.variant.scene());
    report.baseline = integrate_run(baseline_cfg);

    auto first_below = [](const RunRecord& rec, double threshold) {
        for (std::size_t i = 0; i < rec.samples(); ++i) {
            const double e = rec.attitude_error_polar[i];
            if (std::isfinite(e) && e < threshold) return rec.t[i];
        }
        return -1.0;
    };

    for (const double threshold : {1.0, 0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6}) {
        ThresholdCrossing crossing;
        crossing.threshold = threshold;
        crossing.t_proposed = first_below(report.proposed, threshold);
        crossing.t_baseline = first_below(report.baseline, threshold);
        report.crossings.push_back(crossing);
    }

    report.peak_bias_error_proposed =
        *std::max_element(report.proposed.bias_error.begin(), report.proposed.bias_error.end());
    report.peak_bias_error_baseline =
        *std::max_element(report.baseline.bias_error.begin(), report.baseline.bias_error.end());
    return report;
}

// Decay audit of a recorded run against its own certificate.
inline DecayReport verify_decay(const RunRecord& rec, double slack = 1e-3) {
    if (!rec.certificate) {
        throw std::invalid_argument("verify_decay: run carries no certificate");
    }
    std::vector<double> sum(rec.samples());
    for (std::size_t i = 0; i < rec.samples(); ++i) {
        sum[i] = rec.signal_error[i] + rec.bias_error[i];
    }
    return verify_decay(rec.t, rec.value, sum, *rec.certificate, slack);
}

}  // namespace gyrobs
