// Exponential-convergence certificate for the base observer law.
//
// For gains kp, ki, a constant signal matrix G, and bounds on the angular
// velocity and the bias, a coupling parameter eps is chosen so that
//
//   V(E, e) = 1/2 ||E||^2 + (1/ki) ||e||^2 + eps <E, A hat(e)>
//
// decays along every error trajectory: dV/dt <= -beta V. The certificate
// stores eps together with the comparison constants alpha, beta, the error
// decay rate a = beta/2, and the prefactor C for the norm bound
//
//   ||E(t)|| + ||e(t)|| <= C (||E(0)|| + ||e(0)||) exp(-a t).
//
// Everything reduces to three 2x2 positive definite coefficient matrices in
// the variables (||E||, ||e||):
//
//   m1, m2 for the quadratic sandwich V1 <= V <= V2,
//   m3 for the dissipation bound dV/dt <= -V3,
//
// with alpha and beta the extremal generalized eigenvalues of (m2, m1) and
// (m3, m2). Generalized eigenvalues give the tightest constants expressible
// in this quadratic framework; in particular alpha -> 1 as eps -> 0.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "matrix_lie.hpp"
#include "observers.hpp"

namespace gyrobs {

// Absolute floors for the decay audit, sized to sit far above accumulated
// roundoff in V (squared error norms) and in the error norms themselves,
// and far below any meaningful signal.
inline constexpr double kDecayAtolValue = 1e-18;
inline constexpr double kDecayAtolNorm = 1e-12;
// Stepwise decay is only audited while V is above this fraction of V(0);
// below it the series is roundoff-dominated.
inline constexpr double kDecayStepFloor = 1e-18;

struct SignalBounds {
    double omega_bound = 0.0;
    double bias_bound = 0.0;

    SignalBounds() = default;
    SignalBounds(double omega_b, double bias_b) : omega_bound(omega_b), bias_bound(bias_b) {
        if (!(omega_bound >= 0.0) || !(bias_bound >= 0.0)) {
            throw std::invalid_argument("signal bounds must be non-negative");
        }
    }

    double combined() const { return std::max(omega_bound, bias_bound); }
};

struct ErrorState {
    Matrix3 signal_error = Matrix3::Zero();  // E = A - Abar
    Vector3 bias_error = Vector3::Zero();    // e = b - bbar
};

struct LyapunovCertificate {
    Gains gains;                 // base-law gains the certificate covers
    SignalBounds bounds;
    double signal_norm = 0.0;    // ||G||_F
    double lambda_min_gram = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;          // V2 <= alpha V1
    double beta = 0.0;           // beta V2 <= V3, so dV/dt <= -beta V
    double error_rate = 0.0;     // a = beta / 2
    double error_prefactor = 0.0;
};

namespace detail {

inline double epsilon_from_constants(double signal_norm, double lambda_min, const Gains& gains,
                                     double b_max) {
    if (signal_norm <= 0.0 || lambda_min <= 0.0) {
        throw std::invalid_argument("certificate requires an invertible signal matrix");
    }
    const double bound1 = 1.0 / (signal_norm * std::sqrt(gains.ki));
    const double bracket = gains.kp + 3.0 * std::sqrt(2.0) * b_max;
    const double bound2 = 4.0 * gains.kp * lambda_min
                        / (signal_norm * signal_norm * (4.0 * gains.ki * lambda_min + bracket * bracket));
    return 0.5 * std::min(bound1, bound2);
}

inline Eigen::Matrix2d sandwich_matrix(double epsilon, double signal_norm, double ki, double sign) {
    Eigen::Matrix2d m;
    const double off = sign * (std::sqrt(2.0) / 2.0) * epsilon * signal_norm;
    m << 0.5, off,
         off, 1.0 / ki;
    return m;
}

inline Eigen::Matrix2d dissipation_matrix(double epsilon, double signal_norm, double lambda_min,
                                          const Gains& gains, double b_max) {
    Eigen::Matrix2d m;
    const double off = -0.5 * epsilon * (std::sqrt(2.0) * gains.kp + 6.0 * b_max) * signal_norm;
    m << gains.kp - epsilon * gains.ki * signal_norm * signal_norm, off,
         off, 2.0 * epsilon * lambda_min;
    return m;
}

inline bool positive_definite_2x2(const Eigen::Matrix2d& m) {
    return m(0, 0) > 0.0 && m.determinant() > 0.0;
}

// Roots of det(a - x b) = 0 for symmetric 2x2 a and positive definite b,
// i.e. the generalized eigenvalues of the pair. Always real.
inline std::pair<double, double> generalized_eigenvalues_2x2(const Eigen::Matrix2d& a,
                                                             const Eigen::Matrix2d& b) {
    const double det_b = b.determinant();
    const double det_a = a.determinant();
    const double mixed = a(0, 0) * b(1, 1) + a(1, 1) * b(0, 0) - 2.0 * a(0, 1) * b(0, 1);
    const double disc = std::max(mixed * mixed - 4.0 * det_b * det_a, 0.0);
    const double root = std::sqrt(disc);
    return {(mixed - root) / (2.0 * det_b), (mixed + root) / (2.0 * det_b)};
}

inline std::pair<double, double> eigenvalues_2x2(const Eigen::Matrix2d& m) {
    const double mean = 0.5 * (m(0, 0) + m(1, 1));
    const double radius = std::sqrt(std::max(mean * mean - m.determinant(), 0.0));
    return {mean - radius, mean + radius};
}

}  // namespace detail

// Coupling parameter: half the smaller of the two admissible upper limits,
// so both positive-definiteness conditions hold strictly.
inline double compute_epsilon(const Matrix3& g, const Gains& gains, const SignalBounds& bounds) {
    return detail::epsilon_from_constants(g.norm(), lambda_min_sym(g.transpose() * g), gains,
                                          bounds.combined());
}

// Values of the three comparison quadratics at (x1, x2) = (||E||, ||e||).
inline std::array<double, 3> quadratic_forms(double x1, double x2,
                                             const LyapunovCertificate& cert) {
    const Eigen::Vector2d x(x1, x2);
    const Eigen::Matrix2d m1 =
        detail::sandwich_matrix(cert.epsilon, cert.signal_norm, cert.gains.ki, -1.0);
    const Eigen::Matrix2d m2 =
        detail::sandwich_matrix(cert.epsilon, cert.signal_norm, cert.gains.ki, +1.0);
    const Eigen::Matrix2d m3 = detail::dissipation_matrix(cert.epsilon, cert.signal_norm,
                                                          cert.lambda_min_gram, cert.gains,
                                                          cert.bounds.combined());
    return {x.dot(m1 * x), x.dot(m2 * x), x.dot(m3 * x)};
}

// alpha and beta for a certificate whose epsilon and signal constants are
// already set. Throws when epsilon is outside the admissible range.
inline std::pair<double, double> certificate_rates(const LyapunovCertificate& cert) {
    const Eigen::Matrix2d m1 =
        detail::sandwich_matrix(cert.epsilon, cert.signal_norm, cert.gains.ki, -1.0);
    const Eigen::Matrix2d m2 =
        detail::sandwich_matrix(cert.epsilon, cert.signal_norm, cert.gains.ki, +1.0);
    const Eigen::Matrix2d m3 = detail::dissipation_matrix(cert.epsilon, cert.signal_norm,
                                                          cert.lambda_min_gram, cert.gains,
                                                          cert.bounds.combined());
    if (cert.epsilon <= 0.0 || !detail::positive_definite_2x2(m1) ||
        !detail::positive_definite_2x2(m3)) {
        throw std::domain_error("certificate rates: infeasible epsilon");
    }
    const double alpha = detail::generalized_eigenvalues_2x2(m2, m1).second;
    const double beta = detail::generalized_eigenvalues_2x2(m3, m2).first;
    return {alpha, beta};
}

// Prefactor for the norm decay bound, from the equivalence of the V1 norm
// with the 1-norm on (||E||, ||e||):
//   c_lo (x1 + x2) <= sqrt(V1) <= c_hi (x1 + x2)
// with c_lo = sqrt(lambda_min(m1) / 2) and c_hi = sqrt(lambda_max(m1)),
// giving C = sqrt(alpha) c_hi / c_lo.
inline double prefactor(const LyapunovCertificate& cert) {
    const Eigen::Matrix2d m1 =
        detail::sandwich_matrix(cert.epsilon, cert.signal_norm, cert.gains.ki, -1.0);
    if (!detail::positive_definite_2x2(m1)) {
        throw std::domain_error("prefactor: infeasible epsilon");
    }
    const auto [lo, hi] = detail::eigenvalues_2x2(m1);
    const double c_lo = std::sqrt(lo) / std::sqrt(2.0);
    const double c_hi = std::sqrt(hi);
    return std::sqrt(cert.alpha) * c_hi / c_lo;
}

inline LyapunovCertificate make_certificate(const Matrix3& g, const Gains& gains,
                                            const SignalBounds& bounds) {
    LyapunovCertificate cert;
    cert.gains = gains;
    cert.bounds = bounds;
    cert.signal_norm = g.norm();
    cert.lambda_min_gram = lambda_min_sym(g.transpose() * g);
    cert.epsilon = detail::epsilon_from_constants(cert.signal_norm, cert.lambda_min_gram, gains,
                                                  bounds.combined());
    std::tie(cert.alpha, cert.beta) = certificate_rates(cert);
    cert.error_rate = 0.5 * cert.beta;
    cert.error_prefactor = prefactor(cert);
    if (!(cert.alpha >= 1.0) || !(cert.beta > 0.0) || !(cert.error_prefactor > 0.0)) {
        throw std::domain_error("certificate construction produced invalid constants");
    }
    return cert;
}

// V evaluated at an error state; A is the current measured signal G R.
inline double lyapunov_value(const ErrorState& error, const Matrix3& signal,
                             const LyapunovCertificate& cert) {
    return 0.5 * error.signal_error.squaredNorm()
         + error.bias_error.squaredNorm() / cert.gains.ki
         + cert.epsilon * frobenius_inner(error.signal_error, signal * hat(error.bias_error));
}

// Exact dV/dt along the error dynamics
//   dE/dt = E (hat(omega) + hat(b)) - A hat(e) - kp E
//   de/dt = ki vee(Skew(A^T E))
// with dA/dt = A hat(omega), assembled by the product rule. The audit in the
// test suite checks this against -beta V pointwise.
inline double lyapunov_derivative_analytic(const ErrorState& error, const Matrix3& signal,
                                           const Vector3& omega, const Vector3& bias,
                                           const LyapunovCertificate& cert) {
    const Matrix3& e_mat = error.signal_error;
    const Vector3& e_b = error.bias_error;
    const Matrix3 e_mat_dot = e_mat * (hat(omega) + hat(bias)) - signal * hat(e_b)
                            - cert.gains.kp * e_mat;
    const Vector3 e_b_dot = cert.gains.ki * vee_skew(signal.transpose() * e_mat);
    const Matrix3 signal_dot = signal * hat(omega);
    return frobenius_inner(e_mat, e_mat_dot)
         + (2.0 / cert.gains.ki) * e_b.dot(e_b_dot)
         + cert.epsilon * (frobenius_inner(e_mat_dot, signal * hat(e_b))
                         + frobenius_inner(e_mat, signal_dot * hat(e_b))
                         + frobenius_inner(e_mat, signal * hat(e_b_dot)));
}

struct DecayReport {
    bool passed = true;
    std::ptrdiff_t first_violation = -1;  // sample index, -1 when clean
    double max_value_ratio = 0.0;         // max V(t) / (V(0) e^{-beta t} + atol)
    double max_norm_ratio = 0.0;          // same for the norm bound
    int samples_checked = 0;
};

// Audits a sampled run against the certificate:
//   1. V(t_k) <= V(0) exp(-beta t_k) (1 + slack)
//   2. stepwise, above the roundoff floor:
//      V(t_k) <= V(t_{k-1}) exp(-beta (t_k - t_{k-1})) (1 + slack)
//   3. ||E(t_k)|| + ||e(t_k)|| <= C (||E(0)|| + ||e(0)||) exp(-a t_k) (1 + slack)
// Absolute floors keep runs started at (or decayed to) machine-level error
// from registering spurious violations.
inline DecayReport verify_decay(std::span<const double> t, std::span<const double> value,
                                std::span<const double> error_norm_sum,
                                const LyapunovCertificate& cert, double slack = 1e-3) {
    if (t.size() != value.size() || t.size() != error_norm_sum.size() || t.empty()) {
        throw std::invalid_argument("verify_decay: series length mismatch");
    }
    DecayReport report;
    report.samples_checked = static_cast<int>(t.size());
    const double v0 = value.front();
    const double n0 = error_norm_sum.front();
    const double step_floor = std::max(kDecayAtolValue, v0 * kDecayStepFloor);

    auto flag = [&](std::size_t k) {
        if (report.passed) {
            report.passed = false;
            report.first_violation = static_cast<std::ptrdiff_t>(k);
        }
    };

    for (std::size_t k = 0; k < t.size(); ++k) {
        const double dt = t[k] - t.front();
        const double v_bound = v0 * std::exp(-cert.beta * dt);
        const double v_ratio = value[k] / (v_bound + kDecayAtolValue);
        report.max_value_ratio = std::max(report.max_value_ratio, v_ratio);
        if (v_ratio > 1.0 + slack) flag(k);

        const double n_bound = cert.error_prefactor * n0 * std::exp(-cert.error_rate * dt);
        const double n_ratio = error_norm_sum[k] / (n_bound + kDecayAtolNorm);
        report.max_norm_ratio = std::max(report.max_norm_ratio, n_ratio);
        if (n_ratio > 1.0 + slack) flag(k);

        if (k > 0 && value[k - 1] > step_floor) {
            const double h = t[k] - t[k - 1];
            if (value[k] > value[k - 1] * std::exp(-cert.beta * h) * (1.0 + slack) + kDecayAtolValue) {
                flag(k);
            }
        }
    }
    return report;
}

}  // namespace gyrobs
