#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gyrobs/lyapunov.hpp"
#include "test_support.hpp"

using gyrobs::ErrorState;
using gyrobs::Gains;
using gyrobs::LyapunovCertificate;
using gyrobs::Matrix3;
using gyrobs::SignalBounds;
using gyrobs::Vector3;
namespace ts = test_support;

namespace {

// The three comparison matrices, rebuilt from their printed entries so the
// library's assembly is cross-checked, not reused.
struct ComparisonMatrices {
    Eigen::Matrix2d m1, m2, m3;
};

ComparisonMatrices rebuild(const LyapunovCertificate& c) {
    const double g = c.signal_norm;
    const double off_sandwich = (std::sqrt(2.0) / 2.0) * c.epsilon * g;
    ComparisonMatrices out;
    out.m1 << 0.5, -off_sandwich, -off_sandwich, 1.0 / c.gains.ki;
    out.m2 << 0.5, off_sandwich, off_sandwich, 1.0 / c.gains.ki;
    const double b = c.bounds.combined();
    const double off_diss = -0.5 * c.epsilon * (std::sqrt(2.0) * c.gains.kp + 6.0 * b) * g;
    out.m3 << c.gains.kp - c.epsilon * c.gains.ki * g * g, off_diss,
              off_diss, 2.0 * c.epsilon * c.lambda_min_gram;
    return out;
}

// Generalized eigenvalues of (a, b) through Eigen's solver, b positive
// definite. Independent of the closed-form route inside the library.
std::pair<double, double> gen_eig_oracle(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> solver(a, b);
    return {solver.eigenvalues()(0), solver.eigenvalues()(1)};
}

LyapunovCertificate sample_certificate(gyrobs::Rng& rng) {
    for (;;) {
        const Matrix3 g = Matrix3::Identity() + 0.5 * ts::random_box_matrix(rng);
        if (gyrobs::lambda_min_sym(g.transpose() * g) < 0.05) continue;
        const Gains gains(rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0));
        const SignalBounds bounds(rng.uniform(0.0, 1.5), rng.uniform(0.0, 0.5));
        return gyrobs::make_certificate(g, gains, bounds);
    }
}

}  // namespace

TEST_CASE("signal bounds validate and combine by maximum") {
    REQUIRE(SignalBounds(1.0, 2.0).combined() == Catch::Approx(2.0));
    REQUIRE(SignalBounds(3.0, 0.5).combined() == Catch::Approx(3.0));
    REQUIRE_THROWS_AS(SignalBounds(-0.1, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(SignalBounds(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("epsilon worked example: identity signal, unit gains, no disturbance") {
    // bound1 = 1/sqrt(3), bound2 = 4 / (3 (4 + 1)) = 4/15; half the min is 2/15.
    const double eps = gyrobs::compute_epsilon(Matrix3::Identity(), Gains(1.0, 1.0),
                                               SignalBounds(0.0, 0.0));
    REQUIRE(eps == Catch::Approx(2.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("epsilon sits strictly inside the positive definite region") {
    gyrobs::Rng rng(401);
    for (int i = 0; i < 100; ++i) {
        LyapunovCertificate cert = sample_certificate(rng);
        // Feasible as constructed.
        REQUIRE_NOTHROW(gyrobs::certificate_rates(cert));
        const auto cm = rebuild(cert);
        REQUIRE(cm.m1.determinant() > 0.0);
        REQUIRE(cm.m3.determinant() > 0.0);

        // The admissible region ends at exactly twice the chosen epsilon:
        // just beyond it one comparison matrix loses definiteness.
        LyapunovCertificate past = cert;
        past.epsilon = 2.001 * cert.epsilon;
        REQUIRE_THROWS_AS(gyrobs::certificate_rates(past), std::domain_error);

        LyapunovCertificate inside = cert;
        inside.epsilon = 1.999 * cert.epsilon;
        REQUIRE_NOTHROW(gyrobs::certificate_rates(inside));
    }
    // Degenerate signal is rejected outright.
    REQUIRE_THROWS_AS(gyrobs::compute_epsilon(Matrix3::Zero(), Gains(1, 1), SignalBounds()),
                      std::invalid_argument);
}

TEST_CASE("alpha and beta match a generalized eigenvalue oracle") {
    gyrobs::Rng rng(402);
    for (int i = 0; i < 200; ++i) {
        const LyapunovCertificate cert = sample_certificate(rng);
        const auto cm = rebuild(cert);
        const double alpha_want = gen_eig_oracle(cm.m2, cm.m1).second;
        const double beta_want = gen_eig_oracle(cm.m3, cm.m2).first;
        REQUIRE(cert.alpha == Catch::Approx(alpha_want).epsilon(1e-9));
        REQUIRE(cert.beta == Catch::Approx(beta_want).epsilon(1e-9));
        REQUIRE(cert.alpha >= 1.0);
        REQUIRE(cert.beta > 0.0);
        REQUIRE(cert.error_rate == Catch::Approx(0.5 * cert.beta));

        // alpha certifies V2 <= alpha V1 and beta certifies V3 >= beta V2 on
        // a grid of directions.
        for (int k = 0; k < 32; ++k) {
            const double phi = 2.0 * M_PI * k / 32.0;
            const Eigen::Vector2d x(std::cos(phi), std::sin(phi));
            const double v1 = x.dot(cm.m1 * x);
            const double v2 = x.dot(cm.m2 * x);
            const double v3 = x.dot(cm.m3 * x);
            if (x(0) >= 0.0 && x(1) >= 0.0) {
                // Error norms live in the first quadrant.
                REQUIRE(v2 <= cert.alpha * v1 + 1e-12);
                REQUIRE(v3 >= cert.beta * v2 - 1e-12);
            }
        }
    }
}

TEST_CASE("alpha tends to one and the prefactor to its loose limit as eps vanishes") {
    LyapunovCertificate cert;
    cert.gains = Gains(1.0, 2.0);
    cert.bounds = SignalBounds(0.0, 0.0);
    cert.signal_norm = std::sqrt(3.0);
    cert.lambda_min_gram = 1.0;
    cert.epsilon = 1e-12;
    auto [alpha, beta] = gyrobs::certificate_rates(cert);
    cert.alpha = alpha;
    cert.beta = beta;
    REQUIRE(alpha == Catch::Approx(1.0).margin(1e-8));
    // ki = 2 makes m1 -> diag(1/2, 1/2), so c_lo = 1/2, c_hi = 1/sqrt(2)
    // and C -> sqrt(2).
    REQUIRE(gyrobs::prefactor(cert) == Catch::Approx(std::sqrt(2.0)).margin(1e-6));
}

TEST_CASE("prefactor bounds the 1-norm equivalence constants") {
    gyrobs::Rng rng(403);
    for (int i = 0; i < 100; ++i) {
        const LyapunovCertificate cert = sample_certificate(rng);
        const auto cm = rebuild(cert);
        // sqrt(V1) is a norm on (x1, x2); C = sqrt(alpha) c_hi / c_lo with
        // the 1-norm equivalence constants. Verify the claimed constants on
        // a quadrant sweep.
        double worst_lo = 1e300, worst_hi = 0.0;
        for (int k = 0; k <= 64; ++k) {
            const double phi = 0.5 * M_PI * k / 64.0;
            const Eigen::Vector2d x(std::cos(phi), std::sin(phi));
            const double s = std::sqrt(x.dot(cm.m1 * x)) / (x(0) + x(1));
            worst_lo = std::min(worst_lo, s);
            worst_hi = std::max(worst_hi, s);
        }
        const double c_lo = std::sqrt((cm.m1.trace()
                                       - std::sqrt(cm.m1.trace() * cm.m1.trace()
                                                   - 4.0 * cm.m1.determinant())) / 2.0)
                          / std::sqrt(2.0);
        const double c_hi = std::sqrt((cm.m1.trace()
                                       + std::sqrt(cm.m1.trace() * cm.m1.trace()
                                                   - 4.0 * cm.m1.determinant())) / 2.0);
        REQUIRE(worst_lo >= c_lo - 1e-12);
        REQUIRE(worst_hi <= c_hi + 1e-12);
        REQUIRE(cert.error_prefactor == Catch::Approx(std::sqrt(cert.alpha) * c_hi / c_lo)
                                            .epsilon(1e-9));
    }
}

TEST_CASE("larger disturbance bounds weaken the certificate") {
    const Matrix3 g = Matrix3::Identity();
    const Gains gains(1.0, 1.0);
    const auto calm = gyrobs::make_certificate(g, gains, SignalBounds(0.0, 0.0));
    const auto stormy = gyrobs::make_certificate(g, gains, SignalBounds(2.0, 0.5));
    REQUIRE(stormy.epsilon < calm.epsilon);
    REQUIRE(stormy.beta < calm.beta);
    REQUIRE(stormy.beta > 0.0);
}

TEST_CASE("lyapunov value is sandwiched by the comparison quadratics") {
    gyrobs::Rng rng(404);
    for (int i = 0; i < 100; ++i) {
        const LyapunovCertificate cert = sample_certificate(rng);
        // Recover a G with the certified constants: any G with matching
        // norm and gram floor works; reuse the certificate's numbers by
        // sampling G directly and rebuilding the certificate.
        const Matrix3 g = Matrix3::Identity() + 0.5 * ts::random_box_matrix(rng);
        if (gyrobs::lambda_min_sym(g.transpose() * g) < 0.05) continue;
        const auto cert_g = gyrobs::make_certificate(g, cert.gains, cert.bounds);

        for (double scale : {1e-3, 1.0, 50.0}) {
            ErrorState err;
            err.signal_error = scale * ts::random_box_matrix(rng, 2.0);
            err.bias_error = scale * ts::random_box_vector(rng);
            const Matrix3 a = g * gyrobs::random_rotation(rng).matrix();
            const double v = gyrobs::lyapunov_value(err, a, cert_g);
            const auto forms = gyrobs::quadratic_forms(err.signal_error.norm(),
                                                       err.bias_error.norm(), cert_g);
            const double wiggle = 1e-12 * std::max(1.0, forms[1]);
            REQUIRE(v >= forms[0] - wiggle);
            REQUIRE(v <= forms[1] + wiggle);
            REQUIRE(forms[0] > -wiggle);
        }
    }
}

TEST_CASE("analytic derivative matches a finite difference of the error flow") {
    gyrobs::Rng rng(405);
    for (int i = 0; i < 60; ++i) {
        const Matrix3 g = Matrix3::Identity() + 0.4 * ts::random_box_matrix(rng);
        if (gyrobs::lambda_min_sym(g.transpose() * g) < 0.05) continue;
        const Gains gains(rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0));
        const SignalBounds bounds(1.5, 0.5);
        const auto cert = gyrobs::make_certificate(g, gains, bounds);

        const Vector3 omega = ts::random_box_vector(rng, 0.8);
        const Vector3 bias = ts::random_box_vector(rng, 0.25);
        Matrix3 a = g * gyrobs::random_rotation(rng).matrix();
        ErrorState err;
        err.signal_error = ts::random_box_matrix(rng, 1.5);
        err.bias_error = ts::random_box_vector(rng);

        // Error-state flow for frozen omega and bias (their variation is
        // second order over the stencil width).
        auto flow = [&](Matrix3 e_mat, Vector3 e_b, Matrix3 sig, double h) {
            // One RK4 step of the coupled (E, e, A) dynamics.
            auto deriv = [&](const Matrix3& em, const Vector3& eb, const Matrix3& s) {
                return std::make_tuple(
                    Matrix3(em * (gyrobs::hat(omega) + gyrobs::hat(bias)) - s * gyrobs::hat(eb)
                            - gains.kp * em),
                    Vector3(gains.ki * gyrobs::vee_skew(s.transpose() * em)),
                    Matrix3(s * gyrobs::hat(omega)));
            };
            auto [k1e, k1b, k1s] = deriv(e_mat, e_b, sig);
            auto [k2e, k2b, k2s] = deriv(e_mat + 0.5 * h * k1e, e_b + 0.5 * h * k1b, sig + 0.5 * h * k1s);
            auto [k3e, k3b, k3s] = deriv(e_mat + 0.5 * h * k2e, e_b + 0.5 * h * k2b, sig + 0.5 * h * k2s);
            auto [k4e, k4b, k4s] = deriv(e_mat + h * k3e, e_b + h * k3b, sig + h * k3s);
            ErrorState out;
            out.signal_error = e_mat + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
            out.bias_error = e_b + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            Matrix3 sig_out = sig + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
            return std::make_pair(out, sig_out);
        };

        const double h = 1e-5;
        const auto [err_f, sig_f] = flow(err.signal_error, err.bias_error, a, h);
        const auto [err_b, sig_b] = flow(err.signal_error, err.bias_error, a, -h);
        const double fd = (gyrobs::lyapunov_value(err_f, sig_f, cert)
                           - gyrobs::lyapunov_value(err_b, sig_b, cert)) / (2.0 * h);
        const double analytic = gyrobs::lyapunov_derivative_analytic(err, a, omega, bias, cert);
        REQUIRE(fd == Catch::Approx(analytic).margin(1e-5 * std::max(1.0, std::abs(analytic))));
    }
}

TEST_CASE("analytic derivative is dominated by -beta V under the bounds") {
    gyrobs::Rng rng(406);
    const Matrix3 g = Matrix3::Identity();
    const Gains gains(2.5, 3.0);
    const SignalBounds bounds(1.0, 0.3);
    const auto cert = gyrobs::make_certificate(g, gains, bounds);
    for (int i = 0; i < 2000; ++i) {
        ErrorState err;
        const double scale = std::pow(10.0, rng.uniform(-3.0, 1.0));
        err.signal_error = scale * ts::random_box_matrix(rng, 1.0);
        err.bias_error = scale * ts::random_box_vector(rng);
        const Matrix3 a = g * gyrobs::random_rotation(rng).matrix();
        Vector3 omega = ts::random_box_vector(rng);
        if (omega.norm() > 0.0) omega *= rng.uniform(0.0, bounds.omega_bound) / omega.norm();
        Vector3 bias = ts::random_box_vector(rng);
        if (bias.norm() > 0.0) bias *= rng.uniform(0.0, bounds.bias_bound) / bias.norm();

        const double v = gyrobs::lyapunov_value(err, a, cert);
        const double dv = gyrobs::lyapunov_derivative_analytic(err, a, omega, bias, cert);
        REQUIRE(dv <= -cert.beta * v + 1e-9);
    }
}

TEST_CASE("verify_decay accepts a certified run and reports tight ratios") {
    const auto cert = gyrobs::make_certificate(Matrix3::Identity(), Gains(1.0, 1.0),
                                               SignalBounds(0.5, 0.2));
    std::vector<double> t, v, n;
    for (int k = 0; k <= 200; ++k) {
        const double tk = 0.05 * k;
        t.push_back(tk);
        v.push_back(3.0 * std::exp(-cert.beta * tk));
        n.push_back(2.0 * std::exp(-cert.error_rate * tk));
    }
    const auto report = gyrobs::verify_decay(t, v, n, cert);
    REQUIRE(report.passed);
    REQUIRE(report.first_violation == -1);
    REQUIRE(report.samples_checked == 201);
    REQUIRE(report.max_value_ratio <= 1.0 + 1e-9);
    REQUIRE(report.max_norm_ratio <= 1.0 + 1e-9);
}

TEST_CASE("verify_decay flags a corrupted sample at its index") {
    const auto cert = gyrobs::make_certificate(Matrix3::Identity(), Gains(1.0, 1.0),
                                               SignalBounds(0.5, 0.2));
    std::vector<double> t, v, n;
    for (int k = 0; k <= 100; ++k) {
        const double tk = 0.05 * k;
        t.push_back(tk);
        v.push_back(3.0 * std::exp(-cert.beta * tk));
        n.push_back(2.0 * std::exp(-cert.error_rate * tk));
    }
    auto bad_v = v;
    bad_v[60] *= 1.10;  // ten percent inflation at one sample
    const auto report = gyrobs::verify_decay(t, bad_v, n, cert);
    REQUIRE_FALSE(report.passed);
    REQUIRE(report.first_violation == 60);
}

TEST_CASE("verify_decay catches a bump hidden under the global envelope") {
    const auto cert = gyrobs::make_certificate(Matrix3::Identity(), Gains(1.0, 1.0),
                                               SignalBounds(0.5, 0.2));
    std::vector<double> t, v, n;
    for (int k = 0; k <= 100; ++k) {
        const double tk = 0.05 * k;
        t.push_back(tk);
        // Decays twice as fast as required, so there is slack under the
        // global envelope.
        v.push_back(3.0 * std::exp(-2.0 * cert.beta * tk));
        n.push_back(2.0 * std::exp(-cert.error_rate * tk));
    }
    // The run has decayed by e^{-beta t50} relative to the envelope by sample
    // 50, so a bump below that ratio stays under the global bound.
    auto bad_v = v;
    for (std::size_t k = 50; k < bad_v.size(); ++k) bad_v[k] *= 1.1;
    REQUIRE(bad_v[50] <= v.front() * std::exp(-cert.beta * t[50]));
    const auto report = gyrobs::verify_decay(t, bad_v, n, cert);
    REQUIRE_FALSE(report.passed);
    REQUIRE(report.first_violation == 50);
}

TEST_CASE("verify_decay tolerates an exactly converged run") {
    const auto cert = gyrobs::make_certificate(Matrix3::Identity(), Gains(1.0, 1.0),
                                               SignalBounds(0.0, 0.0));
    std::vector<double> t{0.0, 0.1, 0.2}, v{0.0, 0.0, 0.0}, n{0.0, 0.0, 0.0};
    const auto report = gyrobs::verify_decay(t, v, n, cert);
    REQUIRE(report.passed);
    REQUIRE(report.max_value_ratio == 0.0);
}

TEST_CASE("verify_decay validates series shape") {
    const auto cert = gyrobs::make_certificate(Matrix3::Identity(), Gains(1.0, 1.0),
                                               SignalBounds(0.0, 0.0));
    std::vector<double> t{0.0, 0.1}, v{1.0}, n{1.0, 0.5};
    REQUIRE_THROWS_AS(gyrobs::verify_decay(t, v, n, cert), std::invalid_argument);
    std::vector<double> empty;
    REQUIRE_THROWS_AS(gyrobs::verify_decay(empty, empty, empty, cert), std::invalid_argument);
}
