// Rigid-body truth model and sensor models: angular velocity profiles, a
// biased gyro, vector-direction scenes with their weighted combinations, and
// the matrix-valued attitude signal those scenes induce.

#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <utility>
#include <vector>

#include "matrix_lie.hpp"
#include "rng.hpp"

namespace gyrobs {

// Minimum eigenvalue of G^T G for a scene or signal matrix to count as
// full rank.
inline constexpr double kSceneRankTol = 1e-9;

struct TrueState {
    Rotation3 attitude;
    Vector3 gyro_bias = Vector3::Zero();
};

// Kinematics of the attitude under body angular velocity omega. The bias is
// constant, so this is the only nontrivial truth derivative.
inline Matrix3 true_state_derivative(const TrueState& state, const Vector3& omega) {
    return state.attitude.matrix() * hat(omega);
}

// Bounded angular velocity profile omega(t) with a known sup-norm bound.
class AngularVelocityProfile {
public:
    enum class Kind { Constant, Sinusoidal, Piecewise };

    static AngularVelocityProfile constant(const Vector3& value) {
        AngularVelocityProfile p;
        p.kind_ = Kind::Constant;
        p.amplitude_ = value;
        p.bound_ = value.norm();
        return p;
    }

    // omega_i(t) = amplitude_i * sin(2 pi frequency_i t + phase_i)
    static AngularVelocityProfile sinusoidal(const Vector3& amplitude,
                                             const Vector3& frequency_hz,
                                             const Vector3& phase_rad) {
        AngularVelocityProfile p;
        p.kind_ = Kind::Sinusoidal;
        p.amplitude_ = amplitude;
        p.frequency_ = frequency_hz;
        p.phase_ = phase_rad;
        p.bound_ = amplitude.norm();
        return p;
    }

    // Piecewise constant: value[i] holds on [time[i], time[i+1]), the last
    // value holds to infinity. times must start at 0 and increase.
    static AngularVelocityProfile piecewise(std::vector<double> times,
                                            std::vector<Vector3> values) {
        if (times.empty() || times.size() != values.size() || times.front() != 0.0) {
            throw std::invalid_argument("piecewise profile: need matching times and values starting at t = 0");
        }
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (times[i] <= times[i - 1]) {
                throw std::invalid_argument("piecewise profile: times must increase");
            }
        }
        AngularVelocityProfile p;
        p.kind_ = Kind::Piecewise;
        p.times_ = std::move(times);
        p.values_ = std::move(values);
        p.bound_ = 0.0;
        for (const auto& v : p.values_) p.bound_ = std::max(p.bound_, v.norm());
        return p;
    }

    Vector3 omega(double t) const {
        switch (kind_) {
            case Kind::Constant:
                return amplitude_;
            case Kind::Sinusoidal: {
                Vector3 w;
                for (int i = 0; i < 3; ++i) {
                    w(i) = amplitude_(i) * std::sin(2.0 * M_PI * frequency_(i) * t + phase_(i));
                }
                return w;
            }
            case Kind::Piecewise: {
                std::size_t i = times_.size() - 1;
                while (i > 0 && times_[i] > t) --i;
                return values_[i];
            }
        }
        return Vector3::Zero();
    }

    // Valid sup bound on ||omega(t)||.
    double bound() const { return bound_; }

    Kind kind() const { return kind_; }

private:
    AngularVelocityProfile() = default;

    Kind kind_ = Kind::Constant;
    Vector3 amplitude_ = Vector3::Zero();
    Vector3 frequency_ = Vector3::Zero();
    Vector3 phase_ = Vector3::Zero();
    std::vector<double> times_;
    std::vector<Vector3> values_;
    double bound_ = 0.0;
};

// Rate gyro with constant bias and optional white noise. Noise is a pure
// function of (seed, t), so a run is reproducible regardless of evaluation
// order and a noise sample can be held fixed across integrator substeps.
struct GyroModel {
    Vector3 bias = Vector3::Zero();
    double noise_std = 0.0;
    std::uint64_t seed = 0;

    Vector3 noise_at(double t) const {
        if (noise_std <= 0.0) return Vector3::Zero();
        std::uint64_t bits = 0;
        std::memcpy(&bits, &t, sizeof bits);
        Rng rng(derive_seed(seed, bits));
        return noise_std * random_gaussian_vector(rng);
    }
};

inline Vector3 measure_gyro(const GyroModel& gyro, const Vector3& omega_true, double t) {
    return omega_true + gyro.bias + gyro.noise_at(t);
}

// How a scene's weights combine reference directions into the matrix signal.
enum class WeightForm { Linear, Quadratic, Diagonal };

// A set of known inertial reference directions s_1..s_m (columns of S) plus
// weights. The induced signal matrix is
//   Linear:    G = W S^T          with W in R^{3 x m}
//   Quadratic: G = S W S^T        with W in R^{m x m}
//   Diagonal:  G = S W S^T        with W diagonal, positive entries
// and the measured counterpart replaces S^T by C^T, the body-frame
// measurements. G must be full rank.
class VectorScene {
public:
    static VectorScene linear(const Eigen::Matrix3Xd& directions, const Eigen::MatrixXd& weights) {
        if (weights.rows() != 3 || weights.cols() != directions.cols()) {
            throw std::invalid_argument("linear scene: weights must be 3 x m");
        }
        return VectorScene(directions, WeightForm::Linear, weights);
    }

    static VectorScene quadratic(const Eigen::Matrix3Xd& directions, const Eigen::MatrixXd& weights) {
        if (weights.rows() != directions.cols() || weights.cols() != directions.cols()) {
            throw std::invalid_argument("quadratic scene: weights must be m x m");
        }
        return VectorScene(directions, WeightForm::Quadratic, weights);
    }

    static VectorScene diagonal(const Eigen::Matrix3Xd& directions, const Eigen::VectorXd& weights) {
        if (weights.size() != directions.cols()) {
            throw std::invalid_argument("diagonal scene: need one weight per direction");
        }
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            if (weights(i) <= 0.0) {
                throw std::invalid_argument("diagonal scene: weights must be positive");
            }
        }
        return VectorScene(directions, WeightForm::Diagonal,
                           Eigen::MatrixXd(weights.asDiagonal()));
    }

    int count() const { return static_cast<int>(directions_.cols()); }
    const Eigen::Matrix3Xd& directions() const { return directions_; }
    const Eigen::MatrixXd& weights() const { return weights_; }
    WeightForm form() const { return form_; }

    // Signal matrix G induced by the scene (constant in time).
    const Matrix3& signal_matrix() const { return signal_; }

    // Measured signal A from body-frame measurement columns C; at the true
    // attitude, A = G R.
    Matrix3 signal_from_measurements(const Eigen::Matrix3Xd& measured) const {
        if (measured.cols() != directions_.cols()) {
            throw std::invalid_argument("scene measurement: column count mismatch");
        }
        switch (form_) {
            case WeightForm::Linear:
                return weights_ * measured.transpose();
            case WeightForm::Quadratic:
            case WeightForm::Diagonal:
                return directions_ * weights_ * measured.transpose();
        }
        return Matrix3::Zero();
    }

private:
    VectorScene(Eigen::Matrix3Xd directions, WeightForm form, Eigen::MatrixXd weights)
        : directions_(std::move(directions)), weights_(std::move(weights)), form_(form) {
        if (directions_.cols() < 1) {
            throw std::invalid_argument("scene: need at least one direction");
        }
        switch (form_) {
            case WeightForm::Linear:
                signal_ = weights_ * directions_.transpose();
                break;
            case WeightForm::Quadratic:
            case WeightForm::Diagonal:
                signal_ = directions_ * weights_ * directions_.transpose();
                break;
        }
        if (lambda_min_sym(signal_.transpose() * signal_) <= kSceneRankTol) {
            throw std::invalid_argument("scene: insufficient reference directions");
        }
    }

    Eigen::Matrix3Xd directions_;
    Eigen::MatrixXd weights_;
    WeightForm form_;
    Matrix3 signal_ = Matrix3::Zero();
};

// Body-frame measurements of the scene directions at attitude R: c_i = R^T s_i.
inline Eigen::Matrix3Xd measure_body_vectors(const VectorScene& scene, const Rotation3& attitude) {
    return attitude.matrix().transpose() * scene.directions();
}

// Adds iid Gaussian noise to measured columns; columns that were unit
// length are renormalized afterwards (direction sensors report directions).
inline Eigen::Matrix3Xd perturb_body_vectors(const Eigen::Matrix3Xd& measured,
                                             double noise_std, Rng& rng) {
    Eigen::Matrix3Xd out = measured;
    for (Eigen::Index i = 0; i < out.cols(); ++i) {
        const bool unit = std::abs(measured.col(i).norm() - 1.0) <= 1e-9;
        out.col(i) += noise_std * random_gaussian_vector(rng);
        const double n = out.col(i).norm();
        if (unit && n > 1e-12) out.col(i) /= n;
    }
    return out;
}

// Completes a direction set whose span is only a plane: appends the
// normalized cross product of the two strongest directions (largest norms,
// earlier column on ties). Full-rank input is returned unchanged.
inline Eigen::Matrix3Xd augment_rank2_scene(const Eigen::Matrix3Xd& directions) {
    const Matrix3 gram = directions * directions.transpose();
    if (lambda_min_sym(gram) > kSceneRankTol) return directions;

    if (directions.cols() < 2) {
        throw std::invalid_argument("augment scene: insufficient reference directions");
    }
    Eigen::Index first = 0, second = 1;
    if (directions.col(1).norm() > directions.col(0).norm()) std::swap(first, second);
    for (Eigen::Index i = 2; i < directions.cols(); ++i) {
        const double n = directions.col(i).norm();
        if (n > directions.col(first).norm()) {
            second = first;
            first = i;
        } else if (n > directions.col(second).norm()) {
            second = i;
        }
    }
    if (second < first) std::swap(first, second);

    Vector3 extra = directions.col(first).cross(directions.col(second));
    const double n = extra.norm();
    if (n <= 1e-12) {
        throw std::invalid_argument("augment scene: insufficient reference directions");
    }
    extra /= n;

    Eigen::Matrix3Xd out(3, directions.cols() + 1);
    out.leftCols(directions.cols()) = directions;
    out.col(directions.cols()) = extra;
    return out;
}

// (G, A) pair for a scene and a set of body-frame measurements.
inline std::pair<Matrix3, Matrix3> scene_to_signal(const VectorScene& scene,
                                                   const Eigen::Matrix3Xd& measured) {
    return {scene.signal_matrix(), scene.signal_from_measurements(measured)};
}

// Matrix-valued attitude signal A(t) = G(t) R(t), with G either constant or
// rotating as G(t) = exp(hat(spin) t) G0. The rotating case keeps ||G(t)||
// and the eigenvalues of G^T G constant, so certificate constants derived
// from G0 hold for all t.
class MatrixSignalModel {
public:
    static MatrixSignalModel constant(const Matrix3& g) {
        return MatrixSignalModel(g, Vector3::Zero());
    }

    static MatrixSignalModel identity() {
        return MatrixSignalModel(Matrix3::Identity(), Vector3::Zero());
    }

    static MatrixSignalModel rotating(const Matrix3& g0, const Vector3& spin) {
        return MatrixSignalModel(g0, spin);
    }

    Matrix3 G(double t) const {
        if (!time_varying_) return g0_;
        return exp_so3(spin_ * t) * g0_;
    }

    Matrix3 G_dot(double t) const {
        if (!time_varying_) return Matrix3::Zero();
        return hat(spin_) * G(t);
    }

    bool time_varying() const { return time_varying_; }
    const Vector3& spin() const { return spin_; }

    double frobenius_norm() const { return norm_; }
    double lambda_min_gram() const { return ell_min_; }
    double lambda_max_gram() const { return ell_max_; }

private:
    MatrixSignalModel(const Matrix3& g0, const Vector3& spin)
        : g0_(g0), spin_(spin), time_varying_(spin.norm() > 0.0) {
        ell_min_ = lambda_min_sym(g0_.transpose() * g0_);
        ell_max_ = lambda_max_sym(g0_.transpose() * g0_);
        if (ell_min_ <= kSceneRankTol) {
            throw std::invalid_argument("matrix signal: G must be invertible");
        }
        norm_ = g0_.norm();
    }

    Matrix3 g0_;
    Vector3 spin_;
    bool time_varying_ = false;
    double norm_ = 0.0;
    double ell_min_ = 0.0;
    double ell_max_ = 0.0;
};

inline Matrix3 measure_matrix_signal(const MatrixSignalModel& model,
                                     const Rotation3& attitude, double t) {
    return model.G(t) * attitude.matrix();
}

}  // namespace gyrobs
