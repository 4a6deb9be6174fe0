// Matrix and Lie-algebra utilities on R^{3x3} and SO(3): hat/vee maps,
// symmetric/skew splits, the Frobenius inner product, Rodrigues exponential,
// polar projection, symmetric eigenvalue bounds, and Haar-uniform rotation
// sampling. These are the primitives the observer and certificate layers
// build on.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "rng.hpp"

namespace gyrobs {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

// Orthogonality tolerance for validated rotations.
inline constexpr double kRotationTol = 1e-9;
// Symmetric-part tolerance accepted by vee().
inline constexpr double kSkewTol = 1e-9;
// Determinant magnitude below which a matrix is treated as singular.
inline constexpr double kSingularTol = 1e-12;

// hat: R^3 -> so(3), hat(v) * w == v x w.
inline Matrix3 hat(const Vector3& v) {
    Matrix3 m;
    m <<    0.0, -v.z(),  v.y(),
          v.z(),    0.0, -v.x(),
         -v.y(),  v.x(),    0.0;
    return m;
}

// vee: inverse of hat on skew-symmetric input. Rejects matrices whose
// symmetric part exceeds kSkewTol in Frobenius norm.
inline Vector3 vee(const Matrix3& m) {
    const Matrix3 sym = 0.5 * (m + m.transpose());
    if (sym.norm() > kSkewTol) {
        throw std::invalid_argument("vee: input is not skew-symmetric");
    }
    return Vector3(m(2, 1), m(0, 2), m(1, 0));
}

inline Matrix3 sym_part(const Matrix3& m) {
    return 0.5 * (m + m.transpose());
}

inline Matrix3 skew_part(const Matrix3& m) {
    return 0.5 * (m - m.transpose());
}

inline std::pair<Matrix3, Matrix3> sym_skew_split(const Matrix3& m) {
    return {sym_part(m), skew_part(m)};
}

// vee of the skew part, without the skew-symmetry gate. This is the
// projection R^{3x3} -> R^3 used by the bias update laws.
inline Vector3 vee_skew(const Matrix3& m) {
    return 0.5 * Vector3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

// Frobenius inner product <a, b> = tr(a^T b).
inline double frobenius_inner(const Matrix3& a, const Matrix3& b) {
    return a.cwiseProduct(b).sum();
}

// Rodrigues formula, series-stable near zero angle.
inline Matrix3 exp_so3(const Vector3& w) {
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    double c1;  // sin(theta) / theta
    double c2;  // (1 - cos(theta)) / theta^2
    if (theta < 1e-4) {
        c1 = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
        c2 = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    } else {
        c1 = std::sin(theta) / theta;
        c2 = (1.0 - std::cos(theta)) / theta2;
    }
    const Matrix3 k = hat(w);
    return Matrix3::Identity() + c1 * k + c2 * k * k;
}

// Validated rotation matrix. Construction from a raw matrix checks
// orthogonality and det = +1 eagerly, so a Rotation3 in hand is always
// usable without further checks.
class Rotation3 {
public:
    Rotation3() : m_(Matrix3::Identity()) {}

    explicit Rotation3(const Matrix3& m) : m_(m) {
        if ((m_.transpose() * m_ - Matrix3::Identity()).norm() > kRotationTol) {
            throw std::invalid_argument("Rotation3: matrix is not orthogonal");
        }
        if (m_.determinant() < 0.0) {
            throw std::invalid_argument("Rotation3: matrix has negative determinant");
        }
    }

    static Rotation3 identity() { return Rotation3(); }

    static Rotation3 from_axis_angle(const Vector3& w) { return Rotation3(exp_so3(w)); }

    const Matrix3& matrix() const { return m_; }

    Rotation3 inverse() const {
        Rotation3 r;
        r.m_ = m_.transpose();
        return r;
    }

    Rotation3 operator*(const Rotation3& o) const {
        Rotation3 r;
        r.m_ = m_ * o.m_;
        return r;
    }

private:
    Matrix3 m_;
};

// Nearest rotation to m in the Frobenius sense. Newton iteration
// X <- (X + X^{-T}) / 2 to the orthogonal polar factor, then a reflection
// correction across the weakest singular direction when det(m) < 0.
// Throws for numerically singular input.
inline Rotation3 polar_rotation_factor(const Matrix3& m) {
    const double det = m.determinant();
    if (std::abs(det) <= kSingularTol) {
        throw std::domain_error("polar_rotation_factor: degenerate polar decomposition");
    }
    // The polar factor is invariant under positive scaling; normalizing first
    // keeps the iteration count flat no matter the input magnitude.
    Matrix3 x = m * (std::sqrt(3.0) / m.norm());
    for (int i = 0; i < 50; ++i) {
        const Matrix3 next = 0.5 * (x + x.inverse().transpose());
        const double step = (next - x).norm();
        x = next;
        if (step <= 1e-12) break;
    }
    if (det < 0.0) {
        // x is the orthogonal factor with det -1. The closest rotation flips
        // the singular direction with the smallest singular value, which is
        // the smallest-eigenvalue eigenvector of the symmetric factor x^T m.
        const Matrix3 p = sym_part(x.transpose() * m);
        Eigen::SelfAdjointEigenSolver<Matrix3> es(p);
        const Vector3 v = es.eigenvectors().col(0);
        x = x * (Matrix3::Identity() - 2.0 * v * v.transpose());
    }
    return Rotation3(x);
}

// Smallest eigenvalue of the symmetric part of m.
inline double lambda_min_sym(const Matrix3& m) {
    Eigen::SelfAdjointEigenSolver<Matrix3> es(sym_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// Largest eigenvalue of the symmetric part of m.
inline double lambda_max_sym(const Matrix3& m) {
    Eigen::SelfAdjointEigenSolver<Matrix3> es(sym_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(2);
}

inline Matrix3 random_gaussian_matrix(Rng& rng) {
    Matrix3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = rng.gaussian();
    return m;
}

inline Vector3 random_gaussian_vector(Rng& rng) {
    return Vector3(rng.gaussian(), rng.gaussian(), rng.gaussian());
}

// Haar-uniform rotation: polar factor of a Gaussian matrix. The Gaussian
// ensemble is bi-invariant under orthogonal multiplication and the polar
// projection commutes with it, so the result is uniform on SO(3). Gaussian
// matrices are almost surely well-conditioned; the rare near-singular draw
// is resampled.
inline Rotation3 random_rotation(Rng& rng) {
    for (;;) {
        const Matrix3 g = random_gaussian_matrix(rng);
        if (std::abs(g.determinant()) <= 1e-6) continue;
        return polar_rotation_factor(g);
    }
}

inline Rotation3 random_rotation(std::uint64_t seed) {
    Rng rng(seed);
    return random_rotation(rng);
}

}  // namespace gyrobs
