// Shared oracles and helpers for the test suite. Oracles deliberately take
// independent computation routes from the library (SVD instead of Newton,
// characteristic polynomial instead of iterative eigensolvers, series
// instead of Rodrigues) so agreement is evidence, not tautology.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "gyrobs/matrix_lie.hpp"
#include "gyrobs/rng.hpp"

namespace test_support {

using gyrobs::Matrix3;
using gyrobs::Vector3;

// Nearest rotation via SVD: U diag(1, 1, det(U V^T)) V^T. Optimal for any
// determinant sign, which is exactly what the Newton-plus-reflection route
// must reproduce.
inline Matrix3 svd_polar_oracle(const Matrix3& m) {
    Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix3 u = svd.matrixU();
    const Matrix3 v = svd.matrixV();
    const double d = (u * v.transpose()).determinant();
    return u * Eigen::Vector3d(1.0, 1.0, d).asDiagonal() * v.transpose();
}

inline std::array<double, 3> svd_singular_values(const Matrix3& m) {
    Eigen::JacobiSVD<Matrix3> svd(m);
    return {svd.singularValues()(0), svd.singularValues()(1), svd.singularValues()(2)};
}

// Symmetric 3x3 eigenvalues by the trigonometric solution of the
// characteristic cubic, ascending order.
inline std::array<double, 3> cubic_eigenvalues_oracle(const Matrix3& sym) {
    const double p1 = sym(0, 1) * sym(0, 1) + sym(0, 2) * sym(0, 2) + sym(1, 2) * sym(1, 2);
    if (p1 == 0.0) {
        std::array<double, 3> d{sym(0, 0), sym(1, 1), sym(2, 2)};
        std::sort(d.begin(), d.end());
        return d;
    }
    const double q = sym.trace() / 3.0;
    const double p2 = (sym(0, 0) - q) * (sym(0, 0) - q) + (sym(1, 1) - q) * (sym(1, 1) - q)
                    + (sym(2, 2) - q) * (sym(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Matrix3 b = (sym - q * Matrix3::Identity()) / p;
    double r = b.determinant() / 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double hi = q + 2.0 * p * std::cos(phi);
    const double lo = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    return {lo, 3.0 * q - hi - lo, hi};
}

// Matrix exponential of hat(w) by plain series summation.
// Taylor series with argument scaling: halve w until the series converges
// fast, then square back up. Keeps truncation error negligible at any norm.
inline Matrix3 exp_series_oracle(const Vector3& w, int terms = 30) {
    int squarings = 0;
    double norm = w.norm();
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const Matrix3 k = gyrobs::hat(w) / std::pow(2.0, squarings);
    Matrix3 sum = Matrix3::Identity();
    Matrix3 power = Matrix3::Identity();
    double factorial = 1.0;
    for (int n = 1; n <= terms; ++n) {
        power = power * k;
        factorial *= n;
        sum += power / factorial;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

inline Matrix3 random_box_matrix(gyrobs::Rng& rng, double box = 1.0) {
    Matrix3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = rng.uniform(-box, box);
    return m;
}

inline Vector3 random_box_vector(gyrobs::Rng& rng, double box = 1.0) {
    return Vector3(rng.uniform(-box, box), rng.uniform(-box, box), rng.uniform(-box, box));
}

// Paths wired in by the build so tests can drive the installed CLI and the
// bundled configs.
inline std::string cli_path() {
#ifdef GYROBS_CLI_BIN
    return GYROBS_CLI_BIN;
#else
    return "";
#endif
}

inline std::string config_dir() {
#ifdef GYROBS_CONFIG_DIR
    return GYROBS_CONFIG_DIR;
#else
    return "";
#endif
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path()
                   / ("gyrobs_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Runs a command, captures exit code.
inline int run_command(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status < 0) return -1;
    return WEXITSTATUS(status);
}

}  // namespace test_support
