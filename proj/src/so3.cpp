#include "lorentz/so3.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace lorentz {

Mat3 skew(const Vec3& v)
{
    Mat3 S;
    S << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return S;
}

Mat3 so3_exp(const Vec3& w)
{
    const double theta = w.norm();
    const Mat3 W = skew(w);
    double a, b;
    if (theta < 1e-4) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Mat3::Identity() + a * W + b * W * W;
}

Vec3 so3_log(const Mat3& R)
{
    // 2 sin(theta) * axis
    const Vec3 s(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    const double sin2 = s.norm();  // 2 sin(theta)
    const double cos2 = R.trace() - 1.0;  // 2 cos(theta)
    const double theta = std::atan2(sin2, cos2);

    if (theta < 1e-4) {
        // theta / sin(theta) ~ 1 + theta^2 / 6
        return 0.5 * (1.0 + theta * theta / 6.0) * s;
    }
    if (std::numbers::pi - theta > 1e-4) {
        return (0.5 * theta / std::sin(theta)) * s;
    }

    // Near pi: the symmetric part carries the axis, (R + R^T)/2 = cos I + (1 - cos) a a^T.
    const double c = std::cos(theta);
    const Mat3 B = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
    int k = 0;
    B.diagonal().maxCoeff(&k);
    Vec3 axis = B.col(k) / std::sqrt(std::max(B(k, k), 1e-300));
    axis.normalize();
    // Resolve the sign from the antisymmetric part when it still carries information.
    if (axis.dot(s) < 0.0) {
        axis = -axis;
    }
    return theta * axis;
}

Vec3 so3_log_distance(const Mat3& Ra, const Mat3& Rb)
{
    return so3_log(Ra.transpose() * Rb);
}

Mat3 orthonormalize(const Mat3& M)
{
    // Higham's scaled Newton iteration for the orthogonal polar factor.
    Mat3 X = M;
    for (int it = 0; it < 20; ++it) {
        const Mat3 Xinv = X.inverse();
        const double g = std::sqrt(Xinv.norm() / X.norm());
        const Mat3 next = 0.5 * (g * X + Xinv.transpose() / g);
        const double change = (next - X).norm();
        X = next;
        if (change < 1e-15) {
            break;
        }
    }
    return X;
}

double orthonormality_error(const Mat3& R)
{
    return (R.transpose() * R - Mat3::Identity()).norm();
}

bool is_rotation(const Mat3& R, double tol)
{
    return R.allFinite() && orthonormality_error(R) < tol && std::abs(R.determinant() - 1.0) < tol;
}

Mat3 bend_rotation(double bend, double azimuth)
{
    const Vec3 axis(-std::sin(azimuth), std::cos(azimuth), 0.0);
    return so3_exp(bend * axis);
}

}  // namespace lorentz
