#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lorentz {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 skew(const Vec3& v);

// Exponential map so(3) -> SO(3) for a rotation vector (axis * angle).
Mat3 so3_exp(const Vec3& rotation_vector);

// Logarithm SO(3) -> rotation vector with norm in [0, pi]. Stable near 0 and pi.
Vec3 so3_log(const Mat3& R);

// Axis-angle vector of Ra^T Rb: the relative rotation taking Ra onto Rb, expressed in Ra.
Vec3 so3_log_distance(const Mat3& Ra, const Mat3& Rb);

// Closest rotation in the Frobenius sense (orthogonal polar factor), via scaled Newton iteration.
Mat3 orthonormalize(const Mat3& M);

// ||R^T R - I||_F
double orthonormality_error(const Mat3& R);

bool is_rotation(const Mat3& R, double tol = 1e-9);

// Rotation of the base frame that tilts the local z axis by `bend` toward the direction
// (cos azimuth, sin azimuth, 0) of the local x-y plane.
Mat3 bend_rotation(double bend, double azimuth);

}  // namespace lorentz
