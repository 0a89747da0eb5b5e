#pragma once

// Small 3D algebra templated on the scalar so the same code runs on doubles
// and on autodiff columns (numkit::Var with n x 1 values).

#include <array>
#include <cmath>

#include "skillab/numkit/autodiff.hpp"

namespace skillab::geo {

template <class T>
using Vec3 = std::array<T, 3>;

/// Row-major 3x3.
template <class T>
using Mat3 = std::array<T, 9>;

template <class T>
struct Quat {
  T w, x, y, z;
};

template <class T>
Vec3<T> add(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

template <class T>
Vec3<T> sub(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

template <class T, class S>
Vec3<T> scale(const Vec3<T>& a, const S& s) {
  return {a[0] * s, a[1] * s, a[2] * s};
}

template <class T>
Vec3<T> neg(const Vec3<T>& a) {
  return {-a[0], -a[1], -a[2]};
}

template <class T>
Vec3<T> hadamard(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] * b[0], a[1] * b[1], a[2] * b[2]};
}

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

template <class T>
T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class T>
Vec3<T> column(const Mat3<T>& m, int c) {
  return {m[c], m[3 + c], m[6 + c]};
}

template <class T>
Mat3<T> from_columns(const Vec3<T>& c0, const Vec3<T>& c1, const Vec3<T>& c2) {
  return {c0[0], c1[0], c2[0], c0[1], c1[1], c2[1], c0[2], c1[2], c2[2]};
}

template <class T>
Mat3<T> transpose(const Mat3<T>& m) {
  return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

template <class T>
Vec3<T> mul(const Mat3<T>& m, const Vec3<T>& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

template <class T>
Mat3<T> mul(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[3 * i + j] = a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
  return out;
}

/// Inverse of the hat map: extracts (x, y, z) from a skew-symmetric matrix.
template <class T>
Vec3<T> vee(const Mat3<T>& s) {
  return {s[7], s[2], s[3]};
}

template <class T>
Mat3<T> rotation(const Quat<T>& q) {
  const T ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const T xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const T wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  return {ww + xx - yy - zz, 2.0 * (xy - wz),    2.0 * (xz + wy),
          2.0 * (xy + wz),    ww - xx + yy - zz, 2.0 * (yz - wx),
          2.0 * (xz - wy),    2.0 * (yz + wx),    ww - xx - yy + zz};
}

template <class T>
Quat<T> multiply(const Quat<T>& a, const Quat<T>& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z, a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x, a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

template <class T>
Quat<T> normalized(const Quat<T>& q) {
  using std::sqrt;
  const T n = sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

// Double-only helpers.

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Quatd = Quat<double>;

inline constexpr Mat3d kIdentity{1, 0, 0, 0, 1, 0, 0, 0, 1};

/// Z-Y-X (yaw, pitch, roll) composition.
Quatd quat_from_rpy(double roll, double pitch, double yaw);
Vec3d rpy_from_quat(const Quatd& q);
Mat3d rot_x(double angle);
Mat3d rot_y(double angle);
Mat3d rot_z(double angle);
double frobenius_distance(const Mat3d& a, const Mat3d& b);
double determinant(const Mat3d& m);
Quatd quat_from_rotation(const Mat3d& m);

}  // namespace skillab::geo
