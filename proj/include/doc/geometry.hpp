#pragma once

// Rigid-body and pinhole-camera primitives. Everything here is header-only
// and templated on the scalar type; the rest of the library instantiates
// it with double.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <stdexcept>

#include "doc/error.hpp"

namespace doc {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3, Eigen::RowMajor>;
template <typename Scalar>
using Mat4 = Eigen::Matrix<Scalar, 4, 4, Eigen::RowMajor>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Vec6d = Vec6<double>;
using Mat3d = Mat3<double>;
using Mat4d = Mat4<double>;

// Smallest depth (meters) a point may have and still be projected.
inline constexpr double kMinDepth = 1e-3;

template <typename Scalar>
[[nodiscard]] Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> s;
  // clang-format off
  s << Scalar(0), -v.z(),     v.y(),
       v.z(),     Scalar(0), -v.x(),
      -v.y(),     v.x(),      Scalar(0);
  // clang-format on
  return s;
}

/// Rodrigues' formula R = I + a [r]x + b [r]x^2 with a = sin(th)/th and
/// b = (1 - cos(th))/th^2. Below 1e-8 rad the coefficients fall back to their
/// second-order Taylor expansions.
template <typename Scalar>
[[nodiscard]] Mat3<Scalar> rodrigues_exp(const Vec3<Scalar>& r) {
  using std::cos;
  using std::sin;
  const Scalar theta2 = r.squaredNorm();
  const Scalar theta = std::sqrt(theta2);
  Scalar a;
  Scalar b;
  if (theta < Scalar(1e-8)) {
    a = Scalar(1) - theta2 / Scalar(6);
    b = Scalar(0.5) - theta2 / Scalar(24);
  } else {
    a = sin(theta) / theta;
    const Scalar half = sin(theta / Scalar(2)) / theta;
    b = Scalar(2) * half * half;
  }
  const Mat3<Scalar> k = skew(r);
  return Mat3<Scalar>::Identity() + a * k + b * k * k;
}

/// Partial derivatives dR/dr_k of rodrigues_exp, k = 0, 1, 2.
template <typename Scalar>
[[nodiscard]] std::array<Mat3<Scalar>, 3> rodrigues_exp_derivatives(
    const Vec3<Scalar>& r) {
  using std::cos;
  using std::sin;
  const Scalar theta2 = r.squaredNorm();
  const Scalar theta = std::sqrt(theta2);
  // a, b as in rodrigues_exp; da = (da/dth)/th, db = (db/dth)/th so that
  // d(a)/d(r_k) = da * r_k.
  Scalar a, b, da, db;
  if (theta < Scalar(1e-2)) {
    const Scalar t4 = theta2 * theta2;
    a = Scalar(1) - theta2 / Scalar(6) + t4 / Scalar(120);
    b = Scalar(0.5) - theta2 / Scalar(24) + t4 / Scalar(720);
    da = Scalar(-1) / Scalar(3) + theta2 / Scalar(30) - t4 / Scalar(840);
    db = Scalar(-1) / Scalar(12) + theta2 / Scalar(180) - t4 / Scalar(6720);
  } else {
    const Scalar s = sin(theta);
    const Scalar c = cos(theta);
    const Scalar half = sin(theta / Scalar(2)) / theta;
    a = s / theta;
    b = Scalar(2) * half * half;
    da = (theta * c - s) / (theta2 * theta);
    db = (theta * s - Scalar(2) * (Scalar(1) - c)) / (theta2 * theta2);
  }
  const Mat3<Scalar> k = skew(r);
  const Mat3<Scalar> k2 = k * k;
  std::array<Mat3<Scalar>, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Mat3<Scalar> e = skew<Scalar>(Vec3<Scalar>::Unit(i));
    out[i] = a * e + b * (e * k + k * e) + (da * r[i]) * k + (db * r[i]) * k2;
  }
  return out;
}

/// Inverse of rodrigues_exp; returns a rotation vector with angle in [0, pi].
template <typename Scalar>
[[nodiscard]] Vec3<Scalar> rotation_log(const Mat3<Scalar>& R) {
  const Eigen::Matrix<Scalar, 3, 3> m = R;
  const Eigen::AngleAxis<Scalar> aa(m);
  return aa.angle() * aa.axis();
}

template <typename Scalar>
[[nodiscard]] bool is_rigid(const Mat4<Scalar>& T, Scalar tol = Scalar(1e-6)) {
  const Mat3<Scalar> R = T.template topLeftCorner<3, 3>();
  const Scalar ortho =
      (R.transpose() * R - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < tol)) return false;
  if (std::abs(R.determinant() - Scalar(1)) > tol) return false;
  return T(3, 0) == Scalar(0) && T(3, 1) == Scalar(0) && T(3, 2) == Scalar(0) &&
         T(3, 3) == Scalar(1) && T.allFinite();
}

template <typename Scalar>
[[nodiscard]] Mat4<Scalar> make_transform(const Mat3<Scalar>& R,
                                          const Vec3<Scalar>& t) {
  Mat4<Scalar> T = Mat4<Scalar>::Identity();
  T.template topLeftCorner<3, 3>() = R;
  T.template topRightCorner<3, 1>() = t;
  return T;
}

/// Rigid inverse (R^T, -R^T t). Throws InputError on non-rigid input.
template <typename Scalar>
[[nodiscard]] Mat4<Scalar> invert(const Mat4<Scalar>& T) {
  if (!is_rigid(T)) throw InputError("invert: transform is not rigid");
  const Mat3<Scalar> Rt = T.template topLeftCorner<3, 3>().transpose();
  return make_transform<Scalar>(Rt, -Rt * T.template topRightCorner<3, 1>());
}

template <typename Scalar>
[[nodiscard]] Mat4<Scalar> compose(const Mat4<Scalar>& a,
                                   const Mat4<Scalar>& b) {
  Mat4<Scalar> c = a * b;
  c.template bottomRows<1>() << Scalar(0), Scalar(0), Scalar(0), Scalar(1);
  if (!is_rigid(c)) throw NumericalError("compose: product is not rigid");
  return c;
}

/// Projects R onto SO(3) (nearest rotation in Frobenius norm).
template <typename Scalar>
[[nodiscard]] Mat3<Scalar> nearest_rotation(const Mat3<Scalar>& R) {
  const Eigen::Matrix<Scalar, 3, 3> m = R;
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, 3, 3>> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix<Scalar, 3, 3> d = Eigen::Matrix<Scalar, 3, 3>::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0
                ? Scalar(-1)
                : Scalar(1);
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// 6-DoF pose as (rotation vector, translation) with the 4x4 transform cached.
template <typename Scalar>
class PoseSE3 {
 public:
  PoseSE3() : r_(Vec3<Scalar>::Zero()), t_(Vec3<Scalar>::Zero()) { refresh(); }
  PoseSE3(const Vec3<Scalar>& r, const Vec3<Scalar>& t) : r_(r), t_(t) {
    refresh();
  }
  explicit PoseSE3(const Vec6<Scalar>& params)
      : r_(params.template head<3>()), t_(params.template tail<3>()) {
    refresh();
  }

  static PoseSE3 from_matrix(const Mat4<Scalar>& T) {
    if (!is_rigid(T, Scalar(1e-4)))
      throw InputError("PoseSE3::from_matrix: transform is not rigid");
    const Mat3<Scalar> R = nearest_rotation<Scalar>(T.template topLeftCorner<3, 3>());
    return PoseSE3(rotation_log<Scalar>(R), T.template topRightCorner<3, 1>());
  }

  [[nodiscard]] const Vec3<Scalar>& r() const { return r_; }
  [[nodiscard]] const Vec3<Scalar>& t() const { return t_; }
  [[nodiscard]] const Mat4<Scalar>& matrix() const { return matrix_; }
  [[nodiscard]] Mat3<Scalar> rotation() const {
    return matrix_.template topLeftCorner<3, 3>();
  }
  [[nodiscard]] Vec6<Scalar> params() const {
    Vec6<Scalar> p;
    p << r_, t_;
    return p;
  }

 private:
  void refresh() { matrix_ = make_transform<Scalar>(rodrigues_exp<Scalar>(r_), t_); }

  Vec3<Scalar> r_;
  Vec3<Scalar> t_;
  Mat4<Scalar> matrix_;
};

using Pose = PoseSE3<double>;

template <typename Scalar>
[[nodiscard]] Mat4<Scalar> pose_to_matrix(const PoseSE3<Scalar>& p) {
  return p.matrix();
}

/// Pinhole intrinsics in pixels.
template <typename Scalar>
struct Intrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
  int width{1}, height{1};

  [[nodiscard]] bool valid() const {
    return std::isfinite(fx) && std::isfinite(fy) && fx > 0 && fy > 0 &&
           width > 0 && height > 0 && cx >= 0 && cx < width && cy >= 0 &&
           cy < height;
  }
  void validate() const {
    if (!valid()) throw InputError("intrinsics violate fx,fy > 0 / principal point inside image");
  }
  /// Intrinsics for the same camera resampled to new_width x new_height.
  [[nodiscard]] Intrinsics scaled(int new_width, int new_height) const {
    const Scalar sx = Scalar(new_width) / Scalar(width);
    const Scalar sy = Scalar(new_height) / Scalar(height);
    return {fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
  }
};

using Camera = Intrinsics<double>;

template <typename Scalar>
struct Projection {
  Scalar u{0}, v{0}, z{0};
  bool valid{false};
};

template <typename Scalar>
[[nodiscard]] Projection<Scalar> project(const Intrinsics<Scalar>& K,
                                         const Vec3<Scalar>& X,
                                         Scalar z_min = Scalar(kMinDepth)) {
  Projection<Scalar> p;
  p.z = X.z();
  if (!(X.z() > z_min)) return p;
  p.u = K.fx * X.x() / X.z() + K.cx;
  p.v = K.fy * X.y() / X.z() + K.cy;
  p.valid = true;
  return p;
}

template <typename Scalar>
[[nodiscard]] Vec3<Scalar> unproject(const Intrinsics<Scalar>& K, Scalar u,
                                     Scalar v, Scalar d) {
  if (!(d > Scalar(0))) throw InputError("unproject: depth must be positive");
  return {(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d};
}

}  // namespace doc
