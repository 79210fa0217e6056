#pragma once

#include <array>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace cjl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Gram-Schmidt on the chart basis with respect to g: returns the upper triangular E with
// E^T g E = I. Chart vector v has frame coordinates E^{-1} v = L^T v (g = L L^T).
struct Frame {
  Mat3 E;     // frame vectors as columns, chart components
  Mat3 Einv;  // chart -> frame coordinates
};

inline Frame orthonormal_frame(const Mat3& g) {
  Eigen::LLT<Mat3> llt(g);
  Mat3 L = llt.matrixL();
  Frame f;
  f.Einv = L.transpose();
  f.E = f.Einv.inverse();
  return f;
}

struct Svd3 {
  Vec3 sigma;  // descending
  Mat3 U;
  Mat3 V;
};

inline Svd3 svd3(const Mat3& A) {
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.singularValues(), svd.matrixU(), svd.matrixV()};
}

inline int count_small_singular(const Vec3& sigma, double rel) {
  int c = 0;
  for (int i = 0; i < 3; ++i)
    if (sigma[i] < rel * sigma[0]) ++c;
  return c;
}

// |sin| of the angle between two lines.
inline double line_sine(const Vec3& a, const Vec3& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::min(1.0, a.cross(b).norm() / (na * nb));
}

inline double g_norm(const Mat3& g, const Vec3& v) { return std::sqrt(std::max(0.0, v.dot(g * v))); }

}  // namespace cjl
