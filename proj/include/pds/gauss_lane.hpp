#pragma once

// Local Gauss-map arithmetic written once over a generic lane type T.
// T is `double` for the scalar path and a 4-wide AVX2 wrapper for the
// vector path; both instantiate the exact same operation sequence, so the
// two paths agree bit for bit (builds must not contract into FMA).

#include <array>
#include <cmath>

namespace pds::lane {

template <class T>
struct V3 {
  T x, y, z;
};

template <class T>
inline V3<T> sub(const V3<T>& a, const V3<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

template <class T>
inline V3<T> scale(const V3<T>& a, const T& s) {
  return {a.x * s, a.y * s, a.z * s};
}

template <class T>
inline V3<T> cross(const V3<T>& a, const V3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T>
inline T dot(const V3<T>& a, const V3<T>& b) {
  return (a.x * b.x + a.y * b.y) + a.z * b.z;
}

using std::sqrt;

template <class T>
inline T norm(const V3<T>& a) {
  return sqrt(dot(a, a));
}

/// Forward pass for one interior point.
///
/// Face normals are the normalized cross products of the fan edges. The
/// vertex normal is the normalized unweighted mean. Each Gauss-map triangle
/// is measured after central projection of the face-normal tips onto the
/// tangent plane of the vertex normal, which leaves great-circle arcs
/// straight: one-rings whose normals share a great circle (planes,
/// cylinders) give exactly zero area.
template <class T>
struct GaussForward {
  std::array<V3<T>, 8> edge_cross;    // un-normalized face normals
  std::array<T, 8> edge_cross_norm;   // twice the 3D triangle area
  std::array<V3<T>, 8> face_normal;
  V3<T> normal_sum;
  T normal_sum_norm;
  V3<T> vertex_normal;
  std::array<T, 8> tip_dot;           // face_normal . vertex_normal
  std::array<V3<T>, 8> tip;           // projected tips
  std::array<V3<T>, 8> area_cross;    // (tip_j - n) x (tip_j+1 - n)
  std::array<T, 8> area;              // a_ij
  T error;                            // A_i = sum a_ij^2
};

template <class T>
inline void gauss_forward(const V3<T>& center, const std::array<V3<T>, 8>& ring, GaussForward<T>& out) {
  const T half(0.5);
  const T eighth(0.125);
  const T one(1.0);
  for (int j = 0; j < 8; ++j) {
    const V3<T> e1 = sub(ring[j], center);
    const V3<T> e2 = sub(ring[(j + 1) % 8], center);
    out.edge_cross[j] = cross(e1, e2);
    out.edge_cross_norm[j] = norm(out.edge_cross[j]);
    out.face_normal[j] = scale(out.edge_cross[j], one / out.edge_cross_norm[j]);
  }
  V3<T> s = out.face_normal[0];
  for (int j = 1; j < 8; ++j) s = {s.x + out.face_normal[j].x, s.y + out.face_normal[j].y, s.z + out.face_normal[j].z};
  out.normal_sum = scale(s, eighth);
  out.normal_sum_norm = norm(out.normal_sum);
  out.vertex_normal = scale(out.normal_sum, one / out.normal_sum_norm);
  for (int j = 0; j < 8; ++j) {
    out.tip_dot[j] = dot(out.face_normal[j], out.vertex_normal);
    out.tip[j] = scale(out.face_normal[j], one / out.tip_dot[j]);
  }
  T total(0.0);
  for (int j = 0; j < 8; ++j) {
    const V3<T> p = sub(out.tip[j], out.vertex_normal);
    const V3<T> q = sub(out.tip[(j + 1) % 8], out.vertex_normal);
    out.area_cross[j] = cross(p, q);
    out.area[j] = half * norm(out.area_cross[j]);
    total = total + out.area[j] * out.area[j];
  }
  out.error = total;
}

}  // namespace pds::lane
