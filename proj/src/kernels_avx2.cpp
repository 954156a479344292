#include "pds/kernels.hpp"

#include "pds/gauss_lane.hpp"

#if defined(PDS_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace pds::kernels {

#if defined(PDS_HAVE_AVX2)
namespace {

struct D4 {
  __m256d v;
  D4() = default;
  explicit D4(double s) : v(_mm256_set1_pd(s)) {}
  explicit D4(__m256d x) : v(x) {}
};

inline D4 operator+(D4 a, D4 b) { return D4(_mm256_add_pd(a.v, b.v)); }
inline D4 operator-(D4 a, D4 b) { return D4(_mm256_sub_pd(a.v, b.v)); }
inline D4 operator*(D4 a, D4 b) { return D4(_mm256_mul_pd(a.v, b.v)); }
inline D4 operator/(D4 a, D4 b) { return D4(_mm256_div_pd(a.v, b.v)); }
inline D4 sqrt(D4 a) { return D4(_mm256_sqrt_pd(a.v)); }
inline D4 vmin(D4 a, D4 b) { return D4(_mm256_min_pd(a.v, b.v)); }

inline D4 load(const std::vector<double>& src, std::size_t k) { return D4(_mm256_loadu_pd(src.data() + k)); }
inline void store(std::vector<double>& dst, std::size_t k, D4 a) { _mm256_storeu_pd(dst.data() + k, a.v); }

}  // namespace

void gauss_error_avx2(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end) {
  constexpr std::size_t W = 4;
  lane::GaussForward<D4> fwd;
  std::size_t k = begin;
  for (; k + W <= end; k += W) {
    const lane::V3<D4> center{load(batch.x[0], k), load(batch.y[0], k), load(batch.z[0], k)};
    std::array<lane::V3<D4>, 8> ring;
    for (int j = 0; j < 8; ++j)
      ring[j] = {load(batch.x[j + 1], k), load(batch.y[j + 1], k), load(batch.z[j + 1], k)};
    lane::gauss_forward(center, ring, fwd);
    D4 min_cross = fwd.edge_cross_norm[0];
    D4 min_dot = fwd.tip_dot[0];
    for (int j = 1; j < 8; ++j) {
      min_cross = vmin(min_cross, fwd.edge_cross_norm[j]);
      min_dot = vmin(min_dot, fwd.tip_dot[j]);
    }
    store(out.error, k, fwd.error);
    store(out.min_cross_norm, k, min_cross);
    store(out.min_tip_dot, k, min_dot);
  }
  if (k < end) gauss_error_scalar(batch, out, k, end);
}

#else

void gauss_error_avx2(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end) {
  gauss_error_scalar(batch, out, begin, end);
}

#endif

}  // namespace pds::kernels
