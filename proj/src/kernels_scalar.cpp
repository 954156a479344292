#include "pds/kernels.hpp"

#include "pds/gauss_lane.hpp"

#include <algorithm>
#include <atomic>

namespace pds::kernels {

namespace {
std::atomic<int> g_forced{-1};
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
#if defined(PDS_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool has_avx2 = __builtin_cpu_supports("avx2");
  if (has_avx2) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

Isa active_isa() {
  const int forced = g_forced.load();
  if (forced < 0) return detected_isa();
  const auto want = static_cast<Isa>(forced);
  return (want == Isa::Avx2 && detected_isa() != Isa::Avx2) ? Isa::Scalar : want;
}

void force_isa(std::optional<Isa> isa) { g_forced.store(isa ? static_cast<int>(*isa) : -1); }

void FanBatch::resize(std::size_t n) {
  count = n;
  for (int s = 0; s < 9; ++s) {
    x[s].resize(n);
    y[s].resize(n);
    z[s].resize(n);
  }
}

void GaussBatchResult::resize(std::size_t n) {
  error.resize(n);
  min_cross_norm.resize(n);
  min_tip_dot.resize(n);
}

void gauss_error_scalar(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end) {
  lane::GaussForward<double> fwd;
  for (std::size_t k = begin; k < end; ++k) {
    const lane::V3<double> center{batch.x[0][k], batch.y[0][k], batch.z[0][k]};
    std::array<lane::V3<double>, 8> ring;
    for (int j = 0; j < 8; ++j) ring[j] = {batch.x[j + 1][k], batch.y[j + 1][k], batch.z[j + 1][k]};
    lane::gauss_forward(center, ring, fwd);
    out.error[k] = fwd.error;
    out.min_cross_norm[k] = *std::min_element(fwd.edge_cross_norm.begin(), fwd.edge_cross_norm.end());
    out.min_tip_dot[k] = *std::min_element(fwd.tip_dot.begin(), fwd.tip_dot.end());
  }
}

void gauss_error(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end) {
  if (active_isa() == Isa::Avx2)
    gauss_error_avx2(batch, out, begin, end);
  else
    gauss_error_scalar(batch, out, begin, end);
}

void gauss_error(const FanBatch& batch, GaussBatchResult& out) {
  out.resize(batch.count);
  gauss_error(batch, out, 0, batch.count);
}

}  // namespace pds::kernels
