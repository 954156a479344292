#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

namespace pds::kernels {

enum class Isa { Scalar, Avx2 };

const char* isa_name(Isa isa);
/// Best instruction set supported by both this build and the running CPU.
Isa detected_isa();
/// Instruction set used by `gauss_error`; defaults to `detected_isa()`.
Isa active_isa();
/// Pin dispatch to one path (tests); nullopt restores auto-detection.
/// Requesting an unsupported path falls back to Scalar.
void force_isa(std::optional<Isa> isa);

/// Structure-of-arrays batch of one-rings. Slot 0 is the center point,
/// slots 1..8 are the fan neighbors in counterclockwise order.
struct FanBatch {
  std::size_t count = 0;
  std::array<std::vector<double>, 9> x, y, z;

  void resize(std::size_t n);
};

struct GaussBatchResult {
  std::vector<double> error;           // A_i
  std::vector<double> min_cross_norm;  // smallest twice-triangle-area of the fan
  std::vector<double> min_tip_dot;     // smallest face_normal . vertex_normal

  void resize(std::size_t n);
};

void gauss_error_scalar(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end);
void gauss_error_avx2(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end);

/// Runtime-dispatched evaluation over [0, batch.count); resizes `out`.
void gauss_error(const FanBatch& batch, GaussBatchResult& out);
/// Runtime-dispatched evaluation over [begin, end); `out` must be sized.
void gauss_error(const FanBatch& batch, GaussBatchResult& out, std::size_t begin, std::size_t end);

}  // namespace pds::kernels
