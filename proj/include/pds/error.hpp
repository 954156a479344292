#pragma once

#include <stdexcept>
#include <string>

namespace pds {

/// Invalid input or configuration, detected before any numerical work.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation could not proceed (degenerate geometry, singular system).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTriangleError : public NumericalError {
 public:
  DegenerateTriangleError(int point, int triangle)
      : NumericalError("degenerate auxiliary triangle " + std::to_string(triangle) +
                       " at point " + std::to_string(point)),
        point_(point),
        triangle_(triangle) {}

  int point() const noexcept { return point_; }
  int triangle() const noexcept { return triangle_; }

 private:
  int point_;
  int triangle_;
};

}  // namespace pds
