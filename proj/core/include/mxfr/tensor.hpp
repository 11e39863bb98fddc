#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mxfr {

// Dense row-major double tensor. Rank 1 or 2 is all the model needs.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor vector_of(std::vector<double> v);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const {
    return data[static_cast<size_t>(i) * cols() + j];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_str() const;
};

// M[i][j] = 1 if i == j (truncated when non-square), else 0.
Tensor identity_init(int rows, int cols);

// FNV-1a 64-bit over a byte range; used for file digests and the
// checkpoint trailer checksum.
uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xCBF29CE484222325ULL);

}  // namespace mxfr
