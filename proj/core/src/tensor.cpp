#include "mxfr/tensor.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

namespace mxfr {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  int64_t n = 1;
  for (int d : shape) {
    assert(d >= 1);
    n *= d;
  }
  data.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::vector_of(std::vector<double> v) {
  Tensor t;
  t.shape = {static_cast<int>(v.size())};
  t.data = std::move(v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor identity_init(int rows, int cols) {
  Tensor t({rows, cols});
  int n = rows < cols ? rows : cols;
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace mxfr
