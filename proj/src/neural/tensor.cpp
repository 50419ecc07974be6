// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/tensor.hpp"

namespace relit::nn {

Tensor4::Tensor4(int batch, int channels, int height, int width, double fill)
    : n_(batch), c_(channels), h_(height), w_(width) {
  if (batch < 0 || channels < 0 || height < 0 || width < 0) {
    throw InputError("tensor dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(batch) * channels * height * width, fill);
}

Tensor4 Tensor4::random_normal(int batch, int channels, int height, int width, Rng& rng,
                               double stddev) {
  Tensor4 t(batch, channels, height, width);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data_) {
    v = dist(rng);
  }
  return t;
}

Tensor4 Tensor4::random_uniform(int batch, int channels, int height, int width, Rng& rng,
                                double lo, double hi) {
  Tensor4 t(batch, channels, height, width);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data_) {
    v = dist(rng);
  }
  return t;
}

std::string Tensor4::shape_string() const {
  return std::to_string(n_) + "x" + std::to_string(c_) + "x" + std::to_string(h_) + "x" +
         std::to_string(w_);
}

Tensor4& Tensor4::operator+=(const Tensor4& o) {
  require_same_shape(*this, o, "tensor addition");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] += o.data_[i];
  }
  return *this;
}

Tensor4& Tensor4::operator*=(double s) {
  for (double& v : data_) {
    v *= s;
  }
  return *this;
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InputError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace relit::nn
