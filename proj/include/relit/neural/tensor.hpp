// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "relit/common.hpp"

namespace relit::nn {

/// Dense NCHW tensor of doubles.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int batch, int channels, int height, int width, double fill = 0.0);

  static Tensor4 like(const Tensor4& other, double fill = 0.0) {
    return {other.batch(), other.channels(), other.height(), other.width(), fill};
  }
  static Tensor4 random_normal(int batch, int channels, int height, int width, Rng& rng,
                               double stddev = 1.0);
  static Tensor4 random_uniform(int batch, int channels, int height, int width, Rng& rng,
                                double lo, double hi);

  [[nodiscard]] int batch() const { return n_; }
  [[nodiscard]] int channels() const { return c_; }
  [[nodiscard]] int height() const { return h_; }
  [[nodiscard]] int width() const { return w_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h_) * w_; }

  [[nodiscard]] std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }
  double& operator()(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  double operator()(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  std::vector<double>& data() { return data_; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }

  [[nodiscard]] bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  [[nodiscard]] std::string shape_string() const;

  Tensor4& operator+=(const Tensor4& o);
  Tensor4& operator*=(double s);

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  int n_ = 0;
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<double> data_;
};

/// Throws InputError naming `what` unless the shapes agree.
void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what);

}  // namespace relit::nn
