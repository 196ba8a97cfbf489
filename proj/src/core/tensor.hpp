#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace diffanon {

// Dense row-major f64 tensor. Rank is 1..3 in practice ([N], [C,L],
// [Cout,Cin,K]); no strides, no views.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor randn(std::vector<int> shape, SplitMix64& rng);

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  // 2-d accessors; rows = channels, cols = frames.
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  double item() const;  // value of a 1-element tensor

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);
};

std::int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_distance(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace diffanon
