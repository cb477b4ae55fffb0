#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rdf {

// Dense float32 tensor, row-major, rank 1..4. Images and feature maps are
// (C, H, W); patch matrices are (N, D); scalars are rank-1 size-1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, float v);
  static Tensor scalar(float v) { return full({1}, v); }

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // (C,H,W) accessor
  float& at(int c, int y, int x) {
    return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  // (N,D) accessor
  float& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  float at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  void fill(float v);
  bool all_finite() const;
  bool bitwise_equal(const Tensor& o) const;

  float min_value() const;
  float max_value() const;
  // mean over all elements, accumulated in double
  double mean_value() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace rdf
