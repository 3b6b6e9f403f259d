#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcnet {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

enum class ErrorKind {
  shape,
  invalid_argument,
  numeric,
  io,
  config,
  divergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& msg);

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

/// Dense n-dimensional array of doubles, row-major flat storage.
/// Values are immutable once handed to a Graph; mutation helpers exist for
/// construction and for optimizer updates on owned buffers.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor uninit(Shape shape);
  static Tensor from(Shape shape, std::vector<double> vals);
  static Tensor from(std::vector<double> vals);  // rank-1
  static Tensor scalar(double v);
  static Tensor row(std::initializer_list<double> vals);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }

  // 2-d view: rank 0 -> 1x1, rank 1 -> 1xN, rank 2 -> natural. Higher ranks throw.
  Index rows() const;
  Index cols() const;

  double item() const;
  double operator[](Index i) const { return data_[i]; }
  double& operator[](Index i) { return data_[i]; }
  double at(Index r, Index c) const { return data_[r * cols() + c]; }
  double& at(Index r, Index c) { return data_[r * cols() + c]; }

  ArrMap array() { return ArrMap(data_.data(), data_.size()); }
  ConstArrMap array() const { return ConstArrMap(data_.data(), data_.size()); }
  MatMap matrix();
  ConstMatMap matrix() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const { return data_.allFinite(); }
  std::string shape_str() const;

  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  Eigen::ArrayXd data_;
};

Index shape_size(const Shape& s);
std::string shape_str(const Shape& s);

}  // namespace pcnet
