#include "pcnet/tensor.hpp"

#include <sstream>

namespace pcnet {

void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape) {
  Tensor t;
  Index n = shape_size(shape);
  require(n >= 0, ErrorKind::shape, "negative dimension in " + pcnet::shape_str(shape));
  t.shape_ = std::move(shape);
  t.data_ = Eigen::ArrayXd::Zero(n);
  return t;
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t = uninit(std::move(shape));
  t.data_.setConstant(v);
  return t;
}

Tensor Tensor::uninit(Shape shape) {
  Tensor t;
  Index n = shape_size(shape);
  require(n >= 0, ErrorKind::shape, "negative dimension in " + pcnet::shape_str(shape));
  t.shape_ = std::move(shape);
  t.data_.resize(n);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> vals) {
  Tensor t;
  Index n = shape_size(shape);
  require(n == static_cast<Index>(vals.size()), ErrorKind::shape,
          "data length " + std::to_string(vals.size()) + " does not match shape " +
              pcnet::shape_str(shape));
  t.shape_ = std::move(shape);
  t.data_ = Eigen::Map<const Eigen::ArrayXd>(vals.data(), n);
  return t;
}

Tensor Tensor::from(std::vector<double> vals) {
  const Index n = static_cast<Index>(vals.size());
  return from(Shape{n}, std::move(vals));
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape_ = {};
  t.data_.resize(1);
  t.data_[0] = v;
  return t;
}

Tensor Tensor::row(std::initializer_list<double> vals) {
  return from({1, static_cast<Index>(vals.size())}, std::vector<double>(vals));
}

Index Tensor::rows() const {
  switch (shape_.size()) {
    case 0: return 1;
    case 1: return 1;
    case 2: return shape_[0];
    default: fail(ErrorKind::shape, "rank-" + std::to_string(shape_.size()) + " tensor has no 2-d view");
  }
}

Index Tensor::cols() const {
  switch (shape_.size()) {
    case 0: return 1;
    case 1: return shape_[0];
    case 2: return shape_[1];
    default: fail(ErrorKind::shape, "rank-" + std::to_string(shape_.size()) + " tensor has no 2-d view");
  }
}

double Tensor::item() const {
  require(size() == 1, ErrorKind::shape, "item() on tensor of size " + std::to_string(size()));
  return data_[0];
}

MatMap Tensor::matrix() { return MatMap(data_.data(), rows(), cols()); }

ConstMatMap Tensor::matrix() const { return ConstMatMap(data_.data(), rows(), cols()); }

std::string Tensor::shape_str() const { return pcnet::shape_str(shape_); }

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == size(), ErrorKind::shape,
          "reshape " + shape_str() + " -> " + pcnet::shape_str(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

}  // namespace pcnet
