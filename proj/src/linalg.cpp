#include "mscl/linalg.hpp"

#include <stdexcept>
#include <string>

namespace mscl {

Activation parse_activation(std::string_view name) {
  if (name == "silu") return Activation::silu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::silu:
      return "silu";
    case Activation::tanh:
      return "tanh";
  }
  return "?";
}

Mat activate(const Mat& z, Activation a, Mat* derivative) {
  switch (a) {
    case Activation::silu: {
      const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
      if (derivative) *derivative = (s * (1.0 + z.array() * (1.0 - s))).matrix();
      return (z.array() * s).matrix();
    }
    case Activation::tanh: {
      Mat t = z.array().tanh().matrix();
      if (derivative) *derivative = (1.0 - t.array().square()).matrix();
      return t;
    }
  }
  return z;
}

Mat activate_backward(const Mat& z, const Mat& upstream, Activation a) {
  switch (a) {
    case Activation::silu:
    {
      const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
      return (upstream.array() * s * (1.0 + z.array() * (1.0 - s))).matrix();
    }
    case Activation::tanh:
    {
      const Eigen::ArrayXXd t = z.array().tanh();
      return (upstream.array() * (1.0 - t.square())).matrix();
    }
  }
  return upstream;
}

Mat row_softmax(const Mat& s) {
  Mat p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Mat col_softmax(const Mat& s) {
  Mat p(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double mx = s.col(j).maxCoeff();
    p.col(j) = (s.col(j).array() - mx).exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

Mat row_softmax_backward(const Mat& p, const Mat& dp) {
  const Vec inner = p.cwiseProduct(dp).rowwise().sum();
  return p.cwiseProduct(dp.colwise() - inner);
}

Mat col_softmax_backward(const Mat& p, const Mat& dp) {
  const Eigen::RowVectorXd inner = p.cwiseProduct(dp).colwise().sum();
  return p.cwiseProduct(dp.rowwise() - inner);
}

Vec softmax(const Vec& x) {
  Vec e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace mscl
