#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string_view>

namespace mscl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVec = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

enum class Activation { silu, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// With `derivative`, also stores act'(z) elementwise.
Mat activate(const Mat& z, Activation a, Mat* derivative = nullptr);
// upstream ⊙ f'(z)
Mat activate_backward(const Mat& z, const Mat& upstream, Activation a);

// Softmax of every row over its columns.
Mat row_softmax(const Mat& s);
// Softmax of every column over its rows.
Mat col_softmax(const Mat& s);
Mat row_softmax_backward(const Mat& p, const Mat& dp);
Mat col_softmax_backward(const Mat& p, const Mat& dp);

Vec softmax(const Vec& x);

// Adds the 1 x d bias to every row.
inline void add_row_bias(Mat& y, const Mat& bias) { y.rowwise() += bias.row(0); }

}  // namespace mscl
