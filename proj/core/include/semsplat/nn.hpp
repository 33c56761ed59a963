#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace semsplat::nn {

/// Rows are samples (pixels), columns are channels.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W feature map with channels contiguous per pixel.
struct FeatureMap {
  int height = 0;
  int width = 0;
  Matrix data;  // (H*W) x C

  FeatureMap() = default;
  FeatureMap(int h, int w, int c) : height(h), width(w), data(Matrix::Zero(static_cast<Eigen::Index>(h) * w, c)) {}
  int channels() const { return static_cast<int>(data.cols()); }
};

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Fully connected layer applied per row.
struct Dense {
  Param weight;  // in x out
  Param bias;    // 1 x out

  Dense() = default;
  Dense(std::string name, int in, int out);
  int in() const { return static_cast<int>(weight.value.rows()); }
  int out() const { return static_cast<int>(weight.value.cols()); }

  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients; returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy, bool need_input_grad = true);
};

/// 3x3 convolution, stride 1, zero padding, same output size.
struct Conv3x3 {
  Param weight;  // (9 * in) x out, tap-major: rows [k*in, (k+1)*in) belong to tap k
  Param bias;    // 1 x out

  Conv3x3() = default;
  Conv3x3(std::string name, int in, int out);
  int in() const { return static_cast<int>(weight.value.rows() / 9); }
  int out() const { return static_cast<int>(weight.value.cols()); }

  FeatureMap forward(const FeatureMap& x) const;
  FeatureMap backward(const FeatureMap& x, const FeatureMap& dy, bool need_input_grad = true);
};

Matrix relu(const Matrix& x);
/// dL/dx for y = relu(x), given the forward input x.
Matrix relu_backward(const Matrix& x, const Matrix& dy);
Matrix sigmoid(const Matrix& x);

/// Uniform fan-in initialization: U(-b, b) with b = sqrt(gain / fan_in).
void init_uniform(Param& p, int fan_in, double gain, std::mt19937_64& rng);

}  // namespace semsplat::nn
