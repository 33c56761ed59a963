#include "semsplat/nn.hpp"

#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat::nn {

namespace {
Param make_param(std::string name, Eigen::Index rows, Eigen::Index cols) {
  Param p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  return p;
}
}  // namespace

Dense::Dense(std::string name, int in, int out)
    : weight(make_param(name + ".weight", in, out)), bias(make_param(name + ".bias", 1, out)) {}

Matrix Dense::forward(const Matrix& x) const {
  require(x.cols() == weight.value.rows(), "Dense: input width mismatch for " + weight.name);
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy, bool need_input_grad) {
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad.row(0) += dy.colwise().sum();
  if (!need_input_grad) return {};
  return dy * weight.value.transpose();
}

Conv3x3::Conv3x3(std::string name, int in, int out)
    : weight(make_param(name + ".weight", 9 * in, out)), bias(make_param(name + ".bias", 1, out)) {}

FeatureMap Conv3x3::forward(const FeatureMap& x) const {
  const int c_in = in();
  require(x.channels() == c_in, "Conv3x3: input channel mismatch for " + weight.name);
  const int H = x.height, W = x.width;
  FeatureMap y(H, W, out());
  y.data.rowwise() = bias.value.row(0);
  for (int k = 0; k < 9; ++k) {
    const int oy = k / 3 - 1, ox = k % 3 - 1;
    const Matrix z = x.data * weight.value.middleRows(static_cast<Eigen::Index>(k) * c_in, c_in);
    for (int py = 0; py < H; ++py) {
      const int sy = py + oy;
      if (sy < 0 || sy >= H) continue;
      for (int px = 0; px < W; ++px) {
        const int sx = px + ox;
        if (sx < 0 || sx >= W) continue;
        y.data.row(py * W + px) += z.row(sy * W + sx);
      }
    }
  }
  return y;
}

FeatureMap Conv3x3::backward(const FeatureMap& x, const FeatureMap& dy, bool need_input_grad) {
  const int c_in = in();
  const int H = x.height, W = x.width;
  require(dy.height == H && dy.width == W && dy.channels() == out(), "Conv3x3: gradient shape mismatch");
  FeatureMap dx;
  if (need_input_grad) dx = FeatureMap(H, W, c_in);
  Matrix dz(dy.data.rows(), dy.data.cols());
  for (int k = 0; k < 9; ++k) {
    const int oy = k / 3 - 1, ox = k % 3 - 1;
    dz.setZero();
    for (int py = 0; py < H; ++py) {
      const int sy = py + oy;
      if (sy < 0 || sy >= H) continue;
      for (int px = 0; px < W; ++px) {
        const int sx = px + ox;
        if (sx < 0 || sx >= W) continue;
        dz.row(sy * W + sx) = dy.data.row(py * W + px);
      }
    }
    const Eigen::Index r0 = static_cast<Eigen::Index>(k) * c_in;
    weight.grad.middleRows(r0, c_in).noalias() += x.data.transpose() * dz;
    if (need_input_grad) dx.data.noalias() += dz * weight.value.middleRows(r0, c_in).transpose();
  }
  bias.grad.row(0) += dy.data.colwise().sum();
  return dx;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  return (x.array() > 0.0).select(dy, Matrix::Zero(dy.rows(), dy.cols()));
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void init_uniform(Param& p, int fan_in, double gain, std::mt19937_64& rng) {
  const double bound = std::sqrt(gain / std::max(1, fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  p.zero_grad();
}

}  // namespace semsplat::nn
