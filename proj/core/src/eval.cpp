#include "semsplat/eval.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "semsplat/errors.hpp"

namespace semsplat {

double ate_rmse(const std::vector<Pose>& est, const std::vector<Pose>& gt) {
  require(est.size() == gt.size(), "ate_rmse: trajectory lengths differ");
  require(est.size() >= 3, "ate_rmse: at least three poses required");
  const auto n = static_cast<Eigen::Index>(est.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = est[static_cast<std::size_t>(i)].translation;
    dst.col(i) = gt[static_cast<std::size_t>(i)].translation;
  }
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
  const Eigen::Matrix3Xd aligned = (t.topLeftCorner<3, 3>() * src).colwise() + t.topRightCorner<3, 1>();
  return std::sqrt((aligned - dst).colwise().squaredNorm().mean());
}

double psnr(const ImageD& a, const ImageD& b) {
  require(a.same_shape(b) && !a.empty(), "psnr: shape mismatch or empty image");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sse += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = sse / static_cast<double>(a.size());
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double depth_l1_metric(const ImageD& rendered, const ImageD& gt, const MaskImage* valid) {
  require(rendered.same_shape(gt) && gt.channels() == 1, "depth_l1_metric: shape mismatch");
  if (valid) require(valid->same_extent(gt), "depth_l1_metric: mask shape mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool ok = valid ? (*valid)[i] != 0 : gt[i] > 0;
    if (!ok) continue;
    sum += std::abs(rendered[i] - gt[i]);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

ConfusionCounts::ConfusionCounts(int num_classes)
    : intersection(static_cast<std::size_t>(num_classes), 0),
      union_(static_cast<std::size_t>(num_classes), 0),
      gt_count(static_cast<std::size_t>(num_classes), 0) {}

void ConfusionCounts::add(const LabelImage& pred, const LabelImage& gt, std::uint8_t ignore) {
  require(pred.same_shape(gt), "miou: shape mismatch");
  const int k = static_cast<int>(intersection.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i];
    if (g == ignore) continue;
    require(g < k, "miou: ground-truth label out of range");
    const int p = pred[i];
    ++gt_count[static_cast<std::size_t>(g)];
    if (p == g) {
      ++intersection[static_cast<std::size_t>(g)];
      ++union_[static_cast<std::size_t>(g)];
    } else {
      ++union_[static_cast<std::size_t>(g)];
      if (p < k) ++union_[static_cast<std::size_t>(p)];
    }
  }
}

double ConfusionCounts::miou() const {
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < intersection.size(); ++c) {
    if (gt_count[c] == 0) continue;
    sum += static_cast<double>(intersection[c]) / static_cast<double>(union_[c]);
    ++present;
  }
  return present ? sum / present : 0.0;
}

double miou(const LabelImage& pred, const LabelImage& gt, int num_classes, std::uint8_t ignore) {
  require(num_classes >= 1, "miou: num_classes must be positive");
  ConfusionCounts counts(num_classes);
  counts.add(pred, gt, ignore);
  return counts.miou();
}

}  // namespace semsplat
