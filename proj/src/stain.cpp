#include "mmv/stain.hpp"

#include <cmath>
#include <Eigen/Eigenvalues>

#include "mmv/normalize.hpp"

namespace mmv {

StainMatrix reference_stain_matrix() {
  StainMatrix m;
  m << 0.5626, 0.2159,
       0.7201, 0.8012,
       0.4062, 0.5581;
  m.colwise().normalize();
  return m;
}

StainMaxima reference_max_concentrations() { return {1.9705, 1.0308}; }

void StainParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ValidationError, what); };
  if (!(io > 0.0)) fail("stain io must be > 0");
  if (!(beta > 0.0)) fail("stain beta must be > 0");
  if (!(alpha > 0.0 && alpha < 50.0)) fail("stain alpha must be in (0,50)");
  for (int c = 0; c < 2; ++c)
    if (std::abs(reference.col(c).norm() - 1.0) > 1e-6) fail("reference stain columns must be unit norm");
  if (!(reference_max.array() > 0.0).all()) fail("reference max concentrations must be > 0");
}

namespace {

void require_rgb(const Image& rgb) {
  if (rgb.axes() != AxisList{Axis::C, Axis::Y, Axis::X} || rgb.shape()[0] != 3)
    throw Error(Errc::InvalidArgument,
                "stain normalization needs a CYX image with C=3, got " + axes_string(rgb.axes()) + " " +
                    shape_string(rgb.shape()));
}

template <typename Row>
double row_percentile(const Row& row, double p) {
  std::vector<double> v(row.data(), row.data() + row.size());
  return percentile_inplace(std::span<double>(v), p);
}

}  // namespace

Eigen::Matrix3Xd optical_density(const Image& rgb, double io) {
  require_rgb(rgb);
  const auto n = Eigen::Index(rgb.shape()[1] * rgb.shape()[2]);
  // Planar CYX storage maps directly onto a row-major 3 x N matrix.
  const Eigen::Map<const Eigen::Matrix<float, 3, Eigen::Dynamic, Eigen::RowMajor>> px(rgb.data().data(), 3, n);
  const double floor = io * 1e-6;
  return px.cast<double>().unaryExpr([&](double v) { return -std::log(std::clamp(v, floor, io) / io); });
}

Eigen::Matrix2Xd stain_concentrations(const Eigen::Matrix3Xd& od, const StainMatrix& stains) {
  const Eigen::Matrix<double, 2, 3> pinv = (stains.transpose() * stains).inverse() * stains.transpose();
  return pinv * od;
}

Image render_stains(const Eigen::Matrix2Xd& conc, const StainMatrix& stains, double io,
                    std::size_t height, std::size_t width) {
  Image out({Axis::C, Axis::Y, Axis::X}, {3, height, width});
  const auto n = Eigen::Index(height * width);
  Eigen::Map<Eigen::Matrix<float, 3, Eigen::Dynamic, Eigen::RowMajor>> px(out.data().data(), 3, n);
  const double floor = io * 1e-6;
  px = (io * (-(stains * conc).array()).exp()).min(io).max(floor).cast<float>().matrix();
  return out;
}

StainFit macenko_fit(const Image& rgb, const StainParams& params) {
  params.validate();
  const Eigen::Matrix3Xd od = optical_density(rgb, params.io);

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < od.cols(); ++i)
    if ((od.col(i).array() >= params.beta).all()) keep.push_back(i);
  if (keep.size() < 2)
    throw Error(Errc::TooFewStainPixels,
                std::to_string(keep.size()) + " pixels above the transparency threshold");
  Eigen::Matrix3Xd tissue(3, Eigen::Index(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) tissue.col(Eigen::Index(k)) = od.col(keep[k]);

  const Eigen::Vector3d mean = tissue.rowwise().mean();
  const Eigen::Matrix3Xd centered = tissue.colwise() - mean;
  const Eigen::Matrix3d cov = centered * centered.transpose() / double(tissue.cols() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);

  // Plane of the two largest eigenvectors; orient the principal one along the
  // positive OD octant so projected angles stay inside (-pi/2, pi/2).
  Eigen::Vector3d e1 = eig.eigenvectors().col(2);
  Eigen::Vector3d e2 = eig.eigenvectors().col(1);
  if (e1.sum() < 0) e1 = -e1;
  if (e2(0) < 0) e2 = -e2;

  const Eigen::ArrayXd t0 = (e1.transpose() * tissue).transpose().array();
  const Eigen::ArrayXd t1 = (e2.transpose() * tissue).transpose().array();
  std::vector<double> phi(std::size_t(t0.size()));
  for (Eigen::Index i = 0; i < t0.size(); ++i) phi[std::size_t(i)] = std::atan2(t1(i), t0(i));
  const double min_phi = percentile(std::span<const double>(phi), params.alpha);
  const double max_phi = percentile(std::span<const double>(phi), 100.0 - params.alpha);
  if (max_phi - min_phi < kMinStainSeparation)
    throw Error(Errc::DegenerateStains, "extreme stain angles coincide (single-stain image?)");

  const Eigen::Vector3d v_min = (e1 * std::cos(min_phi) + e2 * std::sin(min_phi)).normalized();
  const Eigen::Vector3d v_max = (e1 * std::cos(max_phi) + e2 * std::sin(max_phi)).normalized();

  StainFit fit;
  if (v_min(0) > v_max(0)) {
    fit.stains << v_min, v_max;
  } else {
    fit.stains << v_max, v_min;
  }

  const Eigen::Matrix2Xd conc = stain_concentrations(od, fit.stains);
  fit.max_conc << row_percentile(conc.row(0).eval(), 99.0), row_percentile(conc.row(1).eval(), 99.0);
  if (!(fit.max_conc.array() > 0.0).all())
    throw Error(Errc::DegenerateStains, "non-positive 99th percentile stain concentration");
  return fit;
}

Image macenko_normalize(const Image& rgb, const StainParams& params) {
  const StainFit fit = macenko_fit(rgb, params);
  const Eigen::Matrix3Xd od = optical_density(rgb, params.io);
  Eigen::Matrix2Xd conc = stain_concentrations(od, fit.stains);
  conc.array().colwise() *= (params.reference_max.array() / fit.max_conc.array());
  Image out = render_stains(conc, params.reference, params.io, rgb.shape()[1], rgb.shape()[2]);
  out.set_pixel_size(rgb.pixel_size());
  return out;
}

}  // namespace mmv
