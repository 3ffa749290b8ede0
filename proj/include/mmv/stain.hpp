#pragma once

#include <Eigen/Core>

#include "mmv/ndimage.hpp"

namespace mmv {

/// RGB x {hematoxylin, eosin} optical-density basis, unit-norm columns.
using StainMatrix = Eigen::Matrix<double, 3, 2>;
using StainMaxima = Eigen::Vector2d;

/// Reference H&E basis and 99th-percentile concentrations used by the widely
/// circulated Macenko reference implementation.
StainMatrix reference_stain_matrix();
StainMaxima reference_max_concentrations();

struct StainParams {
  double io = 255.0;     ///< transmitted-light intensity
  double beta = 0.15;    ///< OD threshold below which a pixel is transparent
  double alpha = 1.0;    ///< percentile for the robust extreme angles
  StainMatrix reference = reference_stain_matrix();
  StainMaxima reference_max = reference_max_concentrations();

  void validate() const;
};

struct StainFit {
  StainMatrix stains;    ///< hematoxylin first
  StainMaxima max_conc;  ///< 99th percentile concentration per stain
};

/// Angles closer than this are reported as DegenerateStains.
inline constexpr double kMinStainSeparation = 1e-3;  // radians

/// Estimates the stain basis of a CYX (C=3) RGB image with values in (0, io].
StainFit macenko_fit(const Image& rgb, const StainParams& params = {});

/// Re-expresses `rgb` in the reference basis with reference concentration maxima.
Image macenko_normalize(const Image& rgb, const StainParams& params = {});

/// Optical density -log(I/io) as a 3 x (Y*X) matrix.
Eigen::Matrix3Xd optical_density(const Image& rgb, double io);

/// Per-pixel least-squares stain concentrations (2 x N) for OD under `stains`.
Eigen::Matrix2Xd stain_concentrations(const Eigen::Matrix3Xd& od, const StainMatrix& stains);

/// Renders concentrations through a stain basis back to RGB in (0, io].
Image render_stains(const Eigen::Matrix2Xd& conc, const StainMatrix& stains, double io,
                    std::size_t height, std::size_t width);

}  // namespace mmv
