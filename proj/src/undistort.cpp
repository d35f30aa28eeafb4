#include <algorithm>
#include <cmath>
#include <numbers>

#include "mia/errors.hpp"
#include "mia/fpv.hpp"

namespace mia {

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("image size must be positive");
  if (!(fx > 0) || !(fy > 0)) throw ValidationError("focal lengths must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
    throw ValidationError("principal point outside the image");
  }
  if (!std::isfinite(k1) || !std::isfinite(k2)) throw ValidationError("non-finite distortion");
}

double CameraIntrinsics::half_hfov() const { return std::atan((width / 2.0) / fx); }

CameraIntrinsics intrinsics_from_metadata(const ImageMetadata& m) {
  if (!m.camera_params || m.width <= 0 || m.height <= 0) {
    throw ValidationError("metadata for " + m.id + " lacks camera size or parameters");
  }
  CameraIntrinsics intr;
  intr.width = m.width;
  intr.height = m.height;
  intr.fx = intr.fy = m.camera_params->focal * m.width;
  intr.cx = m.width / 2.0;
  intr.cy = m.height / 2.0;
  intr.model = m.camera_type == CameraType::kFisheye ? LensModel::kFisheye : LensModel::kPinhole;
  intr.k1 = m.camera_params->k1;
  intr.k2 = m.camera_params->k2;
  return intr;
}

namespace {

constexpr double kRadialTolerance = 1e-6;

double radial_poly(double v, double k1, double k2) {
  const double v2 = v * v;
  return v * (1.0 + k1 * v2 + k2 * v2 * v2);
}

double radial_poly_derivative(double v, double k1, double k2) {
  const double v2 = v * v;
  return 1.0 + 3.0 * k1 * v2 + 5.0 * k2 * v2 * v2;
}

}  // namespace

double distort_radius(double r_undistorted, double k1, double k2, RadialModel model) {
  if (model == RadialModel::kFisheyeTheta) {
    return radial_poly(std::atan(r_undistorted), k1, k2);
  }
  return radial_poly(r_undistorted, k1, k2);
}

std::optional<double> undistort_radius(double r_distorted, double k1, double k2,
                                       RadialModel model) {
  if (r_distorted == 0.0) return 0.0;
  double v = r_distorted;
  bool converged = false;
  for (int i = 0; i < 50; ++i) {
    const double residual = radial_poly(v, k1, k2) - r_distorted;
    if (std::abs(residual) <= kRadialTolerance * 1e-3) {
      converged = true;
      break;
    }
    const double d = radial_poly_derivative(v, k1, k2);
    if (!(d > 0)) return std::nullopt;
    v -= residual / d;
    if (!std::isfinite(v) || v < 0) return std::nullopt;
  }
  if (!converged && std::abs(radial_poly(v, k1, k2) - r_distorted) > kRadialTolerance) {
    return std::nullopt;
  }
  if (!(radial_poly_derivative(v, k1, k2) > 0)) return std::nullopt;
  if (model == RadialModel::kFisheyeTheta) {
    if (v >= std::numbers::pi / 2) return std::nullopt;
    return std::tan(v);
  }
  return v;
}

namespace {

void sample_bilinear(const Image& src, double x, double y, std::uint8_t* out) {
  // Pixel (i, j) has its center at (i + 0.5, j + 0.5).
  const double fx = x - 0.5, fy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0, ay = fy - y0;
  for (int ch = 0; ch < src.channels; ++ch) {
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
        if (w == 0.0) continue;
        const int xi = std::clamp(x0 + dx, 0, src.width - 1);
        const int yi = std::clamp(y0 + dy, 0, src.height - 1);
        acc += w * src.at(xi, yi, ch);
      }
    }
    out[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
  }
}

// Largest undistorted radius the output camera may use; keeps very wide
// fisheyes from collapsing the pinhole focal length.
constexpr double kMaxHalfFov = 80.0 * std::numbers::pi / 180.0;

}  // namespace

CameraIntrinsics undistorted_intrinsics(const CameraIntrinsics& intr, RadialModel model) {
  if (intr.model != LensModel::kFisheye) {
    throw ValidationError("undistortion requires fisheye intrinsics");
  }
  intr.validate();
  const double r_edge_d = (intr.width / 2.0) / intr.fx;
  auto r_edge_u = undistort_radius(r_edge_d, intr.k1, intr.k2, model);
  const double r_cap = std::tan(kMaxHalfFov);
  if (!r_edge_u || *r_edge_u > r_cap) r_edge_u = r_cap;

  CameraIntrinsics out = intr;
  out.model = LensModel::kPinhole;
  out.k1 = out.k2 = 0.0;
  out.fx = (intr.width / 2.0) / *r_edge_u;
  out.fy = out.fx * intr.fy / intr.fx;
  return out;
}

UndistortResult undistort_fisheye(const Image& image, const CameraIntrinsics& intr,
                                  RadialModel model) {
  UndistortResult result;
  result.intrinsics = undistorted_intrinsics(intr, model);
  if (image.width != intr.width || image.height != intr.height) {
    throw ValidationError("image size does not match intrinsics");
  }
  const auto& out_intr = result.intrinsics;

  Image& out = result.image;
  out.width = image.width;
  out.height = image.height;
  out.channels = image.channels;
  out.pixels.assign(image.pixels.size(), 0);

  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double xn = (x + 0.5 - out_intr.cx) / out_intr.fx;
      const double yn = (y + 0.5 - out_intr.cy) / out_intr.fy;
      const double ru = std::hypot(xn, yn);
      double scale = 1.0;
      if (ru > 0) {
        const double v = model == RadialModel::kFisheyeTheta ? std::atan(ru) : ru;
        if (!(radial_poly_derivative(v, intr.k1, intr.k2) > 0)) {
          ++result.invalid_pixels;
          continue;
        }
        scale = distort_radius(ru, intr.k1, intr.k2, model) / ru;
      }
      const double sx = intr.cx + intr.fx * xn * scale;
      const double sy = intr.cy + intr.fy * yn * scale;
      if (sx < 0 || sy < 0 || sx > intr.width || sy > intr.height) continue;
      sample_bilinear(image, sx, sy, &out.at(x, y, 0));
    }
  }
  return result;
}

}  // namespace mia
