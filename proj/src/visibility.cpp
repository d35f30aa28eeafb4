#include "mia/visibility.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "mia/errors.hpp"

namespace mia {

VisibilityMask frustum_mask(double half_angle_rad, int alpha_px) {
  constexpr double kAngleEps = 1e-9;
  VisibilityMask m;
  m.kind = MaskKind::kFrustum;
  m.ego_row = m.ego_col = alpha_px / 2;
  m.visible = BinaryRaster(alpha_px, alpha_px, 0);
  for (int r = 0; r < alpha_px; ++r) {
    const int ahead = m.ego_row - r;
    if (ahead <= 0) continue;
    for (int c = 0; c < alpha_px; ++c) {
      const int lateral = std::abs(c - m.ego_col);
      if (std::atan2(static_cast<double>(lateral), static_cast<double>(ahead)) <=
          half_angle_rad + kAngleEps) {
        m.visible.at(r, c) = 1;
      }
    }
  }
  m.visible.at(m.ego_row, m.ego_col) = 1;
  return m;
}

VisibilityMask frustum_mask(const CameraIntrinsics& intr, int alpha_px) {
  if (intr.model != LensModel::kPinhole) {
    throw ValidationError("frustum mask needs pinhole intrinsics");
  }
  intr.validate();
  return frustum_mask(intr.half_hfov(), alpha_px);
}

std::vector<Cell> supercover_line(Cell from, Cell to) {
  std::vector<Cell> cells;
  int dx = to.col - from.col;
  int dy = to.row - from.row;
  const int xstep = dx < 0 ? -1 : 1;
  const int ystep = dy < 0 ? -1 : 1;
  dx = std::abs(dx);
  dy = std::abs(dy);
  cells.reserve(static_cast<std::size_t>(dx + dy + 1));
  int x = from.col, y = from.row;
  cells.push_back({y, x});
  // Walk along the major axis; the error term tracks where the ideal
  // segment crosses the minor-axis cell boundary relative to the cell
  // corner.
  const bool x_major = dx >= dy;
  const int major = x_major ? dx : dy;
  const int minor = x_major ? dy : dx;
  const int dmajor = 2 * major, dminor = 2 * minor;
  int error = major, error_prev = major;
  for (int i = 0; i < major; ++i) {
    if (x_major) x += xstep; else y += ystep;
    error += dminor;
    if (error > dmajor) {
      if (x_major) y += ystep; else x += xstep;
      error -= dmajor;
      // Cell adjacent along the minor axis (entered first when the crossing
      // happens before the major-axis boundary) and along the major axis.
      const Cell minor_side = x_major ? Cell{y - ystep, x} : Cell{y, x - xstep};
      const Cell major_side = x_major ? Cell{y, x - xstep} : Cell{y - ystep, x};
      if (error + error_prev < dmajor) {
        cells.push_back(minor_side);
      } else if (error + error_prev > dmajor) {
        cells.push_back(major_side);
      } else {
        cells.push_back(minor_side);
        cells.push_back(major_side);
      }
    }
    cells.push_back({y, x});
    error_prev = error;
  }
  return cells;
}

VisibilityMask raycast_mask(const BinaryRaster& buildings, int ego_row, int ego_col,
                            int penetration_px) {
  if (!buildings.contains(ego_row, ego_col)) throw ValidationError("ego outside raster");
  if (penetration_px < 0) throw ValidationError("penetration must be non-negative");
  VisibilityMask m;
  m.kind = MaskKind::kRaycast;
  m.ego_row = ego_row;
  m.ego_col = ego_col;
  m.visible = BinaryRaster(buildings.rows(), buildings.cols(), 0);

  for (int r = 0; r < buildings.rows(); ++r) {
    for (int c = 0; c < buildings.cols(); ++c) {
      const auto ray = supercover_line({ego_row, ego_col}, {r, c});
      // Cells strictly before the target.
      const std::size_t before = ray.size() - 1;
      std::size_t first_building = before;
      for (std::size_t i = 0; i < before; ++i) {
        if (buildings.at(ray[i].row, ray[i].col)) {
          first_building = i;
          break;
        }
      }
      const bool visible = first_building == before ||
                           before - first_building <= static_cast<std::size_t>(penetration_px);
      m.visible.at(r, c) = visible ? 1 : 0;
    }
  }
  return m;
}

VisibilityMask raycast_mask(const SemanticBev& bev, int penetration_px) {
  return raycast_mask(bev.plane(SemanticClass::kBuilding), bev.ego_row, bev.ego_col,
                      penetration_px);
}

VisibilityMask combined_mask(const VisibilityMask& a, const VisibilityMask& b) {
  if (!a.visible.same_shape(b.visible)) throw ValidationError("mask shapes differ");
  VisibilityMask m = a;
  m.kind = MaskKind::kCombined;
  auto& d = m.visible.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] && b.visible.data()[i]) ? 1 : 0;
  return m;
}

Grid<std::uint8_t> mask_to_gray(const VisibilityMask& m) {
  Grid<std::uint8_t> g(m.visible.rows(), m.visible.cols(), 0);
  for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] = m.visible.data()[i] ? 255 : 0;
  return g;
}

VisibilityMask mask_from_gray(const Grid<std::uint8_t>& g, MaskKind kind) {
  VisibilityMask m;
  m.kind = kind;
  m.ego_row = g.rows() / 2;
  m.ego_col = g.cols() / 2;
  m.visible = BinaryRaster(g.rows(), g.cols(), 0);
  for (std::size_t i = 0; i < g.data().size(); ++i) m.visible.data()[i] = g.data()[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace mia
