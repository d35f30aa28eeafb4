#pragma once

#include <limits>
#include <vector>

#include "mia/bev.hpp"
#include "mia/fpv.hpp"
#include "mia/raster.hpp"

namespace mia {

enum class MaskKind { kFrustum, kRaycast, kCombined };

struct VisibilityMask {
  BinaryRaster visible;
  MaskKind kind = MaskKind::kCombined;
  int ego_row = 0;
  int ego_col = 0;

  friend bool operator==(const VisibilityMask&, const VisibilityMask&) = default;
};

inline constexpr int kDefaultPenetrationPx = 4;
inline constexpr int kUnlimitedPenetration = std::numeric_limits<int>::max();

// Wedge apexed at the ego pixel, opening upwards with the given half-angle
// (radians). Pixels level with or behind the ego are hidden, except the ego.
VisibilityMask frustum_mask(double half_angle_rad, int alpha_px);
VisibilityMask frustum_mask(const CameraIntrinsics& intr, int alpha_px);

struct Cell {
  int row;
  int col;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Every cell the segment between two cell centers touches, in the order
// the segment reaches them. Where the segment passes exactly through a
// grid corner both side cells are listed before the diagonal one.
std::vector<Cell> supercover_line(Cell from, Cell to);

// A pixel is visible unless its ray (supercover from the ego) has already
// travelled `penetration_px` cells past the first Building cell; the ray
// stops there.
VisibilityMask raycast_mask(const BinaryRaster& buildings, int ego_row, int ego_col,
                            int penetration_px = kDefaultPenetrationPx);
VisibilityMask raycast_mask(const SemanticBev& bev, int penetration_px = kDefaultPenetrationPx);

// Pixel-wise AND. Throws ValidationError on shape mismatch.
VisibilityMask combined_mask(const VisibilityMask& a, const VisibilityMask& b);

// 255 visible, 0 hidden.
Grid<std::uint8_t> mask_to_gray(const VisibilityMask& m);
VisibilityMask mask_from_gray(const Grid<std::uint8_t>& g, MaskKind kind = MaskKind::kCombined);

}  // namespace mia
