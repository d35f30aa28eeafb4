#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. Written independently of the library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mia/bev.hpp"
#include "mia/dataset.hpp"
#include "mia/fpv.hpp"
#include "mia/visibility.hpp"

namespace oracle {

using namespace mia;

// Filter cascade.

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline double oracle_haversine(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDeg, p2 = lat2 * kDeg;
  const double dp = p2 - p1, dl = (lon2 - lon1) * kDeg;
  const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2 * 6371008.8 * std::asin(std::sqrt(a));
}

// Even-odd crossing test; callers avoid points exactly on edges.
inline bool oracle_inside(double x, double y, const Ring& ring) {
  bool in = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Vec2 a = ring[i], b = ring[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

inline double oracle_angle(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

inline const Ring kBoundary{{-80.02, 40.43}, {-80.00, 40.425}, {-79.98, 40.44},
                     {-79.995, 40.445}, {-80.01, 40.455}};

inline ImageMetadata make_meta(std::string id, std::string seq, GeoPoint p, double heading,
                        std::int64_t t) {
  ImageMetadata m;
  m.id = std::move(id);
  m.sequence_id = std::move(seq);
  m.recorded_point = p;
  m.sfm_point = p;
  m.recorded_heading = Heading(heading);
  m.sfm_heading = Heading(heading);
  m.captured_at = t;
  m.camera_model = "iphone12";
  m.camera_type = CameraType::kPerspective;
  return m;
}

inline std::vector<ImageMetadata> synthetic_corpus(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lon(-80.03, -79.97), lat(40.42, 40.46);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> when(1420070400000, 1700000000000);
  const auto& models = default_camera_allowlist();
  const std::vector<std::string> extra = {"nikon d90", "pixel 4", "gopro hero9"};

  std::vector<GeoPoint> bases;
  for (int s = 0; s < 12; ++s) bases.emplace_back(lat(rng), lon(rng));

  std::vector<ImageMetadata> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = static_cast<int>(unit(rng) * bases.size());
    const GeoPoint base = bases[static_cast<std::size_t>(s)];
    // Within about 15 m of the sequence base so sparsity matters.
    const GeoPoint p(base.lat() + (unit(rng) - 0.5) * 2.5e-4, base.lon() + (unit(rng) - 0.5) * 3.5e-4);
    auto m = make_meta("img" + std::to_string(100000 + i * 7919 % 100000), "seq" + std::to_string(s),
                       p, unit(rng) * 360.0, when(rng));
    m.id += "_" + std::to_string(i);
    const double r = unit(rng);
    m.camera_model = r < 0.85 ? models[static_cast<std::size_t>(unit(rng) * models.size())]
                              : extra[static_cast<std::size_t>(unit(rng) * extra.size())];
    const double t = unit(rng);
    m.camera_type = t < 0.6   ? CameraType::kPerspective
                    : t < 0.85 ? CameraType::kFisheye
                    : t < 0.95 ? CameraType::kSpherical
                               : CameraType::kOther;
    if (unit(rng) < 0.1) {
      m.sfm_heading.reset();
    } else {
      m.sfm_heading = Heading(m.recorded_heading.degrees() + (unit(rng) - 0.5) * 60.0);
    }
    if (unit(rng) < 0.1) {
      m.sfm_point.reset();
    } else {
      const double d = unit(rng) * 5.0 / 111000.0;
      m.sfm_point = GeoPoint(p.lat() + d, p.lon());
    }
    out.push_back(std::move(m));
  }
  return out;
}

struct OracleResult {
  std::array<std::size_t, 6> out{};
  std::vector<std::string> retained;
};

inline OracleResult oracle_filter(const std::vector<ImageMetadata>& metas, const FilterConfig& cfg) {
  OracleResult res;
  std::vector<const ImageMetadata*> survivors;
  for (const auto& m : metas) {
    std::array<bool, 5> pass{};
    pass[0] = oracle_inside(m.recorded_point.lon(), m.recorded_point.lat(), cfg.boundary);
    pass[1] = m.captured_at > cfg.recency_cutoff_ms;
    pass[2] = (m.camera_type == CameraType::kPerspective || m.camera_type == CameraType::kFisheye) &&
              cfg.camera_allowlist.count(m.camera_model) > 0;
    pass[3] = m.sfm_heading && oracle_angle(m.recorded_heading.degrees(),
                                            m.sfm_heading->degrees()) < cfg.max_angle_discrepancy_deg;
    pass[4] = m.sfm_point &&
              oracle_haversine(m.recorded_point.lat(), m.recorded_point.lon(), m.sfm_point->lat(),
                               m.sfm_point->lon()) < cfg.max_loc_discrepancy_m;
    std::size_t k = 0;
    while (k < 5 && pass[k]) ++res.out[k++];
    if (k == 5) survivors.push_back(&m);
  }
  std::sort(survivors.begin(), survivors.end(), [](auto* a, auto* b) {
    return std::tie(a->captured_at, a->id) < std::tie(b->captured_at, b->id);
  });
  std::map<std::string, std::vector<const ImageMetadata*>> kept;
  for (auto* m : survivors) {
    auto& k = kept[m->sequence_id];
    bool crowded = false;
    for (auto* q : k) {
      crowded |= oracle_haversine(m->recorded_point.lat(), m->recorded_point.lon(),
                                  q->recorded_point.lat(), q->recorded_point.lon()) <
                 cfg.sparsity_radius_m;
    }
    if (!crowded) k.push_back(m);
  }
  for (auto& [seq, k] : kept) {
    for (auto* m : k) res.retained.push_back(m->id);
  }
  std::sort(res.retained.begin(), res.retained.end());
  res.out[5] = res.retained.size();
  return res;
}

// Polygon fill.

// Closed point-in-polygon with exact orientation tests; exact whenever the
// coordinates are small multiples of 0.5.
inline double orient(Vec2 a, Vec2 b, Vec2 p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

inline bool on_ring(Vec2 p, const Ring& ring) {
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Vec2 a = ring[j], b = ring[i];
    if (orient(a, b, p) == 0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
        p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y)) {
      return true;
    }
  }
  return false;
}

inline int winding(Vec2 p, const Ring& ring) {
  int w = 0;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Vec2 a = ring[j], b = ring[i];
    if (a.y <= p.y) {
      if (b.y > p.y && orient(a, b, p) > 0) ++w;
    } else if (b.y <= p.y && orient(a, b, p) < 0) {
      --w;
    }
  }
  return w;
}

inline bool oracle_pip(Vec2 p, const Polygon& poly) {
  if (on_ring(p, poly.outer)) return true;
  for (const auto& h : poly.holes) {
    if (on_ring(p, h)) return true;
  }
  if (winding(p, poly.outer) == 0) return false;
  for (const auto& h : poly.holes) {
    if (winding(p, h) != 0) return false;
  }
  return true;
}

inline BinaryRaster oracle_fill(int n, const std::vector<Polygon>& polys) {
  BinaryRaster out(n, n, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (const auto& p : polys) {
        if (oracle_pip({c + 0.5, r + 0.5}, p)) {
          out.at(r, c) = 1;
          break;
        }
      }
    }
  }
  return out;
}

// Star-shaped ring with vertices on the half-pixel lattice.
inline Ring random_ring(std::mt19937_64& rng, Vec2 centre, double rmin, double rmax, int k) {
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), rad(rmin, rmax);
  std::vector<double> angles(static_cast<std::size_t>(k));
  for (auto& a : angles) a = ang(rng);
  std::sort(angles.begin(), angles.end());
  Ring ring;
  for (double a : angles) {
    const double r = rad(rng);
    ring.push_back({std::round(2 * (centre.x + r * std::cos(a))) / 2,
                    std::round(2 * (centre.y + r * std::sin(a))) / 2});
  }
  return ring;
}

struct Scene {
  int n;
  std::vector<mia::Polygon> polys;
};

// Up to four star polygons, some with a hole, on an n x n raster (n <= 64).
inline Scene random_scene(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(8, 64), count(1, 4), verts(3, 9);
  std::uniform_real_distribution<double> unit(0, 1);
  Scene s{size(rng), {}};
  const int n = s.n;
  for (int k = count(rng); k > 0; --k) {
    const Vec2 c{unit(rng) * n, unit(rng) * n};
    Polygon p{random_ring(rng, c, 1.0, n / 2.0, verts(rng)), {}};
    if (!ring_is_simple(p.outer) || std::abs(ring_signed_area(p.outer)) == 0) continue;
    if (unit(rng) < 0.3) {
      Ring hole = random_ring(rng, c, 0.5, n / 10.0, 4);
      bool inside = ring_is_simple(hole);
      for (const auto& v : hole) inside = inside && winding(v, p.outer) != 0 && !on_ring(v, p.outer);
      if (inside) p.holes.push_back(std::move(hole));
    }
    s.polys.push_back(std::move(p));
  }
  return s;
}

// Quarter turn about the ego pixel (e, e): out(r, c) = in(c, 2e - r), on
// the rows where the source exists.
inline bool equal_rot90(const BinaryRaster& turned, const BinaryRaster& in, int e) {
  const int n = in.rows();
  for (int r = 2 * e - n + 1; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (turned.at(r, c) != in.at(c, 2 * e - r)) return false;
    }
  }
  return true;
}

// Line of sight.

// Exact fraction with positive denominator.
struct Frac {
  long long num;
  long long den;
};

inline Frac frac(long long n, long long d) { return d < 0 ? Frac{-n, -d} : Frac{n, d}; }
inline bool lt(Frac a, Frac b) { return a.num * b.den < b.num * a.den; }
inline bool eq(Frac a, Frac b) { return a.num * b.den == b.num * a.den; }

struct Touch {
  Cell cell;
  Frac t_in;
  bool corner_only;
};

// Cells the ideal segment between two cell centres touches, ordered by the
// parameter where the segment enters them. A cell touched only at a grid
// corner sorts before the cell entered diagonally through that corner; of
// the two corner-touched cells, the one offset along the major axis first.
inline std::vector<Cell> oracle_ray(Cell from, Cell to) {
  // Doubled coordinates keep centres integral.
  const long long ax = 2LL * from.col + 1, ay = 2LL * from.row + 1;
  const long long dx = 2LL * (to.col - from.col), dy = 2LL * (to.row - from.row);
  const bool x_major = std::llabs(dx) >= std::llabs(dy);
  std::vector<Touch> touches;
  const int c0 = std::min(from.col, to.col), c1 = std::max(from.col, to.col);
  const int r0 = std::min(from.row, to.row), r1 = std::max(from.row, to.row);
  for (int c = c0; c <= c1; ++c) {
    for (int r = r0; r <= r1; ++r) {
      Frac lo{0, 1}, hi{1, 1};
      bool ok = true;
      auto slab = [&](long long a, long long d, long long cell) {
        const long long e0 = 2 * cell - a, e1 = 2 * cell + 2 - a;
        if (d == 0) {
          ok = ok && e0 <= 0 && e1 >= 0;
          return;
        }
        Frac t0 = frac(e0, d), t1 = frac(e1, d);
        if (lt(t1, t0)) std::swap(t0, t1);
        if (lt(lo, t0)) lo = t0;
        if (lt(t1, hi)) hi = t1;
      };
      slab(ax, dx, c);
      slab(ay, dy, r);
      if (!ok || lt(hi, lo)) continue;
      touches.push_back({{r, c}, lo, eq(lo, hi)});
    }
  }
  std::stable_sort(touches.begin(), touches.end(), [&](const Touch& a, const Touch& b) {
    if (!eq(a.t_in, b.t_in)) return lt(a.t_in, b.t_in);
    if (a.corner_only != b.corner_only) return a.corner_only;
    if (!a.corner_only) return false;
    // Both corner-only at the same point: the one whose major coordinate
    // already moved comes first.
    const int sx = dx > 0 ? 1 : -1, sy = dy > 0 ? 1 : -1;
    const int ka = x_major ? a.cell.col * sx : a.cell.row * sy;
    const int kb = x_major ? b.cell.col * sx : b.cell.row * sy;
    return ka > kb;
  });
  std::vector<Cell> out;
  for (const auto& t : touches) out.push_back(t.cell);
  return out;
}

inline BinaryRaster oracle_visible(const BinaryRaster& b, int er, int ec, int p) {
  BinaryRaster out(b.rows(), b.cols(), 0);
  for (int r = 0; r < b.rows(); ++r) {
    for (int c = 0; c < b.cols(); ++c) {
      const auto ray = oracle_ray({er, ec}, {r, c});
      const std::size_t target = ray.size() - 1;
      std::size_t first = target;
      for (std::size_t i = 0; i < target; ++i) {
        if (b.at(ray[i].row, ray[i].col)) {
          first = i;
          break;
        }
      }
      // The ray ends p cells past the first building cell it meets.
      out.at(r, c) = first == target || target - first <= static_cast<std::size_t>(p);
    }
  }
  return out;
}

inline BinaryRaster random_layout(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> pos(0, n - 1), len(1, 8), kind(0, 2);
  BinaryRaster b(n, n, 0);
  const int blocks = 1 + pos(rng) % 6;
  for (int k = 0; k < blocks; ++k) {
    const int r = pos(rng), c = pos(rng);
    switch (kind(rng)) {
      case 0: {  // rectangle
        const int h = len(rng), w = len(rng);
        for (int i = r; i < std::min(n, r + h); ++i)
          for (int j = c; j < std::min(n, c + w); ++j) b.at(i, j) = 1;
        break;
      }
      case 1: {  // 1-px wall
        const int l = 2 * len(rng);
        const bool horiz = pos(rng) % 2;
        for (int i = 0; i < l; ++i) {
          const int rr = horiz ? r : r + i, cc = horiz ? c + i : c;
          if (b.contains(rr, cc)) b.at(rr, cc) = 1;
        }
        break;
      }
      default:  // speckle
        for (int i = 0; i < 10; ++i) b.at(pos(rng), pos(rng)) = 1;
    }
  }
  return b;
}

inline bool subset(const BinaryRaster& a, const BinaryRaster& b) {
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    if (a.data()[i] && !b.data()[i]) return false;
  }
  return true;
}

// Coverage and splits.

inline double disk_km2(double r) { return std::numbers::pi * r * r / 1e6; }

// Union of two equal disks at distance d.
inline double two_disk_union_km2(double r, double d) {
  if (d >= 2 * r) return 2 * disk_km2(r);
  const double lens = 2 * r * r * std::acos(d / (2 * r)) - (d / 2) * std::sqrt(4 * r * r - d * d);
  return (2 * std::numbers::pi * r * r - lens) / 1e6;
}

// Skewed synthetic city: a dense core, suburbs and sparse outliers.
inline std::vector<UtmPoint> synthetic_city(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> core(0.0, 1200.0);
  std::uniform_real_distribution<double> spread(-6000.0, 6000.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<UtmPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u(rng) < 0.7 ? core(rng) : spread(rng);
    const double y = u(rng) < 0.7 ? core(rng) : spread(rng);
    out.push_back({500000.0 + x, 4400000.0 + y, 17, Hemisphere::kNorth});
  }
  return out;
}

}  // namespace oracle
