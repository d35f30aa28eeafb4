#!/usr/bin/env python3
"""Writes the mini-city fixture: a small street grid near Pittsburgh with
Mapillary-style image records, a few FPV PNGs and one OSM extract.

Usage: make_mini_city.py [OUT_DIR]   (default: mini-city next to this file)
"""

import json
import math
import struct
import sys
import zlib
from pathlib import Path

LAT0, LON0 = 40.4400, -79.9950
M_PER_DEG_LAT = 111_050.0
M_PER_DEG_LON = M_PER_DEG_LAT * math.cos(math.radians(LAT0))

# Curation region, about 1.7 km x 0.45 km.
REGION = [(-80.0050, 40.4380), (-79.9850, 40.4380), (-79.9850, 40.4420), (-80.0050, 40.4420)]
# OSM extract: region plus a margin wider than any rotated BEV window.
BOUNDS = dict(minlat=40.4340, minlon=-80.0100, maxlat=40.4460, maxlon=-79.9800)

STREET_LATS = [40.4370, 40.4390, 40.4410, 40.4430]
AVENUE_LONS = [-80.0090 + 0.0024 * i for i in range(13)]
BASE_TIME = 1_600_000_000_000


def offset(lat, lon, east_m, north_m):
    return lat + north_m / M_PER_DEG_LAT, lon + east_m / M_PER_DEG_LON


def png(width, height, pixel):
    rows = b"".join(
        b"\x00" + bytes(v for x in range(width) for v in pixel(x, y)) for y in range(height)
    )

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) +
            chunk(b"IDAT", zlib.compress(rows, 9)) + chunk(b"IEND", b""))


class Osm:
    def __init__(self):
        self.nodes = {}
        self.ways = []
        self.next_id = 1

    def node(self, lat, lon, tags=None):
        key = (round(lat, 7), round(lon, 7))
        if key in self.nodes and not tags:
            return self.nodes[key][0]
        nid = self.next_id
        self.next_id += 1
        self.nodes[key if not tags else (key, nid)] = (nid, key[0], key[1], tags or {})
        return nid

    def way(self, points, tags, closed=False):
        refs = [self.node(lat, lon) for lat, lon in points]
        if closed:
            refs.append(refs[0])
        self.ways.append((self.next_id, refs, tags))
        self.next_id += 1

    def rect(self, lat, lon, w_m, h_m, tags):
        s, w = lat, lon
        n, e = offset(lat, lon, w_m, h_m)
        self.way([(s, w), (s, e), (n, e), (n, w)], tags, closed=True)

    def xml(self):
        out = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="make_mini_city">']
        out.append('  <bounds minlat="{minlat}" minlon="{minlon}" maxlat="{maxlat}" maxlon="{maxlon}"/>'
                   .format(**BOUNDS))
        for nid, lat, lon, tags in sorted(self.nodes.values()):
            if tags:
                out.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}">')
                out += [f'    <tag k="{k}" v="{v}"/>' for k, v in sorted(tags.items())]
                out.append("  </node>")
            else:
                out.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
        for wid, refs, tags in self.ways:
            out.append(f'  <way id="{wid}">')
            out += [f'    <nd ref="{r}"/>' for r in refs]
            out += [f'    <tag k="{k}" v="{v}"/>' for k, v in sorted(tags.items())]
            out.append("  </way>")
        out.append("</osm>")
        return "\n".join(out) + "\n"


def build_osm():
    osm = Osm()
    west, east = BOUNDS["minlon"] + 0.0005, BOUNDS["maxlon"] - 0.0005
    south, north = BOUNDS["minlat"] + 0.0005, BOUNDS["maxlat"] - 0.0005

    # Crossing nodes on the main street sit on its centerline, so they are
    # created before the street way and shared with it.
    main = STREET_LATS[1]
    crossing_lons = AVENUE_LONS[3:10:2]
    crossings = {round(lon - 0.0002, 7): osm.node(main, lon - 0.0002, {"highway": "crossing"})
                 for lon in crossing_lons}
    main_lons = sorted([west, east] + AVENUE_LONS + list(crossings))
    main_refs = [crossings.get(round(lon, 7)) or osm.node(main, lon) for lon in main_lons]
    osm.ways.append((osm.next_id, main_refs, {"highway": "primary", "lanes": "3", "sidewalk": "both",
                                              "name": "Main Street"}))
    osm.next_id += 1

    for lat in (STREET_LATS[0], STREET_LATS[2], STREET_LATS[3]):
        osm.way([(lat, west)] + [(lat, lon) for lon in AVENUE_LONS] + [(lat, east)],
                {"highway": "residential", "sidewalk": "both"})
    for i, lon in enumerate(AVENUE_LONS):
        tags = {"highway": "residential" if i % 3 else "tertiary"}
        if i % 2 == 0:
            tags["sidewalk"] = "both"
        osm.way([(south, lon)] + [(lat, lon) for lat in STREET_LATS] + [(north, lon)], tags)

    # Zebra crossing drawn as a footway across an avenue.
    a = AVENUE_LONS[6]
    osm.way([offset(STREET_LATS[2], a, -8, -12), offset(STREET_LATS[2], a, 8, -12)],
            {"highway": "footway", "footway": "crossing"})

    # Buildings fill block interiors, with a park and a car park between them.
    for bi, (lat_s, lat_n) in enumerate(zip(STREET_LATS, STREET_LATS[1:])):
        for ai, (lon_w, lon_e) in enumerate(zip(AVENUE_LONS, AVENUE_LONS[1:])):
            s, w = offset(lat_s, lon_w, 14, 14)
            block_w = (lon_e - lon_w) * M_PER_DEG_LON - 28
            block_h = (lat_n - lat_s) * M_PER_DEG_LAT - 28
            kind = (bi * 5 + ai) % 7
            if kind == 3:
                osm.rect(s, w, block_w, block_h, {"leisure": "park"})
            elif kind == 5:
                osm.rect(s, w, block_w, block_h, {"amenity": "parking", "parking": "surface"})
            else:
                n_b = 4
                bw = (block_w - (n_b - 1) * 6) / n_b
                for k in range(n_b):
                    bs, bwest = offset(s, w, k * (bw + 6), 0)
                    osm.rect(bs, bwest, bw, block_h * (0.45 if k % 2 else 0.8),
                             {"building": "yes" if k % 3 else "residential"})
                gs, gw = offset(s, w, 0, block_h * 0.85)
                osm.rect(gs, gw, block_w, block_h * 0.15, {"landuse": "grass"})
    return osm


def record(img_id, seq, lat, lon, heading, t, model="iPhone 11 Pro", camera="perspective",
           params=(0.8, 0.0, 0.0), sfm_shift_m=0.4, sfm_turn=1.5):
    slat, slon = offset(lat, lon, sfm_shift_m, 0.0)
    return {
        "id": img_id,
        "sequence": seq,
        "geometry": {"type": "Point", "coordinates": [round(lon, 8), round(lat, 8)]},
        "computed_geometry": {"type": "Point", "coordinates": [round(slon, 8), round(slat, 8)]},
        "compass_angle": heading,
        "computed_compass_angle": (heading + sfm_turn) % 360.0,
        "captured_at": t,
        "camera_type": camera,
        "camera_parameters": list(params),
        "make": "",
        "model": model,
        "width": 64,
        "height": 48,
    }


def build_images():
    recs = []
    t = BASE_TIME
    # Eastbound along Main Street, on the north carriageway edge.
    lon = -80.0045
    k = 0
    while lon < -79.9856:
        lat, _ = offset(STREET_LATS[1], lon, 0, 2.5)
        recs.append(record(f"10{k:02d}", "seq-main", lat, lon, 90.0, t))
        lon += 0.0009
        t += 4000
        k += 1
    # Northbound fisheye sequence up one avenue.
    a = AVENUE_LONS[4]
    for k, lat in enumerate([40.4383, 40.4389, 40.4395, 40.4401, 40.4407, 40.4413]):
        recs.append(record(f"20{k:02d}", "seq-fish", lat, a, 0.0, t, model="GoPro Max",
                           camera="fisheye", params=(0.55, -0.03, 0.002), sfm_turn=-2.0))
        t += 4000
    # Westbound along the third street, one image per block.
    for k, lon in enumerate([-79.9870, -79.9930, -79.9990, -80.0040]):
        lat, _ = offset(STREET_LATS[2], lon, 0, -2.0)
        recs.append(record(f"30{k:02d}", "seq-west", lat, lon, 270.0, t, model="SM-G970U"))
        t += 4000

    # Seeded violations, one per stage.
    bad = [
        record("9001", "seq-bad", 40.4435, -79.9950, 90.0, t),                             # outside
        record("9002", "seq-bad", 40.4399, -79.9931, 180.0, 1_450_000_000_000),              # pre-2017
        record("9003", "seq-bad", 40.4399, -79.9911, 180.0, t, model="Canon EOS 5D"),        # camera model
        record("9004", "seq-bad", 40.4399, -79.9891, 180.0, t, camera="spherical"),          # camera type
        record("9005", "seq-bad", 40.4399, -79.9871, 180.0, t, sfm_turn=35.0),               # angle
        record("9006", "seq-bad", 40.4399, -79.9991, 180.0, t, sfm_shift_m=9.0),             # location
    ]
    # Two metres behind the first Main Street image, captured later.
    first = recs[0]
    blat, blon = offset(first["geometry"]["coordinates"][1], first["geometry"]["coordinates"][0], -2.0, 0.0)
    bad.append(record("9007", "seq-main", blat, blon, 90.0, t + 60_000))
    return recs + bad


def fpv_pixels(seed, fisheye):
    def pixel(x, y):
        r = (x * 4 + seed * 17) % 256
        g = (y * 5 + seed * 29) % 256
        b = 200 if fisheye and (x // 8 + y // 8) % 2 else 60
        return (r, g, b)
    return pixel


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent / "mini-city"
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "osm").mkdir(parents=True, exist_ok=True)

    (out / "regions.json").write_text(json.dumps(
        {"regions": {"mini-city": [[lon, lat] for lon, lat in REGION]}}, indent=2) + "\n")
    (out / "osm" / "mini-city.osm").write_text(build_osm().xml())

    for i, rec in enumerate(build_images()):
        (out / "images" / f"{rec['id']}.json").write_text(json.dumps(rec, indent=2) + "\n")
        if i % 3 == 0 or rec["camera_type"] == "fisheye":
            data = png(64, 48, fpv_pixels(i, rec["camera_type"] == "fisheye"))
            (out / "images" / f"{rec['id']}.png").write_bytes(data)


if __name__ == "__main__":
    main()
