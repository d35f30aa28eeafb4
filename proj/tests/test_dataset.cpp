#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <doctest.h>

#include "oracles.hpp"
#include <nlohmann/json.hpp>

#include "mia/dataset.hpp"
#include "mia/errors.hpp"

using namespace mia;
using namespace oracle;

namespace {

ManifestRecord sample_record(const std::string& id, Split split = Split::kTrain) {
  ManifestRecord r;
  r.id = id;
  r.sequence_id = "seq-" + id.substr(0, 1);
  r.lat = 40.4406123456789;
  r.lon = -79.9959876543211;
  r.utm = {584123.456789, 4477123.987654, 17, Hemisphere::kNorth};
  r.heading_deg = 271.25;
  r.captured_at = 1600000000123;
  r.camera_model = "iphone11pro";
  r.camera_type = "perspective";
  r.focal = 0.8333333333333334;
  r.split = split;
  r.fpv_path = "pittsburgh/fpv/" + id + ".jpg";
  r.bev_path = "pittsburgh/bev/" + id + "_bev.png";
  r.mask_path = "pittsburgh/mask/" + id + "_vis.png";
  return r;
}

UtmPoint at(double e, double n) { return {e, n, 17, Hemisphere::kNorth}; }

}  // namespace

TEST_CASE("split names") {
  CHECK(to_string(Split::kVal) == "val");
  CHECK(split_from_string("test") == Split::kTest);
  CHECK_THROWS_AS(split_from_string("training"), ValidationError);
}

TEST_CASE("manifest round trip is bit-identical") {
  DatasetManifest m;
  m.records = {sample_record("b2", Split::kVal), sample_record("a1"), sample_record("c3", Split::kTest)};
  const std::string text = format_manifest(m);
  CHECK(text.rfind("{\"mia_manifest\":1}\n", 0) == 0);
  const auto back = parse_manifest(text);
  REQUIRE(back.records.size() == 3);
  CHECK(back.records[0].id == "a1");
  CHECK(back.records[2].id == "c3");
  CHECK(back.records[1] == sample_record("b2", Split::kVal));
  CHECK(format_manifest(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "mia_test_manifest.jsonl";
  write_manifest(path, back);
  CHECK(read_manifest(path) == back);
  std::filesystem::remove(path);

  // Stable field order.
  const auto first = text.substr(text.find('\n') + 1, 20);
  CHECK(first == "{\"id\":\"a1\",\"sequence");
}

TEST_CASE("empty manifest round trip") {
  const std::string text = format_manifest({});
  CHECK(text == "{\"mia_manifest\":1}\n");
  CHECK(parse_manifest(text).records.empty());
}

TEST_CASE("manifest errors") {
  DatasetManifest m;
  m.records = {sample_record("a1"), sample_record("a1")};
  CHECK_THROWS_AS(format_manifest(m), ValidationError);

  const std::string line = record_to_json(sample_record("a1")).dump();
  CHECK_THROWS_AS(parse_manifest("{\"mia_manifest\":1}\n" + line + "\n" + line + "\n"), ValidationError);
  CHECK_THROWS_AS(parse_manifest("{\"mia_manifest\":2}\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest(line + "\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest(""), ParseError);
  CHECK_THROWS_AS(parse_manifest("{\"mia_manifest\":1}\n{oops\n"), ParseError);

  auto bad = record_to_json(sample_record("a1"));
  bad["split"] = "holdout";
  CHECK_THROWS_AS(record_from_json(bad), ParseError);
  bad.erase("split");
  try {
    record_from_json(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("split") != std::string::npos);
  }

  DatasetManifest abs;
  abs.records = {sample_record("a1")};
  abs.records[0].bev_path = "/data/a1_bev.png";
  CHECK_THROWS_AS(format_manifest(abs), ValidationError);
}

TEST_CASE("cell ids") {
  CHECK(cell_of(at(499.9, 1000.0), 500.0).ix == 0);
  CHECK(cell_of(at(500.0, 1000.0), 500.0).ix == 1);
  CHECK(cell_of(at(500.0, 1000.0), 500.0).iy == 2);
  CHECK(cell_of(at(-0.1, 0.0), 500.0).ix == -1);
}

TEST_CASE("split needs at least three cells") {
  std::vector<UtmPoint> one{at(100, 100), at(200, 200), at(300, 300)};
  CHECK_THROWS_AS(split_geographic(one), ValidationError);
  std::vector<UtmPoint> two{at(100, 100), at(600, 100)};
  CHECK_THROWS_AS(split_geographic(two), ValidationError);
  SplitOptions bad;
  bad.ratios = {0.5, 0.3, 0.1};
  std::vector<UtmPoint> three{at(100, 100), at(600, 100), at(1100, 100)};
  CHECK_THROWS_AS(split_geographic(three, bad), ValidationError);
  CHECK_NOTHROW(split_geographic(three));
}

TEST_CASE("100 equal cells split exactly 80/10/10") {
  std::vector<UtmPoint> poses;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 5; ++k) poses.push_back(at(500.0 * i + 50 + 60 * k, 500.0 * j + 250));
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    SplitOptions o;
    o.seed = seed;
    const auto s = split_geographic(poses, o);
    std::array<int, 3> cells{};
    for (const auto& [id, sp] : s.cells) ++cells[static_cast<int>(sp)];
    CHECK(cells == std::array<int, 3>{80, 10, 10});
    CHECK(s.images == std::array<std::size_t, 3>{400, 50, 50});
  }
}

TEST_CASE("synthetic city: ratios and disjointness") {
  const auto poses = synthetic_city(10000, 7);
  SplitOptions o;
  o.seed = 42;
  const auto s = split_geographic(poses, o);
  REQUIRE(s.cells.size() >= 50);

  // Audit: every pose resolves to exactly one split, and counts agree.
  std::array<std::size_t, 3> counted{};
  std::map<CellId, std::set<Split>> seen;
  for (const auto& p : poses) {
    const Split sp = s.split_of(p);
    ++counted[static_cast<int>(sp)];
    seen[cell_of(p, o.cell_m)].insert(sp);
  }
  for (const auto& [cell, splits] : seen) CHECK(splits.size() == 1);
  CHECK(counted == s.images);
  const std::array<double, 3> target{0.8, 0.1, 0.1};
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(static_cast<double>(counted[k]) / 1e4 - target[k]) <= 0.02);
  }

  // Seeded determinism.
  CHECK(split_geographic(poses, o).cells == s.cells);
}

TEST_CASE("greedy rule holds cell by cell when sizes are distinct") {
  // Cell k holds k + 1 poses, so the visiting order is forced.
  std::vector<UtmPoint> poses;
  for (int k = 0; k < 60; ++k)
    for (int n = 0; n <= k; ++n) poses.push_back(at(500.0 * k + 100 + n, 250));
  const auto s = split_geographic(poses);
  std::array<double, 3> filled{};
  const double total = static_cast<double>(poses.size());
  const std::array<double, 3> ratio{0.8, 0.1, 0.1};
  for (int k = 59; k >= 0; --k) {
    int best = 0;
    for (int sp = 1; sp < 3; ++sp) {
      if (ratio[sp] * total - filled[sp] > ratio[best] * total - filled[best]) best = sp;
    }
    const Split got = s.split_of(at(500.0 * k + 100, 250));
    CHECK(static_cast<int>(got) == best);
    filled[best] += k + 1;
  }
}

TEST_CASE("coverage of one pose is a disk") {
  const std::vector<UtmPoint> one{at(500000.3, 4400000.7)};
  CHECK(coverage_km2(one) == doctest::Approx(disk_km2(112)).epsilon(0.005));
  CHECK(coverage_km2(one, 50.0) == doctest::Approx(disk_km2(50)).epsilon(0.005));
  CHECK(coverage_km2(std::span<const UtmPoint>{}) == 0.0);
  CHECK_THROWS_AS(coverage_km2(one, 0.0), ValidationError);
}

TEST_CASE("coverage of two poses matches the lens formula") {
  for (double d : {0.0, 30.0, 100.0, 150.0, 223.0, 300.0}) {
    CAPTURE(d);
    const std::vector<UtmPoint> two{at(500000.0, 4400000.0), at(500000.0 + d * 0.6, 4400000.0 + d * 0.8)};
    CHECK(coverage_km2(two) == doctest::Approx(two_disk_union_km2(112, d)).epsilon(0.005));
  }
  // Different zones add up.
  const std::vector<UtmPoint> zones{at(500000.0, 4400000.0), {500000.0, 4400000.0, 18, Hemisphere::kNorth}};
  CHECK(coverage_km2(zones) == doctest::Approx(2 * disk_km2(112)).epsilon(0.005));
}

TEST_CASE("coverage is monotone under added poses") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1500.0);
  std::vector<UtmPoint> poses;
  double prev = 0.0;
  for (int i = 0; i < 40; ++i) {
    poses.push_back(at(500000.0 + u(rng), 4400000.0 + u(rng)));
    const double c = coverage_km2(poses);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("stats") {
  DatasetManifest m;
  m.records = {sample_record("a1"), sample_record("a2", Split::kVal), sample_record("b1", Split::kTest)};
  m.records[1].camera_model = "";
  m.records[2].camera_type = "fisheye";
  m.records[2].utm.easting += 1000.0;
  const auto s = compute_stats(m);
  CHECK(s.images == 3);
  CHECK(s.sequences == 2);
  CHECK(s.per_split == std::array<std::size_t, 3>{1, 1, 1});
  CHECK(s.per_camera_model.at("(unknown)") == 1);
  CHECK(s.per_camera_model.at("iphone11pro") == 2);
  CHECK(s.per_camera_type.at("fisheye") == 1);
  CHECK(s.coverage_km2 == doctest::Approx(2 * disk_km2(112)).epsilon(0.005));
  const auto j = s.to_json();
  CHECK(j["splits"]["val"] == 1);
  CHECK(j["images"] == 3);
  CHECK_FALSE(j.contains("filter_report"));
  CHECK(s.to_text().find("train 1 / val 1 / test 1") != std::string::npos);
}

TEST_CASE("filter report JSON round trip") {
  const std::vector<std::size_t> outs{90, 50, 10};
  const auto r = make_filter_report(100, outs);
  CHECK(filter_report_from_json(filter_report_to_json(r)) == r);
  CHECK_THROWS_AS(filter_report_from_json(nlohmann::json{{"stages", {{{"name", 1}}}}}), ParseError);
}
