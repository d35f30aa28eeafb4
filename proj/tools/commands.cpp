#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mia/bev.hpp"
#include "mia/curate.hpp"
#include "mia/dataset.hpp"
#include "mia/errors.hpp"
#include "mia/eval.hpp"
#include "mia/raster.hpp"
#include "mia/visibility.hpp"

namespace mia::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Settings shared by every subcommand.
const std::vector<std::string> kGlobalKeys = {"workers", "fixtures", "api_base", "osm_base"};

struct Settings {
  std::map<std::string, std::string> values;
  std::string config_path;
};

void add_setting_options(CLI::App& app, Settings& s, bool globals) {
  for (const auto& f : config_fields()) {
    const bool is_global = std::find(kGlobalKeys.begin(), kGlobalKeys.end(), f.key) != kGlobalKeys.end();
    if (is_global != globals) continue;
    app.add_option_function<std::string>(
        flag_for(f.key), [&s, key = f.key](const std::string& v) { s.values[key] = v; },
        fmt::format("overrides {} and the config file key '{}'", env_var_for(f.key), f.key));
  }
}

CurationConfig resolve(const Settings& s, const EnvLookup& env) {
  const json file = s.config_path.empty() ? json() : load_config_file(s.config_path);
  return resolve_config(s.values, env, file);
}

constexpr std::string_view kBevSuffix = "_bev.png";
constexpr std::string_view kMaskSuffix = "_vis.png";

// Ids of the `<id>_bev.png` files in dir.
std::vector<std::string> bev_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("directory " + dir.string() + " not found");
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > kBevSuffix.size() && name.ends_with(kBevSuffix)) {
      ids.push_back(name.substr(0, name.size() - kBevSuffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// A manifest on disk that breaks its invariants is bad data, not bad usage.
DatasetManifest load_manifest(const fs::path& path) {
  try {
    return read_manifest(path);
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

SemanticBev read_bev(const fs::path& path, double rho) {
  return unpack_bev(gray_grid(read_png(path)), rho);
}

// Packed `<id>_bev.png`, or one probability plane per class as
// `<id>_p<k>.png` (gray value / 255).
SemanticBev read_prediction(const fs::path& dir, const std::string& id, double rho) {
  const fs::path packed = dir / (id + std::string(kBevSuffix));
  if (fs::exists(packed)) return read_bev(packed, rho);
  SemanticBev bev;
  bev.rho = rho;
  for (int k = 0; k < kNumClasses; ++k) {
    const fs::path p = dir / fmt::format("{}_p{}.png", id, k);
    if (!fs::exists(p)) throw IoError("no prediction for " + id + " in " + dir.string());
    const Grid<std::uint8_t> g = gray_grid(read_png(p));
    Grid<float> prob(g.rows(), g.cols(), 0.0f);
    for (std::size_t i = 0; i < g.data().size(); ++i) prob.data()[i] = g.data()[i] / 255.0f;
    bev.planes[k] = binarize(prob);
  }
  bev.ego_row = bev.ego_col = bev.size() / 2;
  return bev;
}

struct EvalArgs {
  std::string pred, gt, mask = "raycast", mask_dir, mapping = "identity", out, table, method = "MIA";
  double rho = 0.5;
  double hfov_deg = 90.0;
  int penetration = kDefaultPenetrationPx;
  bool mean_of_images = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ClassMapping mapping = ClassMapping::load(a.mapping);
  if (a.mask != "raycast" && a.mask != "frustum" && a.mask != "file") {
    throw ValidationError("--mask must be raycast, frustum or file");
  }
  const fs::path mask_dir = a.mask_dir.empty() ? fs::path(a.gt).parent_path() / "mask" : fs::path(a.mask_dir);
  const auto ids = bev_ids(a.gt);
  if (ids.empty()) throw IoError("no ground-truth rasters in " + a.gt);

  std::vector<IouReport> reports;
  for (const auto& id : ids) {
    const SemanticBev gt = read_bev(fs::path(a.gt) / (id + std::string(kBevSuffix)), a.rho);
    const SemanticBev pred = read_prediction(a.pred, id, a.rho);
    VisibilityMask mask;
    if (a.mask == "file") {
      mask = mask_from_gray(gray_grid(read_png(mask_dir / (id + std::string(kMaskSuffix)))));
    } else {
      mask = frustum_mask(a.hfov_deg / 2.0 * std::numbers::pi / 180.0, gt.size());
      if (a.mask == "raycast") mask = combined_mask(mask, raycast_mask(gt, a.penetration));
    }
    IouReport r = masked_iou(remap_classes(labeled(pred), mapping), remap_classes(labeled(gt), mapping), mask);
    reports.push_back(std::move(r));
  }
  IouReport total = aggregate_split(
      reports, a.mean_of_images ? AggregateMode::kMeanOfImages : AggregateMode::kPooledCounts);
  total.road_name = mapping.target_of("Road").value_or("Road");
  total.sidewalk_name = mapping.target_of("Sidewalk").value_or("Sidewalk");

  const std::string table = total.to_table(a.method);
  write_file_atomic(a.out, total.to_json().dump(2) + "\n");
  if (!a.table.empty()) write_file_atomic(a.table, table);
  out << table;
  return kExitOk;
}

struct RenderArgs {
  double lat = 0, lon = 0, heading = 0, hfov_deg = 90.0;
  std::string osm, rules, out_bev, out_mask;
  BevConfig bev;
  int penetration = kDefaultPenetrationPx;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const RuleTable rules = a.rules.empty() ? RuleTable::defaults() : RuleTable::load(a.rules);
  const OsmGraph graph = parse_osm_file(a.osm);
  const GeoPoint pose(a.lat, a.lon);
  const UtmFrame frame = UtmFrame::for_point(pose);
  const SemanticBev bev = render_bev(graph, rules, frame, frame.project(pose), Heading(a.heading), a.bev);
  write_file_atomic(a.out_bev, encode_png(gray_image(pack_bev(bev))));
  if (!a.out_mask.empty()) {
    const VisibilityMask m = combined_mask(
        frustum_mask(a.hfov_deg / 2.0 * std::numbers::pi / 180.0, a.bev.alpha_px), raycast_mask(bev, a.penetration));
    write_file_atomic(a.out_mask, encode_png(gray_image(mask_to_gray(m))));
  }
  for (int k = 0; k < kNumClasses; ++k) {
    out << fmt::format("{:<9} {}\n", kClassNames[k], count_set(bev.planes[k]));
  }
  return kExitOk;
}

struct SplitArgs {
  std::string manifest, out;
  std::uint64_t seed = 0;
  double cell_m = 500.0;
  std::vector<double> ratios = {0.8, 0.1, 0.1};
};

int cmd_split(const SplitArgs& a, std::ostream& out) {
  if (a.ratios.size() != kNumSplits) throw ValidationError("--ratios needs three values");
  DatasetManifest m = load_manifest(a.manifest);
  std::vector<UtmPoint> poses;
  for (const auto& r : m.records) poses.push_back(r.utm);
  SplitOptions opts;
  std::copy(a.ratios.begin(), a.ratios.end(), opts.ratios.begin());
  opts.cell_m = a.cell_m;
  opts.seed = a.seed;
  const SplitAssignment s = split_geographic(poses, opts);
  for (auto& r : m.records) r.split = s.split_of(r.utm);
  write_manifest(a.out.empty() ? a.manifest : a.out, m);
  out << fmt::format("cells {}  train {}  val {}  test {}\n", s.cells.size(), s.images[0], s.images[1],
                     s.images[2]);
  return kExitOk;
}

struct StatsArgs {
  std::string manifest, out;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const DatasetManifest m = load_manifest(a.manifest);
  DatasetStats s = compute_stats(m);
  const fs::path report = fs::path(a.manifest).parent_path() / "filter_report.json";
  if (fs::exists(report)) {
    const json doc = json::parse(read_file_text(report), nullptr, false);
    if (doc.is_discarded()) throw ParseError(report.string() + " is not valid JSON");
    s.filter_report = filter_report_from_json(doc);
  }
  if (!a.out.empty()) write_file_atomic(a.out, s.to_json().dump(2) + "\n");
  out << s.to_text();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, const EnvLookup& env, std::ostream& out, std::ostream& err) {
  CLI::App app{"Map-to-BEV dataset curation and evaluation", "mia"};
  app.require_subcommand(1);
  app.fallthrough();

  Settings settings;
  app.add_option("--config", settings.config_path, "JSON config file");
  add_setting_options(app, settings, /*globals=*/true);

  auto* curate = app.add_subcommand("curate", "Build BEV/mask/manifest tuples for a region");
  add_setting_options(*curate, settings, /*globals=*/false);

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "Render one BEV from an OSM file");
  render->add_option("--lat", render_args.lat)->required();
  render->add_option("--lon", render_args.lon)->required();
  render->add_option("--heading", render_args.heading, "degrees clockwise from north")->required();
  render->add_option("--osm", render_args.osm, "OSM XML file")->required()->check(CLI::ExistingFile);
  render->add_option("--rules", render_args.rules, "tag rule table (JSON)");
  render->add_option("--out", render_args.out_bev, "packed BEV PNG")->required();
  render->add_option("--mask-out", render_args.out_mask, "visibility mask PNG");
  render->add_option("--hfov-deg", render_args.hfov_deg)->check(CLI::Range(1.0, 179.0));
  render->add_option("--alpha-px", render_args.bev.alpha_px)->check(CLI::PositiveNumber);
  render->add_option("--delta-px", render_args.bev.delta_px)->check(CLI::NonNegativeNumber);
  render->add_option("--rho", render_args.bev.rho)->check(CLI::PositiveNumber);
  render->add_option("--penetration-px", render_args.penetration)->check(CLI::NonNegativeNumber);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Masked IoU of predictions against ground truth");
  eval->add_option("--pred", eval_args.pred, "prediction directory")->required();
  eval->add_option("--gt", eval_args.gt, "ground-truth BEV directory")->required();
  eval->add_option("--mask", eval_args.mask, "raycast | frustum | file");
  eval->add_option("--mask-dir", eval_args.mask_dir, "masks for --mask file");
  eval->add_option("--mapping", eval_args.mapping, "identity | nuscenes | kitti360 | JSON file");
  eval->add_option("--out", eval_args.out, "report.json path")->required();
  eval->add_option("--table", eval_args.table, "also write the text table here");
  eval->add_option("--method", eval_args.method, "row label in the table");
  eval->add_option("--rho", eval_args.rho, "meters per pixel of the rasters");
  eval->add_option("--hfov-deg", eval_args.hfov_deg)->check(CLI::Range(1.0, 179.0));
  eval->add_option("--penetration-px", eval_args.penetration)->check(CLI::NonNegativeNumber);
  eval->add_flag("--mean-of-images", eval_args.mean_of_images, "average per-image IoUs instead");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Reassign geographic splits in a manifest");
  split->add_option("--manifest", split_args.manifest)->required();
  split->add_option("--out", split_args.out, "defaults to rewriting --manifest");
  split->add_option("--seed", split_args.seed);
  split->add_option("--cell-m", split_args.cell_m)->check(CLI::PositiveNumber);
  split->add_option("--ratios", split_args.ratios)->delimiter(',')->expected(3);

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Coverage, yields and camera histogram of a manifest");
  stats->add_option("--manifest", stats_args.manifest)->required();
  stats->add_option("--out", stats_args.out, "stats JSON path");

  std::vector<const char*> argv;
  argv.push_back("mia");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (curate->parsed()) {
      CurationConfig cfg = resolve(settings, env);
      cfg.validate();
      resolve_boundary(cfg);
      CurateServices services = make_services(cfg, env);
      const CurateSummary summary = run_curate(cfg, services);
      out << summary.filter_report.to_table();
      out << fmt::format("rendered {}  already complete {}  failed {}  manifest {}\n", summary.rendered,
                         summary.skipped_existing, summary.render_failures,
                         (summary.dataset_dir / "manifest.jsonl").string());
      return kExitOk;
    }
    // Settings still resolve so a bad config file is reported the same way.
    resolve(settings, env);
    if (render->parsed()) return cmd_render(render_args, out);
    if (eval->parsed()) return cmd_eval(eval_args, out);
    if (split->parsed()) return cmd_split(split_args, out);
    if (stats->parsed()) return cmd_stats(stats_args, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace mia::cli
