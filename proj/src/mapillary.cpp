#include "mia/mapillary.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mia/errors.hpp"
#include "mia/raster.hpp"

namespace mia {

using nlohmann::json;

HttpTransport::HttpTransport(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HttpResponse HttpTransport::get(const std::string& target) {
  // A client per call keeps the transport safe to share across workers.
  httplib::Client cli(base_url_);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
  auto res = cli.Get(target);
  if (!res) return HttpResponse{0, httplib::to_string(res.error())};
  return HttpResponse{res->status, res->body};
}

namespace {

std::map<std::string, std::string> parse_query(std::string_view target, std::string* path) {
  std::map<std::string, std::string> q;
  const auto qpos = target.find('?');
  *path = std::string(target.substr(0, qpos));
  if (qpos == std::string_view::npos) return q;
  httplib::Params params;
  httplib::detail::parse_query_text(std::string(target.substr(qpos + 1)), params);
  for (const auto& [k, v] : params) q.emplace(k, v);
  return q;
}

}  // namespace

FixtureTransport::FixtureTransport(std::filesystem::path images_dir) : dir_(std::move(images_dir)) {}

HttpResponse FixtureTransport::get(const std::string& target) {
  std::string path;
  const auto query = parse_query(target, &path);
  if (path == "/images") {
    std::call_once(index_once_, [this] {
      if (!std::filesystem::is_directory(dir_)) return;
      for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() != ".json") continue;
        const json doc = json::parse(read_file_text(entry.path()), nullptr, false);
        if (doc.is_discarded() || !doc.contains("geometry")) continue;
        const auto& c = doc["geometry"]["coordinates"];
        index_[entry.path().stem().string()] = {c[0].get<double>(), c[1].get<double>()};
      }
    });
    const auto it = query.find("bbox");
    if (it == query.end()) return {400, R"({"error":"bbox required"})"};
    double w, s, e, n;
    char c1, c2, c3;
    std::istringstream in(it->second);
    if (!(in >> w >> c1 >> s >> c2 >> e >> c3 >> n)) return {400, R"({"error":"bad bbox"})"};
    json data = json::array();
    for (const auto& [id, ll] : index_) {
      if (ll.first >= w && ll.first <= e && ll.second >= s && ll.second <= n) {
        data.push_back({{"id", id}});
      }
    }
    return {200, json{{"data", data}}.dump()};
  }
  const std::string id = path.empty() ? path : path.substr(1);
  const auto file = dir_ / (id + ".json");
  if (id.empty() || id.find('/') != std::string::npos || !std::filesystem::exists(file)) {
    return {404, R"({"error":"not found"})"};
  }
  return {200, read_file_text(file)};
}

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0) {
    min_interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + min_interval_;
  }
  std::this_thread::sleep_until(slot);
}

MapillaryClient::MapillaryClient(std::shared_ptr<Transport> transport, std::string token,
                                 RetryPolicy retry, double requests_per_second)
    : ApiClient(std::move(transport), std::move(retry), requests_per_second),
      token_(std::move(token)) {}

ApiClient::ApiClient(std::shared_ptr<Transport> transport, RetryPolicy retry,
                     double requests_per_second)
    : transport_(std::move(transport)),
      retry_(std::move(retry)),
      limiter_(std::make_unique<RateLimiter>(requests_per_second)) {
  if (!retry_.sleep) {
    retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  retry_.max_attempts = std::max(retry_.max_attempts, 1);
}

std::string ApiClient::get(const std::string& target) {
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    limiter_->acquire();
    ++stats_.requests;
    const HttpResponse res = transport_->get(target);
    if (res.status >= 200 && res.status < 300) return res.body;
    if (res.status == 401 || res.status == 403) {
      throw CredentialError(fmt::format("API rejected the access token (HTTP {})", res.status));
    }
    const bool transient = res.status == 0 || res.status == 429 || res.status >= 500;
    if (!transient) {
      throw TransportError(fmt::format("GET {} failed with HTTP {}", target.substr(0, target.find('?')), res.status));
    }
    spdlog::warn("GET {} attempt {}/{} failed (status {})", target.substr(0, target.find('?')),
                 attempt, retry_.max_attempts, res.status);
    if (attempt >= retry_.max_attempts) {
      throw TransportError(fmt::format("GET {} failed after {} attempts",
                                       target.substr(0, target.find('?')), attempt));
    }
    ++stats_.retries;
    retry_.sleep(backoff);
    backoff = std::min(retry_.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.multiplier)));
  }
}

std::string MapillaryClient::tile_target(const TileId& t) const {
  const TileBounds b = tile_bounds(t);
  return fmt::format("/images?access_token={}&fields=id&limit=2000&bbox={:.10f},{:.10f},{:.10f},{:.10f}",
                     token_, b.west, b.south, b.east, b.north);
}

std::string_view image_fields() {
  return "id,sequence,geometry,computed_geometry,compass_angle,computed_compass_angle,"
         "captured_at,camera_type,camera_parameters,make,model,width,height,thumb_2048_url";
}

std::string MapillaryClient::image_target(const std::string& id) const {
  return fmt::format("/{}?access_token={}&fields={}", id, token_, image_fields());
}

std::vector<std::string> parse_tile_listing(std::string_view body, const TileId& t) {
  const auto tile_name = fmt::format("{}/{}/{}", t.zoom, t.x, t.y);
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
    throw ParseError("malformed image listing for tile " + tile_name);
  }
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& item : doc["data"]) {
    if (!item.is_object() || !item.contains("id")) {
      throw ParseError("image listing entry without id for tile " + tile_name);
    }
    const auto& v = item["id"];
    std::string id = v.is_string() ? v.get<std::string>() : v.dump();
    if (seen.insert(id).second) ids.push_back(std::move(id));
  }
  return ids;
}

std::vector<std::string> fetch_tile_image_ids(const TileId& t, MapillaryClient& client) {
  return parse_tile_listing(client.get(client.tile_target(t)), t);
}

std::string normalize_camera_model(std::string_view model) {
  std::string out;
  for (char c : model) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

namespace {

const json& require(const json& doc, const char* field) {
  if (!doc.contains(field) || doc[field].is_null()) {
    throw ParseError(fmt::format("image metadata missing field '{}'", field));
  }
  return doc[field];
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

GeoPoint parse_point(const json& g, const char* field) {
  if (!g.is_object() || !g.contains("coordinates") || !g["coordinates"].is_array() ||
      g["coordinates"].size() < 2 || !g["coordinates"][0].is_number() ||
      !g["coordinates"][1].is_number()) {
    throw ParseError(fmt::format("image metadata field '{}' is not a GeoJSON point", field));
  }
  return GeoPoint(g["coordinates"][1].get<double>(), g["coordinates"][0].get<double>());
}

double number(const json& v, const char* field) {
  if (!v.is_number()) throw ParseError(fmt::format("image metadata field '{}' is not numeric", field));
  return v.get<double>();
}

}  // namespace

ImageMetadata parse_image_metadata(const json& doc) {
  if (!doc.is_object()) throw ParseError("image metadata is not a JSON object");
  ImageMetadata m;
  m.id = id_string(require(doc, "id"));
  if (m.id.empty()) throw ParseError("image metadata field 'id' is empty");
  m.sequence_id = id_string(require(doc, "sequence"));
  m.recorded_point = parse_point(require(doc, "geometry"), "geometry");
  if (doc.contains("computed_geometry") && !doc["computed_geometry"].is_null()) {
    m.sfm_point = parse_point(doc["computed_geometry"], "computed_geometry");
  }
  m.recorded_heading = Heading(number(require(doc, "compass_angle"), "compass_angle"));
  if (doc.contains("computed_compass_angle") && !doc["computed_compass_angle"].is_null()) {
    m.sfm_heading = Heading(number(doc["computed_compass_angle"], "computed_compass_angle"));
  }
  const json& ts = require(doc, "captured_at");
  if (!ts.is_number_integer()) throw ParseError("image metadata field 'captured_at' is not an integer");
  m.captured_at = ts.get<std::int64_t>();
  if (m.captured_at <= 0) throw ParseError("image metadata field 'captured_at' must be positive");
  if (doc.contains("model") && doc["model"].is_string()) {
    m.camera_model = normalize_camera_model(doc["model"].get<std::string>());
  }
  if (doc.contains("camera_type") && doc["camera_type"].is_string()) {
    m.camera_type = camera_type_from_string(doc["camera_type"].get<std::string>());
  }
  if (doc.contains("camera_parameters") && doc["camera_parameters"].is_array()) {
    const auto& p = doc["camera_parameters"];
    CameraParams cp;
    if (!p.empty()) cp.focal = number(p[0], "camera_parameters");
    if (p.size() > 1) cp.k1 = number(p[1], "camera_parameters");
    if (p.size() > 2) cp.k2 = number(p[2], "camera_parameters");
    m.camera_params = cp;
  }
  if (doc.contains("width") && doc["width"].is_number_integer()) m.width = doc["width"].get<int>();
  if (doc.contains("height") && doc["height"].is_number_integer()) m.height = doc["height"].get<int>();
  if (doc.contains("thumb_2048_url") && doc["thumb_2048_url"].is_string()) {
    m.thumb_url = doc["thumb_2048_url"].get<std::string>();
  }
  return m;
}

ImageMetadata parse_image_metadata(std::string_view body) {
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw ParseError("image metadata is not valid JSON");
  return parse_image_metadata(doc);
}

ImageMetadata fetch_image_metadata(const std::string& id, MapillaryClient& client) {
  if (id.empty()) throw ValidationError("empty image id");
  const std::string body = client.get(client.image_target(id));
  auto m = parse_image_metadata(std::string_view(body));
  if (m.id != id) throw ParseError(fmt::format("requested image {} but received {}", id, m.id));
  return m;
}

json image_metadata_to_json(const ImageMetadata& m) {
  auto point = [](const GeoPoint& p) {
    return json{{"type", "Point"}, {"coordinates", {p.lon(), p.lat()}}};
  };
  json doc;
  doc["id"] = m.id;
  doc["sequence"] = m.sequence_id;
  doc["geometry"] = point(m.recorded_point);
  if (m.sfm_point) doc["computed_geometry"] = point(*m.sfm_point);
  doc["compass_angle"] = m.recorded_heading.degrees();
  if (m.sfm_heading) doc["computed_compass_angle"] = m.sfm_heading->degrees();
  doc["captured_at"] = m.captured_at;
  doc["model"] = m.camera_model;
  doc["camera_type"] = std::string(to_string(m.camera_type));
  if (m.camera_params) {
    doc["camera_parameters"] = {m.camera_params->focal, m.camera_params->k1, m.camera_params->k2};
  }
  if (m.width > 0) doc["width"] = m.width;
  if (m.height > 0) doc["height"] = m.height;
  if (!m.thumb_url.empty()) doc["thumb_2048_url"] = m.thumb_url;
  return doc;
}

}  // namespace mia
