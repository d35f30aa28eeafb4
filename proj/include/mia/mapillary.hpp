#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mia/fpv.hpp"
#include "mia/geodesy.hpp"

namespace mia {

inline constexpr std::string_view kDefaultApiBase = "https://graph.mapillary.com";
inline constexpr std::string_view kTokenEnvVar = "MIA_MAPILLARY_TOKEN";

struct HttpResponse {
  int status = 0;  // 0 = connection failure
  std::string body;
};

// Issues GET requests for a path+query relative to some base.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& target) = 0;
};

// cpp-httplib backed transport. `base_url` is scheme://host[:port].
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string base_url,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30));
  HttpResponse get(const std::string& target) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

// Serves the two metadata endpoints from a directory holding one
// `<id>.json` document per image (the image endpoint's field names).
// Bounding-box listing scans those documents.
class FixtureTransport : public Transport {
 public:
  explicit FixtureTransport(std::filesystem::path images_dir);
  HttpResponse get(const std::string& target) override;

 private:
  std::filesystem::path dir_;
  std::once_flag index_once_;
  // id -> (lon, lat)
  std::map<std::string, std::pair<double, double>> index_;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  // Replaceable so tests need not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Spaces request starts on one host at least `min_interval` apart.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration min_interval_{};
  std::chrono::steady_clock::time_point next_{};
};

struct RequestStats {
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> retries{0};
};

// Transport wrapper adding retries with exponential backoff and per-host
// rate limiting.
class ApiClient {
 public:
  explicit ApiClient(std::shared_ptr<Transport> transport, RetryPolicy retry = {},
                     double requests_per_second = 0.0);
  virtual ~ApiClient() = default;

  // GET with retry on 5xx/429/connection failure. 401/403 throw
  // CredentialError immediately; other statuses throw TransportError.
  std::string get(const std::string& target);

  const RequestStats& stats() const { return stats_; }

 private:
  std::shared_ptr<Transport> transport_;
  RetryPolicy retry_;
  std::unique_ptr<RateLimiter> limiter_;
  RequestStats stats_;
};

class MapillaryClient : public ApiClient {
 public:
  MapillaryClient(std::shared_ptr<Transport> transport, std::string token,
                  RetryPolicy retry = {}, double requests_per_second = 0.0);

  std::string tile_target(const TileId& t) const;
  std::string image_target(const std::string& id) const;

 private:
  std::string token_;
};

// Fields requested from the image endpoint.
std::string_view image_fields();

std::vector<std::string> parse_tile_listing(std::string_view body, const TileId& t);
std::vector<std::string> fetch_tile_image_ids(const TileId& t, MapillaryClient& client);

// Missing mandatory fields throw ParseError naming the field. Absent SfM
// geometry/heading stay absent.
ImageMetadata parse_image_metadata(const nlohmann::json& doc);
ImageMetadata parse_image_metadata(std::string_view body);
ImageMetadata fetch_image_metadata(const std::string& id, MapillaryClient& client);

// Serializes with the same field names parse_image_metadata reads.
nlohmann::json image_metadata_to_json(const ImageMetadata& m);

// "iPhone 11 Pro" -> "iphone11pro".
std::string normalize_camera_model(std::string_view model);

}  // namespace mia
