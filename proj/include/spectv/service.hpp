#pragma once

#include <cstddef>
#include <memory>
#include <string>

namespace spectv {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;                            // 0: any free port
  std::size_t max_upload = 64u << 20;         // bytes per request
  int preview_cap = 512;                      // long side of the working resolution
  double session_ttl = 1800.0;                // idle seconds before a session is dropped
  double preview_tol = 1e-4;                  // default gap tolerance for session decompositions
  std::string cors_origin;                    // Access-Control-Allow-Origin value; empty: no CORS headers
};

/// HTTP front end over prepare_fusion/render_fusion.
///
///   POST   /sessions                          multipart: image1, image2 (PNG), optional
///                                             landmarks1, landmarks2 (text), mask1:<region>,
///                                             mask2:<region> (PNG; mask:<region> means mask1),
///                                             config (JSON). 201 {"id", "status", ...}
///   GET    /sessions/{id}                     status, progress, sizes, effective config
///   POST   /sessions/{id}/preview             filter-spec text in, PNG out
///   GET    /sessions/{id}/spec                last previewed spec
///   GET    /sessions/{id}/bands/{image}/{k}   offset-encoded band PNG, ?depth=8|16
///   DELETE /sessions/{id}
///
/// Errors are JSON {"error", "stage"}: 400 invalid input, 404 unknown session or
/// band, 409 not ready, 413 too large, 422 landmark/mask inconsistency.
class FusionService {
 public:
  explicit FusionService(ServiceConfig config = {});
  ~FusionService();
  FusionService(const FusionService&) = delete;
  FusionService& operator=(const FusionService&) = delete;

  /// Returns the bound port, or -1.
  int bind();
  /// Blocks until stop().
  void serve();
  void stop();
  const ServiceConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(const void* data, std::size_t size);
/// Unguessable lowercase hex token of 2*bytes characters.
std::string random_token(std::size_t bytes = 16);

}  // namespace spectv
