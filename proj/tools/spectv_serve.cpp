// spectv-serve: preview service for interactive filter design.

#include <omp.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>

#include "CLI11.hpp"
#include "spectv/service.hpp"

namespace {
spectv::FusionService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}
}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("SPECTV_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }
  spectv::ServiceConfig cfg;
  double max_upload_mb = static_cast<double>(cfg.max_upload) / (1 << 20);
  CLI::App app{"Spectral fusion preview service"};
  app.add_option("--host", cfg.host, "Listen address")->envname("SPECTV_HOST");
  app.add_option("-p,--port", cfg.port, "Port (0: any free port)")->envname("SPECTV_PORT");
  app.add_option("--max-upload-mb", max_upload_mb, "Request size limit")->envname("SPECTV_MAX_UPLOAD_MB");
  app.add_option("--preview-cap", cfg.preview_cap, "Long side of session decompositions")
      ->envname("SPECTV_PREVIEW_CAP")
      ->check(CLI::PositiveNumber);
  app.add_option("--ttl", cfg.session_ttl, "Idle seconds before a session expires")->envname("SPECTV_SESSION_TTL");
  app.add_option("--tol", cfg.preview_tol, "Default gap tolerance of session decompositions");
  app.add_option("--cors-origin", cfg.cors_origin, "Allowed browser origin for the filter studio (e.g. *)")
      ->envname("SPECTV_CORS_ORIGIN");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.max_upload = static_cast<std::size_t>(max_upload_mb * (1 << 20));

  spectv::FusionService service(cfg);
  const int port = service.bind();
  if (port < 0) {
    std::fprintf(stderr, "error: cannot bind %s:%d\n", cfg.host.c_str(), cfg.port);
    return 4;
  }
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "listening on http://%s:%d\n", cfg.host.c_str(), port);
  service.serve();
  return 0;
}
