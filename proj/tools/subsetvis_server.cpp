#include <csignal>
#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "subsetvis/error.hpp"
#include "subsetvis/server.hpp"

namespace {

subsetvis::server::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  subsetvis::server::ServerOptions opts;
  bool serial = false;
  CLI::App app{"subsetvis HTTP server"};
  app.add_option("--host", opts.host, "Listen address")->envname("SUBSETVIS_HOST");
  app.add_option("--port", opts.port, "Listen port (0 picks one)")->envname("SUBSETVIS_PORT");
  app.add_option("--data-dir", opts.data_dir, "Directory of <name>.csv + <name>.schema.json datasets")
      ->envname("SUBSETVIS_DATA_DIR");
  app.add_option("--max-cube-cells", opts.max_cube_cells, "Cell budget of the per-session cube index")
      ->envname("SUBSETVIS_MAX_CUBE_CELLS");
  app.add_option("--seed", opts.seed, "Default training and t-SNE seed")->envname("SUBSETVIS_SEED");
  app.add_option("--cors-origin", opts.cors_origin, "Allowed browser origin")->envname("SUBSETVIS_CORS_ORIGIN");
  app.add_flag("--serial", serial, "Run kernels on one thread");
  CLI11_PARSE(app, argc, argv);
  if (serial) opts.policy = subsetvis::ExecPolicy::serial;

  subsetvis::server::Service service(opts);
  try {
    const auto n = service.load_data_dir();
    if (n) std::cerr << "loaded " << n << " dataset(s) from " << opts.data_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error loading data directory: " << e.what() << "\n";
    return 1;
  }
  subsetvis::server::HttpServer http(service);
  const int port = http.bind(opts.host, opts.port);
  if (port < 0) {
    std::cerr << "cannot bind " << opts.host << ":" << opts.port << "\n";
    return 1;
  }
  g_server = &http;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on http://" << opts.host << ":" << port << "\n";
  http.listen();
  return 0;
}
