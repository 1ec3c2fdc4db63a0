// Hosts one reference simulator as a separate process: connects back to the
// orchestrator on 127.0.0.1:<port> and serves the line protocol until stop.

#include <unistd.h>

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "protocol/channel.hpp"
#include "protocol/server.hpp"
#include "sims/reference.hpp"

int main(int argc, char** argv) {
  CLI::App app{"reference simulator host"};
  std::string key;
  int port = 0;
  app.add_option("--sim", key, "grid-sim | pv-sim | controller-sim | collector-sim")->required();
  app.add_option("--port", port, "orchestrator port")->required()->check(CLI::Range(1, 65535));
  CLI11_PARSE(app, argc, argv);

  tessellate::SimulatorContext ctx{key, std::filesystem::current_path()};
  auto sim = tessellate::sims::make_reference_sim(key, ctx);
  if (!sim) {
    std::cerr << "tessellate-sim: unknown simulator '" << key << "'\n";
    return 2;
  }
  int fd = tessellate::connect_local(port);
  if (fd < 0) {
    std::cerr << "tessellate-sim: cannot connect to port " << port << "\n";
    return 3;
  }
  auto channel = tessellate::make_socket_channel(fd);
  tessellate::serve_simulator(*channel, *sim);
  return 0;
}
