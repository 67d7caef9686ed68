// Serves the inference JSON protocol from the deterministic mock backend.

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "gps/stub_server.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stub inference server backed by the mock language model"};
  int port = 8080;
  std::string token;
  app.add_option("-p,--port", port, "Port on 127.0.0.1 (0 picks a free one)");
  app.add_option("--token", token, "Require this bearer token");
  CLI11_PARSE(app, argc, argv);

  gps::StubServer server;
  if (!token.empty()) server.require_token(token);
  const int bound = server.start(port);
  std::cout << "listening on http://127.0.0.1:" << bound << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}
