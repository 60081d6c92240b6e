// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

// Local completion service for trying the remote backend without network
// access. Serves fixture exchanges, and falls back to an n-gram model when
// one is given.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "fastcurv/desk.hpp"
#include "fastcurv/mock_server.hpp"

int main(int argc, char** argv) {
  std::string fixtures;
  std::string model_spec;
  std::string host = "127.0.0.1";
  std::string token_env;
  int port = 8080;

  CLI::App app{"fastcurv mock completion server"};
  app.add_option("--fixtures", fixtures, "fixture file");
  app.add_option("--model", model_spec, "answer unmatched requests from a model: builtin | PATH");
  app.add_option("--host", host, "bind address")->capture_default_str();
  app.add_option("--port", port, "port")->capture_default_str();
  app.add_option("--token-env", token_env, "require the bearer token stored in this environment variable");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<fastcurv::FixtureExchange> ex;
    if (!fixtures.empty()) ex = fastcurv::load_fixtures(fixtures);
    std::shared_ptr<const fastcurv::lm::NgramModel> model;
    if (model_spec == "builtin") {
      model = fastcurv::build_desk().model;
    } else if (!model_spec.empty()) {
      model = std::make_shared<const fastcurv::lm::NgramModel>(fastcurv::lm::load_model(model_spec));
    }
    std::optional<std::string> token;
    if (!token_env.empty()) {
      const char* t = std::getenv(token_env.c_str());
      if (t == nullptr || *t == '\0') {
        std::cerr << "error: environment variable " << token_env << " is not set\n";
        return 2;
      }
      token = t;
    }
    fastcurv::MockServer server(std::move(ex), model, token);
    std::cout << "serving on http://" << host << ':' << port << "/v1/completions" << std::endl;
    server.run(host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
