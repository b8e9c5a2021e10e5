// Copyright 2026 The xeblab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "xeblab/experiments.hpp"

int main(int argc, char** argv) {
  namespace ex = xeblab::exp;
  CLI::App app{"xeblab: XEB experiments and classical spoofing"};
  app.set_version_flag("--version", std::string(XEBLAB_VERSION));
  app.require_subcommand(1);

  std::string run_path, validate_path, out_dir;
  int threads = 0;
  auto* run = app.add_subcommand("run", "run the experiment described by a config");
  run->add_option("config", run_path, "JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output-dir", out_dir, "override output_dir from the config");
  run->add_option("-j,--threads", threads, "worker threads (default: XEBLAB_THREADS or all)")
      ->check(CLI::PositiveNumber);
  auto* list = app.add_subcommand("list-experiments", "print the known experiments");
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", validate_path, "JSON config")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& e : ex::registry()) std::cout << e.name << "\t" << e.description << "\n";
      return 0;
    }
    if (*validate) {
      const ex::Config c = ex::load_config(validate_path);
      std::cout << "ok: " << c.experiment << " seed=" << c.seed << "\n";
      return 0;
    }
    ex::Config c = ex::load_config(run_path);
    if (!out_dir.empty()) c.output_dir = out_dir;
    if (threads > 0) setenv("XEBLAB_THREADS", std::to_string(threads).c_str(), 1);
    const ex::RunOutput out = ex::run(c);
    std::cout << "wrote " << out.csv.string() << " (" << out.table.rows.size() << " rows) and "
              << out.sidecar.string() << "\n";
    if (!out.table.summary.empty()) std::cout << out.table.summary.dump() << "\n";
    return 0;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
