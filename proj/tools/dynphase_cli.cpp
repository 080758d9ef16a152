// Copyright 2026 The dynphase Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dynphase run <scenario> | validate <scenario> | presets

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dynphase/scenario.hpp"

namespace fs = std::filesystem;
using namespace dynphase;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int guarded(const char* what, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "dynphase " << what << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical-invariant phases of a driven, decohering two-level system"};
  app.require_subcommand(1);

  std::string run_file, out_dir = ".";
  auto* run = app.add_subcommand("run", "execute a scenario and write its CSV outputs");
  run->add_option("scenario", run_file, "scenario file")->required();
  run->add_option("-o,--output-dir", out_dir, "directory for relative output paths");

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "parse and check a scenario without running it");
  validate->add_option("scenario", validate_file, "scenario file")->required();

  std::string write_dir;
  auto* presets = app.add_subcommand("presets", "print the built-in scenarios");
  presets->add_option("-w,--write", write_dir, "also write each scenario to <dir>/<name>.scn");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded("run", [&] {
      const Scenario sc = parse_scenario(read_file(run_file));
      validate_scenario(sc);
      for (const auto& f : execute(sc)) {
        fs::path p(f.path);
        if (p.is_relative()) p = fs::path(out_dir) / p;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
        os << f.content;
        std::cout << f.quantity << " -> " << p.string() << "\n";
      }
    });
  }
  if (*validate) {
    return guarded("validate", [&] {
      const Scenario sc = parse_scenario(read_file(validate_file));
      validate_scenario(sc);
      std::cout << validate_file << ": ok (scenario_hash=fnv1a64:" << sc.hash_hex() << ")\n";
    });
  }
  if (*presets) {
    return guarded("presets", [&] {
      for (const auto& b : builtin_scenarios()) {
        std::cout << "## " << b.name << ": " << b.description << "\n" << b.text << "\n";
        if (!write_dir.empty()) {
          fs::create_directories(write_dir);
          std::ofstream os(fs::path(write_dir) / (std::string(b.name) + ".scn"), std::ios::binary);
          os << b.text;
        }
      }
    });
  }
  return kExitOk;
}
