#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "bake/orbit.hpp"
#include "scenario/scenario.hpp"
#include "sims/reference.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(TESSELLATE_FIXTURES); }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh scratch directory holding copies of every fixture file; removed on
// destruction.
class Scratch {
 public:
  Scratch() {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("tessellate-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir_);
    for (const auto& e : fs::directory_iterator(fixture_dir())) fs::copy_file(e.path(), dir_ / e.path().filename());
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  const fs::path& dir() const { return dir_; }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

 private:
  fs::path dir_;
};

inline tessellate::ScenarioDescription load_fixture(const std::string& name) {
  auto outcome = tessellate::parse_description(read_file(fixture_dir() / name));
  if (!outcome.ok()) throw std::runtime_error(tessellate::format_parse_errors(outcome.errors));
  return *outcome.description;
}

inline tessellate::BakeContext reference_context(const fs::path& working_dir) {
  tessellate::BakeContext ctx;
  ctx.registry = tessellate::default_registry();
  ctx.catalog = tessellate::sims::reference_catalog();
  ctx.launch.working_dir = working_dir;
  return ctx;
}

inline const tessellate::ConnectionSpec& connection(const tessellate::ScenarioDescription& d, const std::string& id) {
  return *d.find_connection(id);
}

inline tessellate::ConnectionSpec& connection(tessellate::ScenarioDescription& d, const std::string& id) {
  for (auto& c : d.connections)
    if (c.id == id) return c;
  throw std::out_of_range(id);
}

inline tessellate::SimulatorSpec& simulator(tessellate::ScenarioDescription& d, const std::string& id) {
  for (auto& s : d.simulators)
    if (s.id == id) return s;
  throw std::out_of_range(id);
}

}  // namespace testing
