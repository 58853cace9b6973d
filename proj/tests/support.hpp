// Shared helpers: fixture loading and cached in-memory reruns.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslip/config.hpp"
#include "tslip/io.hpp"
#include "tslip/runner.hpp"

namespace tslip::test {

inline std::string fixture_path(const std::string& file) {
  return std::string(TSLIP_FIXTURE_DIR) + "/" + file;
}

struct Fixture {
  std::string name;
  nlohmann::json doc;
  ModelParamsd params;
  std::vector<StrideRecord> strides;  // parsed from the stored CSV
};

inline const Fixture& fixture(const std::string& name) {
  static std::map<std::string, Fixture> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  Fixture f;
  f.name = name;
  f.doc = nlohmann::json::parse(read_text_file(fixture_path(name + ".json")));
  f.params = default_config().model;
  f.params.damping_coefficient = f.doc.at("damping_coefficient").get<double>();
  f.strides = parse_timeseries(read_text_file(fixture_path(name + ".csv")), f.params);
  return cache.emplace(name, std::move(f)).first->second;
}

inline FixtureSpec fixture_spec(const std::string& name) {
  for (const FixtureSpec& s : standard_fixtures())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown fixture " + name);
}

/// Fixture gait recomputed from the default config; cached per process.
inline const SingleRun& fixture_run(const std::string& name) {
  static std::map<std::string, SingleRun> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  return cache.emplace(name, execute_run(fixture_config(default_config(), fixture_spec(name))))
      .first->second;
}

inline std::vector<StrideRecord> steady(const GaitRun& run) {
  std::vector<StrideRecord> out;
  for (const StrideRecord* r : run.steady_strides()) out.push_back(*r);
  return out;
}

inline double rel_diff(double a, double b, double floor = 0.0) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return scale > 0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace tslip::test
