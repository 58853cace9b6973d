#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace tslip;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("empty document gives the defaults") {
    const RunConfig c = parse_config(json::object());
    CHECK(canonical_text(c) == canonical_text(default_config()));
  }

  TEST_CASE("canonical form is a fixed point of parse and dump") {
    RunConfig c = default_config();
    c.vp_radius = -0.4;
    c.controller.pid.desired_pitch = deg2rad(12.345678901234567);
    c.controller.leg.initial_td_angle = deg2rad(71.3);
    const std::string once = canonical_text(c);
    const std::string twice = canonical_text(parse_config(json::parse(once)));
    const std::string thrice = canonical_text(parse_config(json::parse(twice)));
    CHECK(once == twice);
    CHECK(twice == thrice);
  }

  TEST_CASE("degree fields survive repeated round trips for random angles") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> deg(-89, 89);
    for (int i = 0; i < 200; ++i) {
      json doc{{"controller", {{"pid", {{"desired_pitch_deg", deg(rng)}}},
                               {"leg_placement", {{"initial_td_angle_deg", 60 + deg(rng) / 10}}}}}};
      const std::string a = canonical_text(parse_config(doc));
      const std::string b = canonical_text(parse_config(json::parse(a)));
      CHECK(a == b);
    }
  }

  TEST_CASE("hash ignores key order and tracks content") {
    const json a = json::parse(R"({"model": {"mass": 70, "inertia": 4}, "run": {"speed": 6}})");
    const json b = json::parse(R"({"run": {"speed": 6}, "model": {"inertia": 4, "mass": 70}})");
    CHECK(config_hash(parse_config(a)) == config_hash(parse_config(b)));
    const json c = json::parse(R"({"run": {"speed": 6.5}, "model": {"inertia": 4, "mass": 70}})");
    CHECK(config_hash(parse_config(a)) != config_hash(parse_config(c)));
    CHECK(config_hash(default_config()).size() == 64);
  }

  TEST_CASE("SHA-256 of known input") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("unknown keys are rejected with their path") {
    try {
      parse_config(json::parse(R"({"controller": {"pid": {"kp": 1}}})"));
      FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("controller.pid.kp") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(json::parse(R"({"extra": 1})")), ConfigError);
  }

  TEST_CASE("wrong types and bad enums are rejected") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"model": {"mass": "heavy"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"model": {"damper_kind": "quadratic"}})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"sweep": {"speeds": 5}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"([1, 2])")), ConfigError);
  }

  TEST_CASE("physical values are validated") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"model": {"mass": -1}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"run": {"vp_radius": 2}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"run": {"speed": 0}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"integrator": {"abs_tol": 0}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"deterministic": false})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"schema_version": 2})")), ConfigError);
    CHECK_THROWS_AS(
        parse_config(json::parse(R"({"sweep": {"duty_factor": {"slow_lo": 0.5, "slow_hi": 0.4}}})")),
        ConfigError);
  }

  TEST_CASE("VP frame follows the radius sign unless given") {
    RunConfig c = default_config();
    c.vp_radius = -0.2;
    CHECK(c.vp().angle_frame == VpFrame::world);
    c.vp_radius = 0.2;
    CHECK(c.vp().angle_frame == VpFrame::body);
    c.vp_frame = VpFrame::world;
    CHECK(c.vp().angle_frame == VpFrame::world);
  }

  TEST_CASE("output format names") {
    CHECK(parse_output_format("csv") == OutputFormat::csv);
    CHECK(std::string(to_string(OutputFormat::both)) == "both");
    CHECK_THROWS_AS(parse_output_format("pdf"), ConfigError);
  }
}
