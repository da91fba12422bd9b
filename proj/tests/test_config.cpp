#include <doctest.h>

#include <cstdio>
#include <string>

#include "mldili/config.hpp"
#include "mldili/errors.hpp"

using namespace mldili;

TEST_CASE("defaults reproduce the built-in experiment") {
  const RunConfig c = config_from_json_text(R"({"epsilon": 0.01})");
  CHECK(c.levels == 4);
  CHECK(c.h0 == doctest::Approx(1.0 / 20.0));
  const auto dims = config_param_dims(c);
  REQUIRE(dims.size() == 4);
  CHECK(dims[0] == 150);
  CHECK(dims[1] == 250);
  CHECK(dims[2] == 450);
  CHECK(dims[3] == 850);
  CHECK(c.kernel_rate == 5.0);
  CHECK(c.snr == 50.0);
  CHECK(c.threshold == 1e-2);

  const auto h = hierarchy_from_config(c);
  CHECK(h.fem_dof(0) == 441);
  CHECK(h.fem_dof(3) == 161 * 161);
}

TEST_CASE("invalid fields are reported together") {
  try {
    config_from_json_text(
        R"({"h0": -1, "snr": 0, "mode": "bogus", "thin": 0, "epsilon": 0.1})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("h0") != std::string::npos);
    CHECK(msg.find("snr") != std::string::npos);
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("thin") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(config_from_json_text(R"({"epsilon":0.1,"typo_field":3})"),
                  ConfigError);
}

TEST_CASE("either a tolerance or explicit step counts are required") {
  CHECK_THROWS_AS(config_from_json_text(R"({})"), ConfigError);
  CHECK_NOTHROW(config_from_json_text(R"({"fixed_steps": [100, 100]})"));
}

TEST_CASE("config echo round trips") {
  RunConfig c = config_from_json_text(
      R"({"epsilon": 0.02, "mode": "MLmixed", "seed": 99, "levels": 3})");
  const RunConfig back = config_from_json_text(config_to_json(c));
  CHECK(back.mode == "MLmixed");
  CHECK(back.seed == 99);
  CHECK(back.levels == 3);
  CHECK(back.epsilon == doctest::Approx(0.02));
}
