#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "yamabe/yamabe_c.h"

TEST_CASE("closed-form curvatures through the C interface") {
  yamabe_curvatures c{};
  REQUIRE(yamabe_curvatures_eval(3, 1, 1.0, 1.0, &c) == YAMABE_OK);
  CHECK(c.product_R == -2.0);
  CHECK(c.model_H == doctest::Approx(-0.7071067811865476));
  CHECK(c.conformal_R == doctest::Approx(-2.0));
  CHECK(c.conformal_H == doctest::Approx(-0.7071067811865476));
  CHECK(c.c0_star == doctest::Approx(0.25));
  CHECK(yamabe_curvatures_eval(4, 5, 1.0, 1.0, &c) == YAMABE_ERR_ARGUMENT);
  CHECK(std::strlen(yamabe_last_error()) > 0);
  CHECK(yamabe_curvatures_eval(3, 1, 1.0, 1.0, nullptr) == YAMABE_ERR_ARGUMENT);
  CHECK(std::strlen(yamabe_version()) > 0);
}

TEST_CASE("configuration handles") {
  yamabe_config* cfg = nullptr;
  CHECK(yamabe_config_parse("[nonsense]\nx = 1\n", &cfg) == YAMABE_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(yamabe_last_error()).find("unknown section") != std::string::npos);
  CHECK(yamabe_config_parse(nullptr, &cfg) == YAMABE_ERR_ARGUMENT);
  CHECK(yamabe_config_load("/nonexistent.ini", &cfg) == YAMABE_ERR_CONFIG);

  REQUIRE(yamabe_config_parse("[experiment]\nkind = curvature\n", &cfg) == YAMABE_OK);
  const char* kind = nullptr;
  REQUIRE(yamabe_config_kind(cfg, &kind) == YAMABE_OK);
  CHECK(std::string(kind) == "curvature");
  CHECK(yamabe_config_select_kind(cfg, "solve") == YAMABE_ERR_CONFIG);
  CHECK(yamabe_config_select_kind(cfg, "curvature") == YAMABE_OK);
  CHECK(yamabe_config_select_kind(cfg, "bogus") == YAMABE_ERR_CONFIG);
  yamabe_config_free(cfg);
  yamabe_config_free(nullptr);
}

TEST_CASE("running an experiment in memory") {
  yamabe_config* cfg = nullptr;
  REQUIRE(yamabe_config_parse("[curvature]\ncases = 3:1:1, 6:1:0.5\n", &cfg) == YAMABE_OK);
  REQUIRE(yamabe_config_select_kind(cfg, "curvature") == YAMABE_OK);
  yamabe_result* res = nullptr;
  REQUIRE(yamabe_run(cfg, nullptr, 1, 0, 0, &res) == YAMABE_OK);
  CHECK(yamabe_result_exit_code(res) == 0);
  CHECK(yamabe_result_file_count(res) == 0);
  CHECK(yamabe_result_file(res, 0) == nullptr);
  const auto s = nlohmann::json::parse(yamabe_result_summary_json(res));
  CHECK(s["kind"] == "curvature");
  CHECK(s["curvature"]["cases"].size() == 2);
  CHECK(s["curvature"]["cases"][1]["product_R"].get<double>() == 10.0);
  yamabe_result_free(res);
  CHECK(yamabe_run(cfg, nullptr, 0, 0, 0, &res) == YAMABE_ERR_ARGUMENT);
  CHECK(yamabe_run(nullptr, nullptr, 1, 0, 0, &res) == YAMABE_ERR_ARGUMENT);
  yamabe_config_free(cfg);
}

TEST_CASE("solver failure returns a result with exit code 2") {
  yamabe_config* cfg = nullptr;
  REQUIRE(yamabe_config_parse("[experiment]\nkind = solve\n[mesh]\nn_radial = 8\nn_angular = 8\n"
                              "[solver]\nmax_iter = 1\ntol = 1e-14\n",
                              &cfg) == YAMABE_OK);
  yamabe_result* res = nullptr;
  CHECK(yamabe_run(cfg, nullptr, 1, 0, 0, &res) == YAMABE_ERR_SOLVER);
  REQUIRE(res != nullptr);
  CHECK(yamabe_result_exit_code(res) == 2);
  CHECK(std::string(yamabe_result_message(res)).find("NON_CONVERGENCE") != std::string::npos);
  yamabe_result_free(res);
  yamabe_config_free(cfg);
}
