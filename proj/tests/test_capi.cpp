#include "btsim/btsim.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

namespace {

const char* kInterval = R"({"mesh":{"builtin":"box","p0_um":[0],"p1_um":[10],"n":[40],"marker_split":{"axis":0,"at_um":[5]}},
 "compartments":[{"marker":0,"D_mm2_per_s":3e-3},{"marker":1,"D_mm2_per_s":3e-3}],
 "permeability_m_per_s":1e-5,
 "sequence":{"type":"pgse","delta_us":10600,"Delta_us":43100},
 "gradient":{"direction":[1],"b_values_s_per_mm2":[0,1000]},
 "time":{"dt_us":200}})";

}  // namespace

TEST_CASE("c api round trip") {
  CHECK(std::string(btsim_version()).size() > 0);
  btsim_config* cfg = nullptr;
  REQUIRE(btsim_config_load_string(kInterval, &cfg) == BTSIM_OK);
  btsim_result* res = nullptr;
  REQUIRE(btsim_run(cfg, &res) == BTSIM_OK);
  REQUIRE(btsim_result_size(res) == 2);
  btsim_signal_record r0{}, r1{};
  CHECK(btsim_result_get(res, 0, &r0) == BTSIM_OK);
  CHECK(btsim_result_get(res, 1, &r1) == BTSIM_OK);
  CHECK(r0.attenuation == 1.0);
  CHECK(r0.s_re == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(r1.b_s_per_mm2 == 1000.0);
  CHECK(r1.attenuation < 1.0);
  CHECK(r1.direction[0] == 1.0);
  CHECK(btsim_result_get(res, 2, &r0) == BTSIM_ERROR_CONFIG);
  CHECK(std::string(btsim_last_error()).find("range") != std::string::npos);

  // The oracle on the same problem agrees with the FEM signal.
  const double len[] = {5.0, 5.0}, d[] = {3e-3, 3e-3}, kappa[] = {1e-5};
  btsim_result* fd = nullptr;
  REQUIRE(btsim_oracle_run(cfg, 2, len, d, nullptr, kappa, 400, &fd) == BTSIM_OK);
  btsim_signal_record f1{};
  CHECK(btsim_result_get(fd, 1, &f1) == BTSIM_OK);
  CHECK(std::abs(f1.attenuation - r1.attenuation) < 2e-3);

  const auto csv = std::filesystem::temp_directory_path() / "btsim_capi.csv";
  CHECK(btsim_result_write_csv(res, csv.c_str()) == BTSIM_OK);
  CHECK(std::filesystem::file_size(csv) > 20);
  std::filesystem::remove(csv);
  CHECK(btsim_result_write_csv(res, "/nonexistent/dir/x.csv") == BTSIM_ERROR_IO);

  btsim_result_free(fd);
  btsim_result_free(res);
  btsim_config_free(cfg);
}

TEST_CASE("c api errors") {
  btsim_config* cfg = nullptr;
  CHECK(btsim_config_load_string("{\"mesh\":1}", &cfg) == BTSIM_ERROR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(btsim_last_error()).size() > 0);
  CHECK(btsim_config_load_string(nullptr, &cfg) == BTSIM_ERROR_CONFIG);
  CHECK(btsim_config_load_string(kInterval, nullptr) == BTSIM_ERROR_CONFIG);
  CHECK(btsim_config_load_file("/nonexistent.json", &cfg) == BTSIM_ERROR_IO);
  CHECK(btsim_run(nullptr, nullptr) == BTSIM_ERROR_CONFIG);
  CHECK(btsim_result_size(nullptr) == 0);
  btsim_config_free(nullptr);
  btsim_result_free(nullptr);

  REQUIRE(btsim_config_load_string(kInterval, &cfg) == BTSIM_OK);
  CHECK(btsim_config_merge_patch(cfg, "{\"time\":{\"theta\":0,\"dt_us\":100}}") == BTSIM_OK);
  btsim_result* res = nullptr;
  CHECK(btsim_run(cfg, &res) == BTSIM_ERROR_SOLVER);
  CHECK(res == nullptr);
  CHECK(btsim_config_merge_patch(cfg, "{\"bc\":\"periodic_strong\",\"formulation\":\"direct\"}") == BTSIM_OK);
  CHECK(btsim_run(cfg, &res) == BTSIM_ERROR_CONFIG);
  btsim_config_free(cfg);
  CHECK(btsim_mesh_convert("/nonexistent.msh", "/tmp/never.txt") == BTSIM_ERROR_IO);
}
