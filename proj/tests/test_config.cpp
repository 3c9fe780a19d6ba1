#include "btsim/config.hpp"
#include "btsim/error.hpp"
#include "btsim/oracle.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace btsim;
namespace fs = std::filesystem;

namespace {

const char* kInterval = R"({"mesh":{"builtin":"box","p0_um":[0],"p1_um":[10],"n":[40],"marker_split":{"axis":0,"at_um":[5]}},
 "compartments":[{"marker":0,"D_mm2_per_s":3e-3},{"marker":1,"D_mm2_per_s":1e-3,"T2_ms":40}],
 "permeability_m_per_s":1e-5,
 "sequence":{"type":"pgse","delta_us":10600,"Delta_us":43100},
 "gradient":{"direction":[1],"b_values_s_per_mm2":[0,1000,2000,4000]},
 "time":{"dt_us":400,"theta":0.5}})";

const char* kPeriodicBox = R"({"mesh":{"builtin":"box","p0_um":[0,0,0],"p1_um":[10,10,10],"n":[2,2,2]},
 "compartments":[{"D_mm2_per_s":3e-3}],
 "sequence":{"type":"pgse","delta_us":10600,"Delta_us":43100},
 "gradient":{"direction":[1,0,0],"b_values_s_per_mm2":[0,1000,2000,4000]},
 "time":{"dt_us":100,"theta":0.5},"bc":"periodic_strong"})";

ErrorKind parse_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

std::string patched(const std::string& patch) { return merge_config_patch(kInterval, patch); }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("btsim_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BTSIM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("units are converted on input") {
  auto cfg = parse_config(kInterval);
  CHECK(cfg.compartments.size() == 2);
  CHECK(cfg.compartments[0].diffusion(0, 0) == 3e-3);
  CHECK(cfg.compartments[1].t2 == 40000.0);
  CHECK(cfg.kappa == 1e-5);
  CHECK(cfg.dt == 400.0);
  CHECK(cfg.sequence.delta == 10600.0);
  CHECK(parse_config(patched(R"({"time":{"dt_us":null,"dt_ms":0.25}})")).dt == 250.0);
}

TEST_CASE("strict keys and types") {
  CHECK(parse_kind(patched(R"({"colour":"red"})")) == ErrorKind::kConfiguration);
  CHECK(parse_kind(patched(R"({"time":{"step":1}})")) == ErrorKind::kConfiguration);
  CHECK(parse_kind(patched(R"({"time":{"dt_us":"fast"}})")) == ErrorKind::kConfiguration);
  CHECK(parse_kind(patched(R"({"time":{"dt_ms":0.1}})")) == ErrorKind::kConfiguration);  // both units
  CHECK(parse_kind(patched(R"({"gradient":{"g_T_per_um":[1e-9]}})")) == ErrorKind::kConfiguration);
  CHECK(parse_kind(patched(R"({"bc":"sideways"})")) == ErrorKind::kConfiguration);
  CHECK(parse_kind(patched(R"({"mesh":null})")) == ErrorKind::kConfiguration);
  CHECK(parse_kind("{not json") == ErrorKind::kConfiguration);
}

TEST_CASE("b = 0 alone gives unit attenuation") {
  auto records = run_config(parse_config(patched(R"({"gradient":{"b_values_s_per_mm2":[0]}})")));
  REQUIRE(records.size() == 1);
  CHECK(records[0].attenuation == 1.0);
  CHECK(records[0].g == 0.0);
}

TEST_CASE("periodic box matches free diffusion") {
  auto records = run_config(parse_config(kPeriodicBox));
  REQUIRE(records.size() == 4);
  const Mat3 d = 3e-3 * Mat3::Identity();
  for (const auto& r : records) {
    const double expect = analytic_free_signal(r.b, d, Vec3::UnitX());
    CHECK(std::abs(r.attenuation - expect) <= 5e-3 * expect);
  }
}

TEST_CASE("csv output is bit stable and attenuation decreases") {
  auto cfg = parse_config(kInterval);
  auto a = run_config(cfg);
  auto b = run_config(cfg);
  CHECK(format_csv(a) == format_csv(b));
  CHECK(format_csv(a).rfind("b,g,S_re,S_im,attenuation\n", 0) == 0);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].attenuation < a[i - 1].attenuation);
  CHECK(format_svg(a, true).find("<svg") != std::string::npos);
}

TEST_CASE("multi-compartment flag must match the markers") {
  CHECK_NOTHROW(run_config(parse_config(patched(R"({"multi_compartment":1,"gradient":{"b_values_s_per_mm2":[0]}})"))));
  CHECK_THROWS_AS(run_config(parse_config(patched(R"({"multi_compartment":0})"))), Error);
}

TEST_CASE("command line") {
  TempDir dir;
  const auto cfg = dir.write("interval.json", kInterval);
  const auto out = dir.path / "out.csv";
  REQUIRE(cli("run " + cfg.string() + " --dt 100 --csv " + out.string()) == 0);
  auto expect = parse_config(kInterval);
  expect.dt = 100.0;
  CHECK(slurp(out) == format_csv(run_config(expect)));

  CHECK(cli("run " + dir.write("bad.json", patched(R"({"colour":1})")).string()) == 2);
  CHECK(cli("run " + cfg.string() + " --no-such-flag") == 2);
  const auto bad_mesh = dir.write("broken.msh", "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n");
  CHECK(cli("run " + cfg.string() + " -f " + bad_mesh.string()) == 3);
  CHECK(cli("run " + cfg.string() + " --theta 0 --dt 100 -b 1000") == 4);

  const auto native = dir.path / "mesh.txt";
  const auto msh = dir.write("tri.msh",
                             "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n"
                             "$EndNodes\n$Elements\n2\n1 2 1 4 1 2 3\n2 2 1 5 1 3 4\n$EndElements\n");
  CHECK(cli("convert " + msh.string() + " " + native.string()) == 0);
  CHECK(slurp(native).rfind("btmesh", 0) == 0);
  CHECK(cli("oracle " + cfg.string() + " --lengths 5 5 --D 3e-3 1e-3 --kappa 1e-5 --cells 400") == 0);
  CHECK(cli("oracle " + cfg.string() + " --lengths 5 5 --D 3e-3") == 2);
}
