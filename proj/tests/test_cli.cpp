#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "conelab/commands.hpp"
#include "conelab/errors.hpp"
#include "doctest.h"

using namespace conelab;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = CONELAB_SOURCE_DIR "/configs/";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("conelab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::string& command, const std::string& config, const fs::path& out,
        std::vector<Vec3> points = {}, std::optional<std::uint64_t> seed = std::nullopt) {
  CommandRequest req;
  req.command = command;
  req.config_path = config;
  req.out_dir = out.string();
  req.points = std::move(points);
  req.seed = seed;
  std::ostringstream o, e;
  const int code = run_cli(req, o, e);
  return {code, o.str(), e.str()};
}

const char* kSmallDisk =
    "[domain]\ndim = 2\n[operator]\nlambda0 = 1e-6\ng = x * y + x\n[analysis]\npoint = 0.2, 0.1\npoint = 1, 0\n"
    "h = 0.1\ncone_samples = 2000\n";

}  // namespace

TEST_CASE("every output starts with the config hash") {
  const auto dir = scratch("hash");
  const auto cfg = write_config(dir, kSmallDisk).string();
  const std::string hash = config_hash(effective_config({"solve", cfg, {}, (dir / "a").string(), {}}));
  for (const char* cmd : {"solve", "estimate-p", "slice-poincare", "mesh-export"}) {
    CAPTURE(cmd);
    const auto out = dir / cmd;
    REQUIRE(run(cmd, cfg, out).code == 0);
    for (const auto& f : fs::directory_iterator(out)) {
      CAPTURE(f.path().string());
      CHECK(read(f.path()).rfind("# config-hash: ", 0) == 0);
    }
  }
  // The output directory does not enter the hash.
  CHECK(read(dir / "solve" / "manifest.txt").rfind("# config-hash: " + hash + "\n", 0) == 0);
  CHECK(hash.size() == 16);
}

TEST_CASE("manifest lists tolerances, defaults and seeds") {
  const auto dir = scratch("manifest");
  const auto cfg = write_config(dir, kSmallDisk).string();
  REQUIRE(run("estimate-p", cfg, dir / "p").code == 0);
  const std::string m = read(dir / "p" / "manifest.txt");
  for (const char* key : {"eps_val = 1e-10", "eps_grad = 1e-08", "eps_merge = 1e-06", "eps_stab = 0.02",
                          "eps_fit = 1e-08", "lambda0 = 1e-06", "cg_tolerance = 1e-10", "cg_max_iter_factor = 20",
                          "cg_stagnation_window = 500", "cg_iterations = ", "cg_relative_residual = ", "r0 = 0.25",
                          "levels = 8", "discard_inner = 2", "margin = 0.1", "p_grid = 2, 2.25", "seed = 1",
                          "gamma = 3", "grading = on"})
    CHECK_MESSAGE(m.find(key) != std::string::npos, key);
  REQUIRE(run("check-cone", cfg, dir / "c", {Vec3(1, 0, 0)}).code == 0);
  const std::string c = read(dir / "c" / "manifest.txt");
  for (const char* key : {"cone_seed = ", "cone_radii = 0.05, 0.025", "cone_samples = 2000", "alpha1 = ", "alpha2 = "})
    CHECK_MESSAGE(c.find(key) != std::string::npos, key);
}

TEST_CASE("estimate-p on a smooth disk is unbounded") {
  const auto dir = scratch("disk");
  const auto cfg = write_config(dir, kSmallDisk).string();
  const Run r = run("estimate-p", cfg, dir / "o");
  REQUIRE(r.code == 0);
  const std::string csv = read(dir / "o" / "exponent.csv");
  CHECK(csv.find("t_x,t_y,t_z,p_star,margin,confidence\n") != std::string::npos);
  CHECK(csv.find("0.2,0.1,0,unbounded,0.1,high\n") != std::string::npos);
  const std::string prof = read(dir / "o" / "profile_0.csv");
  CHECK(prof.find("\nj,r,p,mass\n0,0.25,2,") != std::string::npos);
}

TEST_CASE("check-cone at a smooth boundary point holds through clause 1") {
  const auto dir = scratch("cone");
  const auto cfg = write_config(dir, kSmallDisk).string();
  REQUIRE(run("check-cone", cfg, dir / "o", {Vec3(1, 0, 0)}).code == 0);
  const std::string csv = read(dir / "o" / "check_cone.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line == "t,clause1,clause2,alpha,holds,confidence");
  std::getline(in, line);
  CHECK(line.rfind("1 0 0,3.1", 0) == 0);
  CHECK(line.find(",true,high") != std::string::npos);
}

TEST_CASE("slice-poincare writes the frozen columns") {
  const auto dir = scratch("slice");
  const auto cfg = write_config(dir, std::string(kSmallDisk) + "slice_field = 0\n").string();
  const Run r = run("slice-poincare", cfg, dir / "o");
  REQUIRE(r.code == 0);
  const std::string csv = read(dir / "o" / "slice.csv");
  CHECK(csv.find("eta,num,den,ratio\n0.125,0,0,degenerate\n") != std::string::npos);
  CHECK(r.out.find("no slope") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  CHECK(run("solve", (dir / "missing.cfg").string(), dir / "o").code == kExitIo);

  const auto bad = write_config(dir, "[domain]\ndim = 2\nconstraint = x^^2 > 0\n");
  const Run b = run("solve", bad.string(), dir / "o");
  CHECK(b.code == kExitValidation);
  CHECK(b.err.find("line 3") != std::string::npos);

  const auto f3 = write_config(dir, "[domain]\ndim = 3\n[operator]\nf = 1\n");
  const Run f = run("solve", f3.string(), dir / "o");
  CHECK(f.code == kExitValidation);
  CHECK(f.err.find("volume source unsupported in 3D") != std::string::npos);

  const auto a3 = write_config(dir, "[domain]\ndim = 3\n[operator]\nA = 2;0;0;0;1;0;0;0;1\n");
  CHECK(run("solve", a3.string(), dir / "o").code == kExitValidation);

  const auto zero = write_config(dir, "[domain]\ndim = 2\n[operator]\nlambda0 = 1\n[analysis]\npoint = 0.3, 0\nh = 0.1\n");
  const Run z = run("estimate-p", zero.string(), dir / "z");
  CHECK(z.code == kExitNumerical);
  CHECK(read(dir / "z" / "exponent.csv").find(",failed,") != std::string::npos);

  const auto ok = write_config(dir, kSmallDisk);
  CHECK(run("check-cone", ok.string(), dir / "o", {Vec3(0.2, 0.1, 0)}).code == kExitValidation);
  CHECK(run("mesh-export", ok.string(), dir / "o", {Vec3(0.2, 0.1, 0.5)}).code == kExitValidation);
  CHECK(run("estimate-p", write_config(dir, "[domain]\n").string(), dir / "o").code == kExitValidation);
  CHECK(run("solve", ok.string(), "/proc/conelab/forbidden").code == kExitIo);

  const Run warn = run("mesh-export", write_config(dir, "[domain]\ndim = 2\n[analysis]\nh = 0.2\n").string(), dir / "w");
  CHECK(warn.code == 0);
  CHECK(warn.err.find("warning: lambda0") != std::string::npos);
}

TEST_CASE("seed override") {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, kSmallDisk).string();
  REQUIRE(run("check-cone", cfg, dir / "a", {Vec3(1, 0, 0)}).code == 0);
  REQUIRE(run("check-cone", cfg, dir / "b", {Vec3(1, 0, 0)}, 99).code == 0);
  CHECK(read(dir / "b" / "manifest.txt").find("\nseed = 99\n") != std::string::npos);
  CHECK(read(dir / "a" / "check_cone.csv") != read(dir / "b" / "check_cone.csv"));
}

TEST_CASE("identical runs give byte-identical files") {
  const auto dir = scratch("repro");
  const auto disk = write_config(dir, kSmallDisk).string();
  const std::string shell =
      "[domain]\ndim = 3\nconstraint = x^2 + y^2 + z^2 > 0.25\n[operator]\nlambda0 = 1e-6\ng = 1 / r\n"
      "[analysis]\npoint = 0.75, 0, 0\npoint = 0, 0, 0.75\nwalkers = 2000\nprofile_samples = 4\nlevels = 5\n"
      "discard_inner = 0\n";
  const auto shell_cfg = dir / "shell.cfg";
  std::ofstream(shell_cfg) << shell;
  struct Case {
    const char* command;
    std::string config;
    std::vector<Vec3> points;
  };
  const std::vector<Case> cases = {{"check-cone", disk, {Vec3(1, 0, 0), Vec3(0, -1, 0)}},
                                   {"solve", disk, {}},
                                   {"estimate-p", disk, {}},
                                   {"slice-poincare", disk, {}},
                                   {"mesh-export", disk, {}},
                                   {"solve", shell_cfg.string(), {}}};
  for (const auto& c : cases) {
    CAPTURE(c.command);
    const auto a = dir / "a", b = dir / "b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run(c.command, c.config, a, c.points).code == 0);
    REQUIRE(run(c.command, c.config, b, c.points).code == 0);
    for (const auto& f : fs::directory_iterator(a)) {
      if (f.path().filename() == "manifest.txt") continue;
      CHECK(read(f.path()) == read(b / f.path().filename()));
    }
    // Manifests differ only in the recorded output directory.
    std::string ma = read(a / "manifest.txt"), mb = read(b / "manifest.txt");
    ma.replace(ma.find(a.string()), a.string().size(), b.string());
    CHECK(ma == mb);
  }
}
