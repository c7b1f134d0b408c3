#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "compc/ply_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "compc_test_cli";

struct Invocation {
  int code;
  std::string out;
};

Invocation run(const std::string& args) {
  fs::create_directories(kWork);
  const std::string cmd = "cd " + kWork.string() + " && " + COMPC_CLI_PATH + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kTiny =
    "--iterations 15 --candidate-views 60 --render-size 32 --surface-views 60 --sdf-iterations 60 "
    "--sdf-layers 2 --sdf-width 16 --sdf-skip 1 --sdf-batch 300 --grid-resolution 32 --resolution 512";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const Invocation r = run("-q synth --mesh builtin:sphere --level 1 --resolution 1024 --output hemi.ply "
                      "--gt-output sphere.ply --gt-points 4096");
    ASSERT_EQ(r.code, 0) << r.out;
  }
};

}  // namespace

TEST_F(Cli, SynthWritesRequestedCounts) {
  EXPECT_EQ(compc::io::read_point_cloud(kWork / "hemi.ply").size(), 1024u);
  EXPECT_EQ(compc::io::read_point_cloud(kWork / "sphere.ply").size(), 4096u);
}

TEST_F(Cli, MissingInputIsBadInput) {
  EXPECT_EQ(run("complete --input does_not_exist.ply --gt sphere.ply").code, 2);
  EXPECT_EQ(run("eval --pred does_not_exist.ply --gt sphere.ply").code, 2);
  EXPECT_EQ(run("synth --mesh does_not_exist.obj --output x.ply").code, 2);
}

TEST_F(Cli, InvalidValuesAreBadInput) {
  EXPECT_EQ(run("synth --mesh builtin:sphere --level 2 --output x.ply").code, 2);
  EXPECT_EQ(run("noise --input hemi.ply --output x.ply --std -1").code, 2);
  EXPECT_EQ(run("complete --input hemi.ply --guidance oracle").code, 2);  // oracle without --gt
}

TEST_F(Cli, UnreachableBridgeIsGuidanceFailure) {
  EXPECT_EQ(run("complete --input hemi.ply --guidance bridge").code, 3)
      << "COMPC_BRIDGE_ADDR must not point at a live server during tests";
}

TEST_F(Cli, PinnedSeedGivesIdenticalPly) {
  const std::string base = std::string("-q complete --input hemi.ply --gt sphere.ply --seed 11 ") + kTiny;
  const Invocation a = run(base + " --output det_a.ply");
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("CDx100"), std::string::npos);
  ASSERT_EQ(run(base + " --output det_b.ply").code, 0);
  ASSERT_EQ(run(std::string("-q complete --input hemi.ply --gt sphere.ply --seed 12 ") + kTiny + " --output det_c.ply").code, 0);
  const std::string a_bytes = slurp(kWork / "det_a.ply");
  EXPECT_FALSE(a_bytes.empty());
  EXPECT_EQ(a_bytes, slurp(kWork / "det_b.ply"));
  EXPECT_NE(a_bytes, slurp(kWork / "det_c.ply"));
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  {
    std::ofstream cfg(kWork / "cfg.toml");
    cfg << "[synth]\nlevel = 3\nresolution = 300\n";
  }
  ASSERT_EQ(run("-q --config cfg.toml synth --mesh builtin:box --output cfg_a.ply").code, 0);
  EXPECT_EQ(compc::io::read_point_cloud(kWork / "cfg_a.ply").size(), 300u);
  ASSERT_EQ(run("-q --config cfg.toml synth --mesh builtin:box --output cfg_b.ply --resolution 200").code, 0);
  EXPECT_EQ(compc::io::read_point_cloud(kWork / "cfg_b.ply").size(), 200u);
}

TEST_F(Cli, NoiseAndEval) {
  ASSERT_EQ(run("-q noise --input hemi.ply --output noisy.ply --std 0 --seed 3").code, 0);
  const Invocation same = run("-q eval --pred noisy.ply --gt hemi.ply --csv row.csv");
  ASSERT_EQ(same.code, 0);
  EXPECT_NE(same.out.find("CDx100 0.0000"), std::string::npos) << same.out;
  EXPECT_EQ(slurp(kWork / "row.csv").rfind("object,seed,cd_x100,emd_x100,tmd,uhd,mmd,seconds\nnoisy,0,0,", 0), 0u);
}

TEST_F(Cli, MeshSubcommandWritesObj) {
  ASSERT_EQ(run("-q mesh --input sphere.ply --output sphere.obj --iterations 150 --grid-resolution 24").code, 0);
  const std::string obj = slurp(kWork / "sphere.obj");
  EXPECT_NE(obj.find("\nf "), std::string::npos);
}
