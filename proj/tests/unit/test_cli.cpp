#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "magmap/data.hpp"
#include "magmap/dski.hpp"
#include "magmap/map_table.hpp"
#include "magmap_cli/commands.hpp"
#include "magmap_cli/render.hpp"

namespace fs = std::filesystem;
using namespace magmap;
using namespace magmap::cli;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("magmap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small exact-sampler data set on a 20 x 20 square.
  std::string small_data(const std::string& name = "data.csv", const std::string& seed = "5") {
    const auto r = invoke({"synth", "--data", path(name), "--seed", seed, "--set", "sim.n_points=300", "--set",
                           "sim.x_min=-10", "--set", "sim.x_max=10", "--set", "sim.y_min=-10", "--set", "sim.y_max=10"});
    EXPECT_EQ(r.code, kOk) << r.err;
    return path(name);
  }

  std::vector<std::string> small_grid() const {
    return {"--set", "grid.nx=16", "--set", "grid.ny=16", "--set", "grid.nz=4", "--set", "lanczos.steps=20"};
  }

  fs::path dir_;
};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(Cli, SynthDefaultEmitsSixThousandRows) {
  const auto r = invoke({"synth", "--data", path("d.csv")});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(data_rows(path("d.csv")), 6000u);
  EXPECT_NE(r.out.find("\"rows\":6000"), std::string::npos);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST_F(Cli, SynthSeedRepeatGivesIdenticalFile) {
  small_data("a.csv", "11");
  small_data("b.csv", "11");
  small_data("c.csv", "12");
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, SynthInvalidBoxNamesField) {
  const auto r = invoke({"synth", "--data", path("d.csv"), "--set", "sim.y_min=3", "--set", "sim.y_max=-3"});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("sim.y_min"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("d.csv")));
}

TEST_F(Cli, FitTwiceGivesIdenticalModelBytes) {
  const auto data = small_data();
  const auto a = invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("a.bin")} + small_grid());
  const auto b = invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("b.bin")} + small_grid());
  ASSERT_EQ(a.code, kOk) << a.err;
  ASSERT_EQ(b.code, kOk) << b.err;
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
  for (const char* key : {"\"J\":", "\"residual\":", "\"T\":", "\"wall_seconds\":"}) {
    EXPECT_NE(a.out.find(key), std::string::npos) << key;
  }
}

TEST_F(Cli, FitPointOutsideGridIsDomainError) {
  const auto data = small_data();
  const auto r = invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("m.bin"), "--set",
                                                 "grid.x_min=-2", "--set", "grid.x_max=2", "--set", "grid.y_min=-2",
                                                 "--set", "grid.y_max=2", "--set", "grid.z_min=-1", "--set",
                                                 "grid.z_max=1"} +
                        small_grid());
  EXPECT_EQ(r.code, kDataError);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, FitNonConvergenceWritesModelAndWarns) {
  const auto data = small_data();
  const auto r = invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("m.bin"), "--set",
                                                 "cg.max_iterations=2"} +
                        small_grid());
  EXPECT_EQ(r.code, kNumericalError);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("m.bin")));
}

TEST_F(Cli, PredictSingleNodeMatchesLibrary) {
  const auto data = small_data();
  ASSERT_EQ(invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("m.bin")} + small_grid()).code, kOk);
  const auto r = invoke({"predict", "--model", path("m.bin"), "--map", path("p.csv"), "--set", "lattice.x_min=1.25",
                         "--set", "lattice.nx=1", "--set", "lattice.y_min=-3.5", "--set", "lattice.ny=1", "--set",
                         "lattice.z_min=0.01", "--set", "lattice.z_max=0.01"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const MapTable table = load_map(path("p.csv"));
  ASSERT_EQ(table.size(), 1);

  const FittedMap map = FittedMap::load(path("m.bin"));
  const Vec3 p(1.25, -3.5, 0.01);
  const Vec3 mean = map.predict_mean(p);
  const VarianceEstimate var = map.predict_variance(p);
  for (int d = 0; d < 3; ++d) {
    EXPECT_DOUBLE_EQ(table.positions(0, d), p[d]);
    EXPECT_DOUBLE_EQ(table.mean(0, d), mean[d]);
    EXPECT_DOUBLE_EQ(table.variance(0, d), var.covariance(d, d));
  }
}

TEST_F(Cli, PredictRowsMatchLatticeAndVariancesNonnegative) {
  const auto data = small_data();
  ASSERT_EQ(invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("m.bin")} + small_grid()).code, kOk);
  const auto r = invoke({"predict", "--model", path("m.bin"), "--map", path("p.csv"), "--set", "lattice.x_min=-8",
                         "--set", "lattice.x_max=8", "--set", "lattice.nx=17", "--set", "lattice.y_min=-6", "--set",
                         "lattice.y_max=6", "--set", "lattice.ny=7", "--set", "lattice.z_min=-0.05", "--set",
                         "lattice.z_max=0.05", "--set", "lattice.nz=3"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(data_rows(path("p.csv")), 17u * 7u * 3u);
  const MapTable table = load_map(path("p.csv"));
  EXPECT_EQ(table.shape, (std::array<int, 3>{17, 7, 3}));
  EXPECT_GE(table.variance.minCoeff(), 0.0);
}

TEST_F(Cli, PredictDefaultLatticeIsSingleSliceAtResolution) {
  const auto data = small_data();
  ASSERT_EQ(invoke(std::vector<std::string>{"fit", "--data", data, "--model", path("m.bin")} + small_grid()).code, kOk);
  const auto r = invoke({"predict", "--model", path("m.bin"), "--map", path("p.csv"), "--set", "lattice.resolution=0.5"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const MapTable table = load_map(path("p.csv"));
  EXPECT_EQ(table.shape[2], 1);
  const FittedMap map = FittedMap::load(path("m.bin"));
  const Interval x = map.grid().interpolable(0);
  EXPECT_EQ(table.shape[0], static_cast<int>(std::floor((x.upper - x.lower) / 0.5 + 1e-9)) + 1);
}

TEST_F(Cli, EvalSingleRepetitionIsDeterministic) {
  const std::vector<std::string> args{"eval",  "--seed", "3",   "--set", "sim.n_points=400", "--set",
                                      "eval.full_half_width=10", "--set", "eval.areas=5,10", "--set",
                                      "eval.settings=10,20", "--set", "eval.repetitions=1"};
  const auto a = invoke(args);
  const auto b = invoke(args);
  ASSERT_EQ(a.code, kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("downsampled"), std::string::npos);
  EXPECT_EQ(a.out.find("# area"), std::string::npos) << a.out;
}

TEST_F(Cli, BenchTableIsWellFormed) {
  const auto r = invoke({"bench", "--set", "bench.n0=400", "--set", "bench.multiples=1,2", "--set",
                         "bench.counts=20,8,4", "--set", "lanczos.steps=5"});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int rows = 0;
  bool json_seen = false;
  while (std::getline(lines, line)) {
    if (line.rfind("{", 0) == 0) {
      json_seen = true;
      EXPECT_NE(line.find("\"n\":800"), std::string::npos);
    } else if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) {
      ++rows;
    }
  }
  EXPECT_EQ(rows, 2);
  EXPECT_TRUE(json_seen);
}

TEST_F(Cli, BenchInfeasibleGridIsCleanError) {
  const auto r = invoke({"bench", "--set", "bench.n0=100", "--set", "bench.counts=3,3,3"});
  EXPECT_NE(r.code, kOk);
  EXPECT_FALSE(r.err.empty());
  EXPECT_TRUE(r.out.empty());
}

namespace {

MapTable crafted_table(int nx, int ny, int nz) {
  Lattice lat;
  lat.axes = {LatticeAxis{0.0, 1.0, nx}, LatticeAxis{0.0, 2.0, ny}, LatticeAxis{0.0, 0.5, nz}};
  MapTable t;
  t.shape = {nx, ny, nz};
  const Eigen::Index n = lat.size();
  t.positions.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) t.positions.row(i) = lat.node(i).transpose();
  t.mean = Points::Constant(n, 3, 0.5);
  t.variance = Points::Constant(n, 3, 0.25);
  t.magnitude = t.mean.rowwise().norm();
  return t;
}

}  // namespace

TEST_F(Cli, RenderConstantTableIsUniform) {
  save_map(crafted_table(5, 3, 1), path("t.csv"));
  const auto r = invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm"), "--certainty", path("c.pgm")});
  ASSERT_EQ(r.code, kOk) << r.err;
  const Image img = read_pgm(path("m.pgm"));
  EXPECT_EQ(img.width, 5);
  EXPECT_EQ(img.height, 3);
  for (unsigned char px : img.pixels) EXPECT_EQ(px, img.pixels.front());
  const Image cert = read_pgm(path("c.pgm"));
  for (unsigned char px : cert.pixels) EXPECT_EQ(px, 255);
}

TEST_F(Cli, RenderDarkerMeansStronger) {
  MapTable t = crafted_table(2, 1, 1);
  t.mean.row(1) *= 3.0;
  t.magnitude = t.mean.rowwise().norm();
  save_map(t, path("t.csv"));
  ASSERT_EQ(invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm")}).code, kOk);
  const Image img = read_pgm(path("m.pgm"));
  EXPECT_EQ(img.at(0, 0), 255);
  EXPECT_EQ(img.at(1, 0), 0);
}

TEST_F(Cli, RenderCertaintyOnTwoNodeTable) {
  // Node 0 fully determined, node 1 at the prior level.
  MapTable t = crafted_table(2, 1, 1);
  t.variance.row(0).setZero();
  t.variance.row(1).setConstant(1.0);
  save_map(t, path("t.csv"));
  ASSERT_EQ(invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm"), "--certainty", path("c.pgm")}).code,
            kOk);
  const Image cert = read_pgm(path("c.pgm"));
  ASSERT_EQ(cert.pixels.size(), 2u);
  EXPECT_EQ(cert.at(0, 0), 255);
  EXPECT_EQ(cert.at(1, 0), 0);
}

TEST_F(Cli, RenderImageRowsRunTopDown) {
  MapTable t = crafted_table(1, 2, 1);
  t.mean.row(1) *= 2.0;  // y = 2, drawn on the top row
  t.magnitude = t.mean.rowwise().norm();
  save_map(t, path("t.csv"));
  ASSERT_EQ(invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm")}).code, kOk);
  const Image img = read_pgm(path("m.pgm"));
  EXPECT_EQ(img.at(0, 0), 0);
  EXPECT_EQ(img.at(0, 1), 255);
}

TEST_F(Cli, RenderThreeDimensionalTableNeedsSlice) {
  save_map(crafted_table(3, 3, 2), path("t.csv"));
  const auto r = invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm")});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("--z-index"), std::string::npos);
  EXPECT_EQ(invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm"), "--z-index", "1"}).code, kOk);
  EXPECT_EQ(invoke({"render", "--map", path("t.csv"), "--image", path("m.pgm"), "--z-index", "2"}).code, kConfigError);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(invoke({"synth", "--data", path("d.csv"), "--set", "no.such.key=1"}).code, kConfigError);
  EXPECT_EQ(invoke({"synth", "--data", path("d.csv"), "--set", "hyp.length_scale=-1"}).code, kConfigError);
  EXPECT_EQ(invoke({"synth", "--data", path("d.csv"), "--set", "sim.n_points=many"}).code, kConfigError);
  EXPECT_EQ(invoke({"synth", "--data", path("d.csv"), "--set", "sim.sampler=magic"}).code, kConfigError);
  EXPECT_EQ(invoke({"synth", "--data", path("d.csv"), "--config", path("missing.cfg")}).code, kConfigError);
  EXPECT_EQ(invoke({"fit", "--data", path("d.csv")}).code, kConfigError);  // no --model
  EXPECT_EQ(invoke({"frobnicate"}).code, kConfigError);
  EXPECT_EQ(invoke({}).code, kConfigError);
}

TEST_F(Cli, ConfigFileThenFlagsOverride) {
  {
    std::ofstream cfg(path("run.cfg"));
    cfg << "# small run\nsim.n_points = 50\nseed = 9\nsim.sampler = exact\n";
  }
  ASSERT_EQ(invoke({"synth", "--config", path("run.cfg"), "--data", path("a.csv")}).code, kOk);
  EXPECT_EQ(data_rows(path("a.csv")), 50u);
  ASSERT_EQ(invoke({"synth", "--config", path("run.cfg"), "--data", path("b.csv"), "--set", "sim.n_points=70"}).code,
            kOk);
  EXPECT_EQ(data_rows(path("b.csv")), 70u);
  ASSERT_EQ(invoke({"synth", "--config", path("run.cfg"), "--set", "seed=1", "--seed", "9", "--data", path("c.csv"),
                    "--set", "sim.n_points=50"})
                .code,
            kOk);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, DataErrorsExitThree) {
  {
    std::ofstream bad(path("bad.csv"));
    bad << "x,y,z,Bx,By,Bz\n1,2,3,4,5\n";
  }
  const auto r = invoke({"fit", "--data", path("bad.csv"), "--model", path("m.bin")});
  EXPECT_EQ(r.code, kDataError);
  EXPECT_NE(r.err.find("bad.csv:2"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"fit", "--data", path("absent.csv"), "--model", path("m.bin")}).code, kDataError);
  {
    std::ofstream junk(path("junk.bin"));
    junk << "not a model";
  }
  EXPECT_EQ(invoke({"predict", "--model", path("junk.bin"), "--map", path("p.csv")}).code, kDataError);
}

TEST_F(Cli, ExecutableReportsExitCodes) {
  const std::string exe = MAGMAP_EXE;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("synth --data " + path("d.csv") + " --set sim.n_points=20"), kOk);
  EXPECT_EQ(status("synth --data " + path("d.csv") + " --set sim.x_min=30"), kConfigError);
  EXPECT_EQ(status("fit --data " + path("none.csv") + " --model " + path("m.bin")), kDataError);
  EXPECT_EQ(status("fit --data " + path("d.csv") + " --model " + path("m.bin") + " --set cg.max_iterations=1"),
            kNumericalError);
}
