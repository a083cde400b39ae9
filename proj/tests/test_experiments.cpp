#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cutmg/experiments.hpp"

using namespace cutmg;

namespace {

double cell(const std::string& s) { return std::stod(s); }

struct RunOutput {
  int status = -1;
  std::string out;
};

RunOutput run_cli(const std::string& args) {
  const std::string cmd = std::string(CUTMG_CLI_PATH) + " " + args + " 2>&1";
  RunOutput r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[512];
  while (fgets(buf, sizeof buf, p)) r.out += buf;
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cutmg_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string csv_string(const Table& t) {
  std::ostringstream os;
  write_csv(t, os);
  return os.str();
}

}  // namespace

TEST(Config, DefaultsMatchReferenceSetup) {
  const ExperimentConfig c;
  EXPECT_EQ(c.dim, 2);
  EXPECT_EQ(c.n0, 4);
  EXPECT_EQ(c.interface, InterfaceKind::Spherical);
  EXPECT_DOUBLE_EQ(c.x_gamma, 1.321);
  EXPECT_DOUBLE_EQ(c.radius, 0.413);
  EXPECT_DOUBLE_EQ(c.center[0], 1.03);
  EXPECT_DOUBLE_EQ(c.center[1], 1.02);
  EXPECT_DOUBLE_EQ(c.center[2], 1.01);
  EXPECT_EQ(c.mg.pre_smooth, 2);
  EXPECT_EQ(c.mg.post_smooth, 2);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesSectionsCommentsAndOverrides) {
  std::istringstream in(R"(
# experiment
[problem]
dim = 2
levels = 3        ; finest level
interface = planar
center = 1.0, 0.5
iso_p2 = off

[discretization]
method = mu-nitsche
mu1 = 1e-5
lambda_N = 20
[solver]
smoother = gs-ic
gamma_solver = cholesky
coarse_matrix = galerkin
max_iter = 40
[sweep]
sweep = delta
values = 0, 0.1,0.25
levels = 4
)");
  const auto c = parse_config(in);
  EXPECT_EQ(c.levels, 4);  // later key wins
  EXPECT_EQ(c.interface, InterfaceKind::Planar);
  EXPECT_DOUBLE_EQ(c.center[0], 1.0);
  EXPECT_DOUBLE_EQ(c.center[1], 0.5);
  EXPECT_DOUBLE_EQ(c.center[2], 1.01);
  EXPECT_FALSE(c.iso_p2);
  EXPECT_EQ(c.disc.method, Method::MuNitsche);
  EXPECT_DOUBLE_EQ(c.disc.mu1, 1e-5);
  EXPECT_DOUBLE_EQ(c.disc.lambda_N, 20.0);
  EXPECT_EQ(c.mg.smoother, Smoother::GSIC);
  EXPECT_EQ(c.mg.gamma_solver, GammaSolverKind::Cholesky);
  EXPECT_EQ(c.mg.coarse_mode, CoarseMatrixMode::Galerkin);
  EXPECT_EQ(c.mg.max_iter, 40);
  EXPECT_EQ(c.sweep, SweepParam::Delta);
  EXPECT_EQ(c.sweep_points(), (std::vector<double>{0.0, 0.1, 0.25}));
}

TEST(Config, RejectsBadInput) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_config(in);
  };
  EXPECT_THROW(parse("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse("levels = two\n"), ConfigError);
  EXPECT_THROW(parse("levels = 2.5\n"), ConfigError);
  EXPECT_THROW(parse("mu1\n"), ConfigError);
  EXPECT_THROW(parse("[problem\n"), ConfigError);
  EXPECT_THROW(parse("iso_p2 = maybe\n"), ConfigError);
  EXPECT_THROW(parse("values = 1,,2\n"), ConfigError);
  EXPECT_THROW(parse("method = galerkin\n"), ConfigError);
  try {
    parse("\n\nmu1 = x\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
  EXPECT_THROW(load_config("/nonexistent/cutmg.cfg"), ConfigError);

  ExperimentConfig c;
  c.levels = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.disc.mu1 = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.dim = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, EveryKeyIsSettable) {
  for (const auto& key : config_keys()) {
    ExperimentConfig c;
    std::string v = "1";
    if (key == "interface") v = "planar";
    else if (key == "center" || key == "values") v = "1,1";
    else if (key == "rhs") v = "xy";
    else if (key == "method") v = "p-nitsche";
    else if (key == "smoother") v = "gsic";
    else if (key == "gamma_solver") v = "pcg";
    else if (key == "coarse_matrix") v = "direct";
    else if (key == "sweep") v = "mu1";
    else if (key == "lanczos_steps") v = "10";
    EXPECT_NO_THROW(set_config_value(c, key, v)) << key;
  }
}

TEST(Config, SweepValuesAndGeometryShift) {
  ExperimentConfig c;
  c.sweep = SweepParam::LambdaN;
  EXPECT_EQ(c.sweep_points(), (std::vector<double>{1, 10, 20, 100, 1000}));
  c.sweep = SweepParam::None;
  EXPECT_EQ(c.sweep_points().size(), 1u);  // one column, nothing swept
  const auto shifted = c.with(SweepParam::Delta, 0.2);
  const auto phi = shifted.level_set<2>();
  EXPECT_NEAR(phi.value(Point<2>{1.23, 1.22}), -0.413 * 0.413, 1e-14);
  EXPECT_DOUBLE_EQ(c.with(SweepParam::Mu1, 0.3).disc.mu1, 0.3);
}

// -mu_i Laplace(u*) = f on each side, u* continuous and mu grad u * n continuous on the circle.
TEST(Manufactured, SolutionSatisfiesInterfaceProblem) {
  ExperimentConfig c;
  c.disc.mu1 = 0.01;
  c.disc.mu2 = 1.0;
  const auto u = manufactured_solution<2>(c);
  const auto f = manufactured_rhs<2>(c);
  const double h = 1e-3;
  for (Side s : {Side::Negative, Side::Positive}) {
    const Point<2> x{0.7, 1.4};
    const double lap = (u({x[0] + h, x[1]}, s) + u({x[0] - h, x[1]}, s) + u({x[0], x[1] + h}, s) +
                        u({x[0], x[1] - h}, s) - 4 * u(x, s)) / (h * h);
    EXPECT_NEAR(-c.disc.mu(s) * lap, f(x, s), 1e-8);
  }
  for (double th = 0.0; th < 6.28; th += 0.7) {
    const Point<2> p{1.03 + 0.413 * std::cos(th), 1.02 + 0.413 * std::sin(th)};
    EXPECT_NEAR(u(p, Side::Negative), 0.0, 1e-14);
    EXPECT_NEAR(u(p, Side::Positive), 0.0, 1e-14);
    const Point<2> n{std::cos(th), std::sin(th)};
    auto flux = [&](Side s) {
      const Point<2> a{p[0] + h * n[0], p[1] + h * n[1]}, b{p[0] - h * n[0], p[1] - h * n[1]};
      return c.disc.mu(s) * (u(a, s) - u(b, s)) / (2 * h);
    };
    EXPECT_NEAR(flux(Side::Negative), flux(Side::Positive), 1e-9);
  }
}

TEST(Tables, FormattingConventions) {
  EXPECT_EQ(format_sci(1.2345e-3), "1.23E-03");
  EXPECT_EQ(format_sci(0.0), "0.00E+00");
  ExperimentConfig c;
  c.levels = 2;
  const auto r = run_convergence(c);
  const Table t = r.table();
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"level", "dofs", "error", "eoc"}));
  EXPECT_EQ(t.rows[0][3], "");  // no predecessor
  EXPECT_FALSE(t.rows[1][3].empty());
  EXPECT_NE(t.rows[0][2].find('E'), std::string::npos);
}

TEST(Tables, EmptyResultGivesHeaderOnlyCsv) {
  MgTableResult r;
  r.sweep = SweepParam::Mu1;
  r.values = {0.5, 0.1};
  EXPECT_EQ(csv_string(r.table()), "level,mu1=0.5,mu1=0.1\n");
  DiagnosticsResult d;
  const std::string s = csv_string(d.table());
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1);
}

TEST(Tables, CsvRoundTripReproducesNumbers) {
  ExperimentConfig c;
  c.levels = 2;
  c.disc.method = Method::PNitsche;
  const auto conv = run_convergence(c);
  const auto dir = scratch("roundtrip");
  const auto path = write_csv(conv.table(), dir);
  const Table back = read_csv(path);
  EXPECT_EQ(back.header, conv.table().header);
  ASSERT_EQ(back.rows.size(), conv.rows.size());
  for (std::size_t k = 0; k < conv.rows.size(); ++k) {
    EXPECT_EQ(std::stoi(back.rows[k][0]), conv.rows[k].level);
    EXPECT_EQ(std::stoi(back.rows[k][1]), conv.rows[k].dofs);
    EXPECT_NEAR(cell(back.rows[k][2]), conv.rows[k].error, 5e-3 * conv.rows[k].error);  // 3 significant digits
    if (k > 0) {
      EXPECT_NEAR(cell(back.rows[k][3]), conv.rows[k].eoc, 5e-3);
    }
  }

  c.sweep = SweepParam::Mu1;
  c.sweep_values = {0.9, 0.5};
  const auto mg = run_mg_table(c);
  const Table t2 = read_csv(write_csv(mg.table(), dir, "x"));
  ASSERT_EQ(t2.rows.size(), mg.levels.size());
  for (std::size_t i = 0; i < mg.levels.size(); ++i)
    for (std::size_t j = 0; j < mg.values.size(); ++j) EXPECT_EQ(std::stoi(t2.rows[i][1 + j]), mg.cells[i][j].iterations);
  std::filesystem::remove_all(dir);
}

TEST(Tables, WriteFailureNamesThePath) {
  const auto dir = scratch("blocked");
  std::filesystem::create_directories(dir);
  { std::ofstream(dir / "file") << "x"; }
  Table t;
  t.name = "t";
  t.header = {"a"};
  try {
    write_csv(t, dir / "file" / "sub");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find((dir / "file").string()), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Experiments, TableShapesFollowSweep) {
  ExperimentConfig c;
  c.levels = 3;
  c.min_level = 2;
  c.disc.method = Method::PNitsche;
  c.sweep = SweepParam::Delta;
  c.sweep_values = {0.0, 0.1, 0.2};
  const auto r = run_mg_table(c);
  const Table t = r.table();
  EXPECT_EQ(t.rows.size(), 2u);
  for (const auto& row : t.rows) EXPECT_EQ(row.size(), 4u);
  EXPECT_EQ(t.rows[0][0], "2");

  c.mg.smoother = Smoother::GSIC;
  c.mg.gamma_solver = GammaSolverKind::PCG;
  const Table t2 = run_mg_table(c).table();
  EXPECT_EQ(t2.header.size(), 7u);  // iteration and inner-CG column per value
}

TEST(Experiments, RerunsAreByteIdentical) {
  ExperimentConfig c;
  c.levels = 3;
  c.disc.method = Method::MuNitsche;
  c.disc.mu1 = 1e-3;
  c.mg.smoother = Smoother::GSIC;
  c.sweep = SweepParam::Mu1;
  c.sweep_values = {0.5, 1e-3};
  EXPECT_EQ(csv_string(run_mg_table(c).table()), csv_string(run_mg_table(c).table()));
  EXPECT_EQ(csv_string(run_convergence(c).table()), csv_string(run_convergence(c).table()));
  c.lanczos_steps = 80;
  EXPECT_EQ(csv_string(run_diagnostics(c).table()), csv_string(run_diagnostics(c).table()));
}

TEST(Experiments, ConvergenceNeedsSphericalInterface) {
  ExperimentConfig c;
  c.interface = InterfaceKind::Planar;
  EXPECT_THROW(run_convergence(c), ConfigError);
}

TEST(Experiments, SolveReportsErrorAndResidual) {
  ExperimentConfig c;
  c.levels = 3;
  c.disc.method = Method::PNitsche;
  const auto r = run_solve(c);
  EXPECT_TRUE(r.mg.converged);
  EXPECT_LE(r.mg.relative_residual, 1e-8);
  // the multigrid solution matches the direct one to solver tolerance
  const auto conv = run_convergence(c);
  EXPECT_NEAR(r.l2_error, conv.rows.back().error, 1e-3 * conv.rows.back().error);
}

TEST(Cli, DivergenceExitCodeAndMarker) {
  const auto r = run_cli("mg-table --interface planar --method nitsche --mu1 0.5 --lambda_N 1 --levels 2 --min_level 2");
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("div"), std::string::npos);
}

TEST(Cli, IterationCapTerminates) {
  const auto r = run_cli("solve --method mu-nitsche --lambda_N 1 --mu1 1e-5 --levels 2 --max_iter 3");
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("div"), std::string::npos);
}

TEST(Cli, ConfigurationErrors) {
  EXPECT_EQ(run_cli("solve --mu1 -3").status, 1);
  EXPECT_EQ(run_cli("solve --levels zero").status, 1);
  EXPECT_EQ(run_cli("solve --config /nonexistent/file.cfg").status, 1);
  EXPECT_EQ(run_cli("frobnicate").status, 1);
  EXPECT_EQ(run_cli("").status, 1);
  EXPECT_EQ(run_cli("convergence --interface planar").status, 1);
}

TEST(Cli, ConfigFileFlagsAndCsvOutput) {
  const auto dir = scratch("cli");
  std::filesystem::create_directories(dir);
  { std::ofstream(dir / "run.cfg") << "[problem]\nlevels = 2\n[discretization]\nmethod = p-nitsche\nmu1 = 0.5\n"; }
  const auto r = run_cli("mg-table --config " + (dir / "run.cfg").string() + " --levels 3 --sweep delta --values 0,0.1 --output " +
                         (dir / "out").string() + " --name t");
  EXPECT_EQ(r.status, 0) << r.out;
  const Table t = read_csv(dir / "out" / "t_mg_table.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"level", "delta=0", "delta=0.1"}));
  EXPECT_EQ(t.rows.size(), 3u);  // flag overrides the file's levels
  const auto help = run_cli("--help");
  EXPECT_EQ(help.status, 0);
  std::filesystem::remove_all(dir);
}
