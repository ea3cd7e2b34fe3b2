#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>
#include <spca/spca.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;
using Catch::Matchers::WithinAbs;

namespace {

// The binary under test; the build passes its location through the macro.
const char* cli_path() { return SPCA_CLI_PATH; }

int run(const std::string& args) {
  // parse errors go to stderr by design; keep them out of the test log
  const std::string cmd = std::string(cli_path()) + " " + args + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

json read_json(const std::string& path) { return json::parse(slurp(path)); }

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(run("--help > cli_tests_help.txt") == 0);
  const std::string help = slurp("cli_tests_help.txt");
  CHECK(help.find("amp") != std::string::npos);
  CHECK(help.find("transitions") != std::string::npos);

  CHECK(run("") == 2);                               // a subcommand is required
  CHECK(run("amp --no-such-flag") == 2);             // unknown option
  CHECK(run("se --family gb --rho 0.1") == 2);       // missing required --delta
  CHECK(run("se --family no_such --delta 0.01") == 2);
  CHECK(run("amp --delta -0.5 --n 100") == 2);       // invalid parameter value
  CHECK(run("se --family gb --rho 0.1 --delta 0.005 --tol 0 ") == 2);
  std::remove("cli_tests_help.txt");
}

TEST_CASE("asymptotic fixed point through the command line") {
  REQUIRE(run("se --family gb --rho 0.1 --delta 0.005 --init uninformative "
              "-o cli_tests_se.json") == 0);
  const json j = read_json("cli_tests_se.json");
  CHECK(j["prior"] == "gb");
  CHECK(j["rho"] == 0.1);
  CHECK(j["r"] == 1);
  CHECK(j["init"] == "uninformative");
  CHECK(j["converged"] == true);
  CHECK_THAT(j["q_star"].get<double>(), WithinAbs(0.088356896821, 1e-8));
  CHECK_THAT(j["mse"].get<double>(), WithinAbs(0.1 - 0.088356896821, 1e-8));
  CHECK_THAT(j["phi"].get<double>(), WithinAbs(0.203682059583, 1e-8));
  CHECK(j["q_trajectory"].is_array());
  CHECK(!j["q_trajectory"].empty());
  std::remove("cli_tests_se.json");

  // both inits in one call produce a two-record array
  REQUIRE(run("se --family gb --rho 0.1 --delta 0.012 -o cli_tests_se2.json") == 0);
  const json both = read_json("cli_tests_se2.json");
  REQUIRE(both.is_array());
  REQUIRE(both.size() == 2);
  CHECK(both[0]["init"] == "uninformative");
  CHECK(both[1]["init"] == "informative");
  CHECK_THAT(both[1]["q_star"].get<double>(), WithinAbs(0.063620898278, 1e-8));
  std::remove("cli_tests_se2.json");

  // csv format carries the same numbers behind a fixed header
  REQUIRE(run("se --family gb --rho 0.1 --delta 0.005 --init uninformative --format csv "
              "-o cli_tests_se.csv") == 0);
  const std::string csv = slurp("cli_tests_se.csv");
  CHECK(csv.rfind("prior,rho,r,delta,init,q_star,mse,phi,iterations,converged\n", 0) == 0);
  CHECK(csv.find("gb,") != std::string::npos);
  CHECK(csv.find(",true\n") != std::string::npos);
  std::remove("cli_tests_se.csv");
}

TEST_CASE("finite instance run, snapshot and reload") {
  // deep in the easy phase so the from-scratch escape is robust at this size
  REQUIRE(run("amp --family gb --rho 0.1 --n 1000 --delta 0.004 --seed 3 "
              "--init uninformative -o cli_tests_amp.json") == 0);
  const json j = read_json("cli_tests_amp.json");
  CHECK(j["n"] == 1000);
  CHECK(j["seed"] == 3);
  CHECK(j["converged"] == true);
  CHECK(j["iterations"].get<int>() > 0);
  CHECK(j["mse"].get<double>() < 0.06);  // recovered the signal

  // snapshot, then rerun from the file: the informative start is a pure
  // function of the stored instance, so the reload must reproduce the run
  // bit for bit even though the seed itself is not stored
  REQUIRE(run("amp --family gb --rho 0.1 --n 1000 --delta 0.004 --seed 3 "
              "--init informative --dump cli_tests_inst.bin -o cli_tests_amp2.json") == 0);
  const json a = read_json("cli_tests_amp2.json");
  REQUIRE(run("amp --family gb --rho 0.1 --load cli_tests_inst.bin "
              "--init informative -o cli_tests_amp3.json") == 0);
  const json b = read_json("cli_tests_amp3.json");
  CHECK(b["seed"] == 0);
  CHECK(b["mse"] == a["mse"]);
  CHECK(b["phi"] == a["phi"]);
  CHECK(b["iterations"] == a["iterations"]);

  std::remove("cli_tests_inst.bin");
  std::remove("cli_tests_amp.json");
  std::remove("cli_tests_amp2.json");
  std::remove("cli_tests_amp3.json");
}

TEST_CASE("critical lines through the command line") {
  REQUIRE(run("transitions --family gb --rho 0.1 --tol 1e-4 -o cli_tests_tr.json") == 0);
  const json j = read_json("cli_tests_tr.json");
  CHECK(j["order"] == "first_order");
  CHECK_THAT(j["delta_amp"].get<double>(), WithinAbs(0.0100, 5e-4));
  CHECK_THAT(j["delta_c"].get<double>(), WithinAbs(0.0153255, 5e-4));
  CHECK_THAT(j["delta_2nd"].get<double>(), WithinAbs(0.0160169, 5e-4));
  std::remove("cli_tests_tr.json");

  REQUIRE(run("transitions --family gb --along rho --delta 0.012 --bracket 0.05:0.2 "
              "--tol 1e-4 -o cli_tests_trr.json") == 0);
  const json k = read_json("cli_tests_trr.json");
  CHECK(k["order"] == "first_order");
  CHECK_THAT(k["rho_u"].get<double>(), WithinAbs(std::sqrt(0.012), 1e-10));
  CHECK_THAT(k["rho_amp"].get<double>(), WithinAbs(0.1095413, 1e-3));
  std::remove("cli_tests_trr.json");
}

TEST_CASE("grid scan: determinism, resume, plot script") {
  const char* grid = "--family gb --rank 1 --rho-grid 0.05:0.1:3 --delta-grid 0.004:0.02:4";

  REQUIRE(run(std::string(grid) + " scan -o cli_tests_scan1.csv --threads 1") == 2);
  // (flags must follow the subcommand)
  REQUIRE(run("scan " + std::string(grid) + " -o cli_tests_scan1.csv --threads 1") == 0);
  REQUIRE(run("scan " + std::string(grid) + " -o cli_tests_scan2.csv --threads 2") == 0);

  const std::string one = slurp("cli_tests_scan1.csv");
  CHECK(one == slurp("cli_tests_scan2.csv"));  // byte-identical at any thread count

  std::vector<std::string> lines;
  {
    std::istringstream is(one);
    for (std::string l; std::getline(is, l);) lines.push_back(l);
  }
  REQUIRE(lines.size() == 13);  // header + 3 x 4 grid
  CHECK(lines[0] ==
        "family,rho,delta,r,q_uninf,q_inf,mse_uninf,mse_inf,phi_uninf,phi_inf,"
        "phase_label,iters_uninf,iters_inf");

  // truncate the last two rows; --resume recomputes only what is missing
  {
    std::ofstream f("cli_tests_scan2.csv", std::ios::trunc);
    for (std::size_t i = 0; i + 2 < lines.size(); ++i) f << lines[i] << '\n';
  }
  REQUIRE(run("scan " + std::string(grid) + " -o cli_tests_scan2.csv --threads 1 --resume") ==
          0);
  CHECK(slurp("cli_tests_scan2.csv") == one);

  REQUIRE(run("scan " + std::string(grid) + " -o cli_tests_scan1.csv --threads 1 --plot") ==
          0);
  const std::string gp = slurp("cli_tests_scan1.csv.gp");
  CHECK(gp.find("gnuplot") != std::string::npos);
  CHECK(gp.find("cli_tests_scan1.csv") != std::string::npos);

  std::remove("cli_tests_scan1.csv");
  std::remove("cli_tests_scan1.csv.gp");
  std::remove("cli_tests_scan2.csv");
}
