#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dasf/cli.hpp"
#include "support.hpp"

using namespace dasf;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dasf_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt_name(const std::string& prefix, const std::string& part) {
  return prefix + "_" + part + ".csv";
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("help on every subcommand") {
  for (const char* sub :
       {"constants-check", "leaf", "canopy", "estimate", "calibrate", "sweep", "validate-measured"}) {
    CAPTURE(sub);
    const auto r = run({sub, "--help"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("--") != std::string::npos);
  }
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"frobnicate"}).code == cli::kExitInput);
}

TEST_CASE("constants-check") {
  const auto r = run({"constants-check"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("2101 rows") != std::string::npos);
  const auto missing = run({"--constants", "/nonexistent/k.csv", "constants-check"});
  CHECK(missing.code == cli::kExitInput);
  CHECK(missing.err.find("/nonexistent/k.csv") != std::string::npos);
}

TEST_CASE("leaf") {
  const auto dir = scratch("leaf");
  auto r = run({"leaf", "--reference", "--out-dir", dir.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(count_lines(dir / "reference_albedo.csv") == 2102);
  r = run({"leaf", "--cab", "16", "--ewt", "0.005", "--lma", "0.002", "--out-dir", dir.string(),
           "--prefix", "same"});
  REQUIRE(r.code == cli::kExitOk);
  for (const char* part : {"reflectance", "transmittance", "albedo"})
    CHECK(test::slurp(dir / fmt_name("reference", part)) == test::slurp(dir / fmt_name("same", part)));

  r = run({"--constants", "/nonexistent/k.csv", "leaf", "--reference", "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find("/nonexistent/k.csv") != std::string::npos);
  CHECK(run({"leaf", "--cab", "-3", "--out-dir", dir.string()}).code == cli::kExitInput);
}

TEST_CASE("canopy") {
  const auto dir = scratch("canopy");
  const auto out = (dir / "brf.csv").string();
  auto r = run({"canopy", "--cab", "40", "--lai", "3", "--lidf", "erectophile", "--out", out});
  REQUIRE(r.code == cli::kExitOk);
  const auto brf = read_spectrum_csv(fs::path(out));
  CHECK(brf.size() == 2101);
  CHECK(brf.at(800) > 0.0);

  std::ofstream(dir / "canopy.json") << R"({"lai": 3, "lidf": "erectophile", "hotspot": 0.01,
                                           "sza_deg": 30, "vza_deg": 0, "raa_deg": 0, "soil": "black"})";
  const auto out2 = (dir / "brf2.csv").string();
  r = run({"canopy", "--cab", "40", "--canopy", (dir / "canopy.json").string(), "--out", out2});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(test::slurp(out) == test::slurp(out2));

  CHECK(run({"canopy", "--lai", "0", "--out", out}).code == cli::kExitInput);
  CHECK(run({"canopy", "--lidf", "columnar", "--out", out}).code == cli::kExitInput);
}

TEST_CASE("estimate") {
  const auto dir = scratch("estimate");
  const auto& w_r = test::reference();
  const auto brf = si_forward_brf({0.4, 0.6}, w_r);
  write_spectrum_csv(dir / "brf.csv", brf);
  write_spectrum_csv(dir / "albedo.csv", w_r);

  auto r = run({"estimate", (dir / "brf.csv").string(), "--method", "sdasf"});
  REQUIRE(r.code == cli::kExitOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["dasf"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(j["method"] == "sdasf");
  for (const char* key : {"k", "b", "r2", "dc"}) CHECK(j.contains(key));

  r = run({"estimate", (dir / "brf.csv").string(), "--method", "idasf"});
  REQUIRE(r.code == cli::kExitOk);
  j = nlohmann::json::parse(r.out);
  CHECK(j["dc_coefficients"]["c1"].get<double>() == 9.3894);
  CHECK(j["dc_coefficients"]["c4"].get<double>() == -0.0227);

  r = run({"estimate", (dir / "brf.csv").string(), "--method", "all", "--true-albedo",
           (dir / "albedo.csv").string()});
  REQUIRE(r.code == cli::kExitOk);
  j = nlohmann::json::parse(r.out);
  REQUIRE(j["estimates"].size() == 3);
  CHECK(j["estimates"][2]["dasf"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  std::ofstream short_csv(dir / "short.csv");
  write_spectrum_csv(short_csv, slice_band(brf, {400, 1000}));
  short_csv.close();
  CHECK(run({"estimate", (dir / "short.csv").string(), "--method", "idasf"}).code == cli::kExitInput);
  CHECK(run({"estimate", (dir / "short.csv").string(), "--method", "sdasf"}).code == cli::kExitOk);

  r = run({"estimate", (dir / "brf.csv").string(), "--method", "idasf", "--dc-coeffs",
           R"({"c1": 0, "c2": 0, "c3": 0, "c4": 5})"});
  CHECK(r.code == cli::kExitNumerical);
  j = nlohmann::json::parse(r.out);
  CHECK(j.contains("error"));
  CHECK(j["sdasf"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(run({"estimate", (dir / "brf.csv").string(), "--method", "dasf0"}).code == cli::kExitInput);
  CHECK(run({"estimate", (dir / "brf.csv").string(), "--window", "790:710"}).code == cli::kExitInput);
  CHECK(run({"estimate", (dir / "missing.csv").string()}).code == cli::kExitInput);
}

TEST_CASE("calibrate is reproducible") {
  const auto a = scratch("calibrate_a"), b = scratch("calibrate_b");
  auto r = run({"calibrate", "--n", "200", "--seed", "7", "--out-dir", a.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("retained") != std::string::npos);
  r = run({"calibrate", "--n", "200", "--seed", "7", "--out-dir", b.string(), "--threads", "1"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(test::slurp(a / "training.csv") == test::slurp(b / "training.csv"));
  CHECK(test::slurp(a / "dc_fit.json") == test::slurp(b / "dc_fit.json"));
  const auto fit = test::read_json(a / "dc_fit.json");
  CHECK(fit["published"]["c1"].get<double>() == 9.3894);
  CHECK(fit["report"].contains("r2"));

  CHECK(run({"calibrate", "--n", "0", "--out-dir", a.string()}).code == cli::kExitInput);
}

TEST_CASE("config file supplies defaults that flags override") {
  const auto dir = scratch("config");
  std::ofstream(dir / "config.json") << R"({"n": 150, "seed": 3, "output_dir": ")" << (dir / "fromfile").string()
                                     << R"("})";
  auto r = run({"--config", (dir / "config.json").string(), "calibrate"});
  CAPTURE(r.err);
  REQUIRE(r.code == cli::kExitOk);
  CHECK(fs::exists(dir / "fromfile" / "training.csv"));
  r = run({"--config", (dir / "config.json").string(), "calibrate", "--out-dir", (dir / "flag").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(test::slurp(dir / "fromfile" / "training.csv") == test::slurp(dir / "flag" / "training.csv"));
  CHECK(run({"--config", (dir / "nope.json").string(), "calibrate"}).code == cli::kExitInput);
}

TEST_CASE("sweep") {
  const auto dir = scratch("sweep");
  auto r = run({"sweep", "--axis", "lai", "--n", "150", "--subset", "60", "--out-dir", dir.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("lai: mean rRMSE") != std::string::npos);
  // Header plus DASF0, sDASF and iDASF rows for each of the seven LAI values.
  CHECK(count_lines(dir / "sweep.csv") == 1 + 3 * 7);
  const auto plot = test::read_json(dir / "sweep_plot.json");
  CHECK(plot["configurations"].size() == 7);

  r = run({"sweep", "--axis", "vza", "--n", "100", "--subset", "20", "--out-dir", dir.string(),
           "--dc-coeffs", R"({"c1": 0, "c2": 0, "c3": 0, "c4": 5})"});
  CHECK(r.code == cli::kExitPartial);
  CHECK(r.out.find("failed") != std::string::npos);
  CHECK(run({"sweep", "--axis", "sza", "--out-dir", dir.string()}).code == cli::kExitInput);
}

TEST_CASE("validate-measured") {
  const auto dir = scratch("measured");
  const auto fx = test::write_fixture_library(dir / "lib");
  const auto r = run({"validate-measured", "--spectra", fx.spectra.string(), "--leaf", fx.leaf.string(),
                      "--out-dir", (dir / "out").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("pine: MAE") != std::string::npos);
  CHECK(r.out.find("oak: MAE") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "observations.csv"));
  const auto rep = test::read_json(dir / "out" / "measured_report.json");
  CHECK(rep["angle_map"].size() == 3 * 54);
  CHECK(run({"validate-measured", "--spectra", fx.spectra.string(), "--out-dir", dir.string()}).code ==
        cli::kExitInput);
}
