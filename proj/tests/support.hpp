#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dasf/calibration.hpp"
#include "dasf/canopy.hpp"
#include "dasf/csv.hpp"
#include "dasf/leaf_optics.hpp"
#include "dasf/spectral.hpp"

namespace dasf::test {

inline std::filesystem::path data_dir() { return DASF_TEST_DATA_DIR; }
inline std::filesystem::path constants_path() { return DASF_CONSTANTS_FILE; }

inline const OpticalConstants& constants() {
  static const OpticalConstants oc = load_constants(constants_path());
  return oc;
}

inline const Spectrum& reference() {
  static const Spectrum w = reference_albedo(constants());
  return w;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Smooth red-edge-like albedo: lo below the edge, hi above, on the standard grid.
inline Spectrum sigmoid_albedo(double lo, double hi, double center_nm, double width_nm) {
  return Spectrum::generate(WavelengthGrid::standard(), [=](int nm) {
    return lo + (hi - lo) / (1.0 + std::exp(-(nm - center_nm) / width_nm));
  });
}

inline Spectrum random_albedo(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lo(0.05, 0.4), hi(0.7, 0.98), c(700, 760), w(5, 30);
  return sigmoid_albedo(lo(rng), hi(rng), c(rng), w(rng));
}

// Transformed albedo of a leaf with chlorophyll-only deviation q from w.
inline Spectrum q_transform(const Spectrum& w, double q) {
  return w.map([q](double v) { return (1.0 - q) * v / (1.0 - q * v); });
}

// Leaves as exported in a training CSV.
inline SyntheticLeafSet leaves_from_training_csv(const std::filesystem::path& p) {
  const auto t = csv::read_file(p.string());
  SyntheticLeafSet set;
  const auto cab = t.column("cab"), car = t.column("car"), ewt = t.column("ewt"),
             lma = t.column("lma");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    LeafBiochem b;
    b.cab = csv::to_double(t.rows[i][cab], t.origin, t.lines[i]);
    b.car = csv::to_double(t.rows[i][car], t.origin, t.lines[i]);
    b.ewt = csv::to_double(t.rows[i][ewt], t.origin, t.lines[i]);
    b.lma = csv::to_double(t.rows[i][lma], t.origin, t.lines[i]);
    set.leaves.push_back(b);
  }
  set.n_requested = set.n_retained = static_cast<int>(set.leaves.size());
  return set;
}

}  // namespace dasf::test

namespace dasf::test {

struct FixtureLibrary {
  std::filesystem::path spectra;
  std::filesystem::path leaf;
  int directions = 0;
};

// Canopy structure of the fixture library for a view; DASF = rho_i0 / (1 - p).
inline SIForwardParams fixture_params(double vza_deg, double raa_deg) {
  return {0.3 + 0.002 * std::abs(vza_deg) + 0.0001 * raa_deg, 0.6};
}

// Writes a measured-library fixture: 54 directions per canopy (8 nadir,
// 46 oblique with two hotspot cells left blank) on a 10 nm grid, BRF from the
// spectral-invariant model. Canopy "p1" is pine, "o1" oak, "x1" of unknown species.
inline FixtureLibrary write_fixture_library(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const WavelengthGrid grid(400, 2500, 10);
  std::vector<std::pair<double, double>> views;
  for (int k = 0; k < 8; ++k) views.emplace_back(0.0, 45.0 * k);
  for (double vza : {-60.0, -40.0, -20.0, 20.0, 40.0, 60.0})
    for (int k = 0; k < 8; ++k) {
      const double raa = 45.0 * k;
      if (raa == 0.0 && (vza == 20.0 || vza == 40.0)) continue;
      views.emplace_back(vza, raa);
    }

  FixtureLibrary lib{dir / "spectra.csv", dir / "leaf.csv", static_cast<int>(views.size())};
  std::ofstream s(lib.spectra), l(lib.leaf);
  s << "canopy_id,species,vza_deg,raa_deg,wavelength_nm,dsc\n";
  l << "canopy_id,sample_id,side,wavelength_nm,dhrf,dhtf\n";
  s.precision(17);
  l.precision(17);
  const std::tuple<const char*, const char*, double> canopies[] = {
      {"p1", "pine", 0.15}, {"o1", "Oak", 0.05}, {"x1", "birch", 0.1}};
  for (const auto& [id, species, dry] : canopies) {
    std::vector<double> w(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const int nm = grid.wavelength(i);
      w[i] = 0.1 + 0.8 / (1.0 + std::exp(-(nm - 715.0) / 12.0)) - dry * (nm > 1300 ? 0.5 : 0.0);
    }
    const Spectrum albedo(grid, w);
    for (const auto& [vza, raa] : views) {
      const auto brf = si_forward_brf(fixture_params(vza, raa), albedo);
      for (std::size_t i = 0; i < grid.size(); ++i)
        s << id << ',' << species << ',' << vza << ',' << raa << ',' << grid.wavelength(i) << ','
          << brf[i] / M_PI << '\n';
    }
    const double offsets[] = {-0.02, 0.0, 0.02};
    for (int sample = 0; sample < 3; ++sample)
      for (const char* side : {"adaxial", "abaxial"})
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double sum = w[i] * (1.0 + offsets[sample]);
          l << id << ',' << sample << ',' << side << ',' << grid.wavelength(i) << ',' << 0.55 * sum
            << ',' << 0.45 * sum << '\n';
        }
  }
  return lib;
}

}  // namespace dasf::test
