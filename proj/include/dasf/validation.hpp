#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasf/calibration.hpp"
#include "dasf/canopy.hpp"
#include "dasf/estimators.hpp"
#include "dasf/leaf_optics.hpp"

namespace dasf {

// 100 * RMSE(est - ref) / mean(ref)
double rrmse(std::span<const double> est, std::span<const double> ref);

// --- one-dimensional sweeps ----------------------------------------------------

enum class SweepAxis { lai, lidf, vza };
std::string to_string(SweepAxis axis);
SweepAxis parse_axis(std::string_view name);

struct SweepConfig {
  std::vector<double> lai_values = {1, 2, 3, 4, 5, 6, 7};
  std::vector<LidfKind> lidf_kinds = {kAllLidfKinds.begin(), kAllLidfKinds.end()};
  std::vector<double> vza_values = {0, 10, 20, 30, 40, 50, 60};
  double vza_raa_deg = 180.0;
  CanopyStructure base;    // LAI 5, uniform, hotspot 0.01
  ViewGeometry base_view;  // SZA 30, VZA 0, RAA 0
  std::vector<SweepAxis> axes = {SweepAxis::lai, SweepAxis::lidf, SweepAxis::vza};
  int subset = 0;  // use the first n leaves; 0 keeps all

  void validate() const;
};

struct SweepPoint {
  SweepAxis axis = SweepAxis::lai;
  std::string label;  // "5", "planophile", "30"
  CanopyStructure canopy;
  ViewGeometry view;
};

// One varying axis at a time, the others held at the base values.
std::vector<SweepPoint> expand_sweep(const SweepConfig& cfg);

struct MethodMetrics {
  std::vector<double> values;
  double mean = 0.0;
  double rrmse_pct = 0.0;
};

struct ConfigReport {
  SweepPoint point;
  std::vector<double> dasf0;
  double mean_dasf0 = 0.0;
  MethodMetrics sdasf;
  MethodMetrics idasf;
  double non_absorbing_brf = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

// Leaves whose estimators fail in a configuration are excluded from all three
// distributions of that configuration and counted in n_failed.
std::vector<ConfigReport> run_sweep(const SweepConfig& cfg, const SyntheticLeafSet& leaves,
                                    const DcModelCoefficients& coeffs, const OpticalConstants& oc,
                                    unsigned threads = 0);

// Average over axes of the relative rRMSE reduction of iDASF against sDASF.
struct AxisSummary {
  SweepAxis axis;
  double mean_rrmse_sdasf = 0.0;
  double mean_rrmse_idasf = 0.0;
  double reduction_pct = 0.0;  // mean over configurations of 100 (s - i) / s
};
std::vector<AxisSummary> summarize_sweep(const std::vector<ConfigReport>& reports);

void write_sweep_csv(std::ostream& out, const std::vector<ConfigReport>& reports);

// --- measured libraries --------------------------------------------------------

enum class Species { pine, oak, other };
std::string to_string(Species s);

struct ViewKey {
  double vza_deg = 0.0;  // signed: positive backscatter, negative forward
  double raa_deg = 0.0;
  friend auto operator<=>(const ViewKey&, const ViewKey&) = default;
};

struct MeasuredCanopy {
  std::string canopy_id;
  Species species = Species::other;
  Spectrum leaf_albedo;
  std::map<ViewKey, Spectrum> brf;
};

struct MeasuredLibrary {
  std::vector<MeasuredCanopy> canopies;
  std::vector<std::string> warnings;
};

// Spectra CSV: canopy_id,species,vza_deg,raa_deg,wavelength_nm,dsc (BRF = pi * DSC).
// Leaf CSV: canopy_id,sample_id,side,wavelength_nm,dhrf,dhtf (albedo = mean of
// DHRF + DHTF over samples and sides).
MeasuredLibrary ingest_measured_library(std::istream& spectra, std::istream& leaf,
                                        const std::string& spectra_origin = "<spectra>",
                                        const std::string& leaf_origin = "<leaf>");
MeasuredLibrary ingest_measured_library(const std::filesystem::path& spectra,
                                        const std::filesystem::path& leaf);

struct Observation {
  std::string canopy_id;
  Species species = Species::other;
  ViewKey view;
  bool ok = false;
  std::string error;
  double dasf0 = 0.0;
  double sdasf = 0.0;
  double idasf = 0.0;
  double ae_sdasf = 0.0;
  double ae_idasf = 0.0;
};

struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<int> counts;
};

struct SpeciesSummary {
  Species species = Species::other;
  int n_ok = 0;
  int n_failed = 0;
  double mae_sdasf = 0.0;
  double mae_idasf = 0.0;
  double mae_reduction_pct = 0.0;  // 100 (MAE_s - MAE_i) / MAE_s
  Histogram ae_sdasf;
  Histogram ae_idasf;
};

struct AngleCell {
  Species species = Species::other;
  ViewKey view;
  int count = 0;
  double mean_delta_ae = 0.0;  // AE(iDASF) - AE(sDASF), averaged over canopies
  double mean_dasf0 = 0.0;
};

struct MeasuredReport {
  std::vector<Observation> observations;
  std::vector<SpeciesSummary> species;
  std::vector<AngleCell> angle_map;
  int n_failed = 0;
};

MeasuredReport validate_measured(const MeasuredLibrary& library, const DcModelCoefficients& coeffs,
                                 const OpticalConstants& oc, int histogram_bins = 20,
                                 unsigned threads = 0);

// Exact lookup of `s` on the points of `grid` (a subset of s's grid).
Spectrum resample_exact(const Spectrum& s, const WavelengthGrid& grid);

}  // namespace dasf
