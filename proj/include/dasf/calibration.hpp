#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dasf/canopy.hpp"
#include "dasf/estimators.hpp"
#include "dasf/leaf_optics.hpp"

namespace dasf {

struct ConstituentRange {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Marginal statistics of the four sampled constituents.
struct ConstituentStats {
  ConstituentRange cab;  // ug/cm^2
  ConstituentRange car;  // ug/cm^2
  ConstituentRange lma;  // g/cm^2
  ConstituentRange ewt;  // cm

  // Statistics of the ANGERS leaf database as distributed with the sampler.
  static ConstituentStats defaults();
  void validate() const;
};

// Order: cab, car, lma, ewt.
using CorrelationMatrix = Eigen::Matrix4d;

// Correlations between constituents in published leaf data, used to drive
// the sampler.
CorrelationMatrix source_correlation();
// Correlations realized in the published retained synthetic set; the sampler
// output is checked against these.
CorrelationMatrix synthetic_correlation();
void validate_correlation(const CorrelationMatrix& corr);

// JSON helpers: stats as {"cab": {"mean":..,"std":..,"min":..,"max":..}, ...};
// correlation as {"order": [...], "matrix": [[...], ...]} or a bare 4x4 array.
ConstituentStats load_stats(const std::filesystem::path& path);
CorrelationMatrix load_correlation(const std::filesystem::path& path);

inline constexpr double kGreenLeafCabFloor = 10.0;

struct SyntheticLeafSet {
  std::vector<LeafBiochem> leaves;
  std::uint64_t seed = 0;
  int n_requested = 0;
  int n_retained = 0;
};

// Correlated truncated-normal draws (rejection and redraw, at most 1000
// attempts per sample), then leaves below the green-leaf chlorophyll floor are
// dropped. Anthocyanins and brown pigments are zero; N is 1.5.
SyntheticLeafSet sample_leaves(const ConstituentStats& stats, const CorrelationMatrix& corr,
                               int n, std::uint64_t seed);

// Sample correlation of (cab, car, lma, ewt) over a leaf set.
CorrelationMatrix sample_correlation(const std::vector<LeafBiochem>& leaves);

struct TrainingRecord {
  LeafBiochem leaf;
  double brf710 = 0.0;
  double brf2260 = 0.0;
  double dc0 = 0.0;
  double dasf0 = 0.0;
  double k = 0.0;
  double b = 0.0;
};

std::vector<TrainingRecord> build_training_set(const SyntheticLeafSet& leaves,
                                               const CanopyStructure& canopy,
                                               const ViewGeometry& g,
                                               const OpticalConstants& oc, unsigned threads = 0);

void write_training_csv(std::ostream& out, const std::vector<TrainingRecord>& records);

struct DcFitReport {
  double rmse = 0.0;
  double r2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> rmse_history;  // one entry per accepted step, starting at init
};

struct DcFit {
  DcModelCoefficients coeffs;
  DcFitReport report;
};

// Levenberg-Marquardt least squares of dc0 against the exponential DC model.
DcFit fit_dc_model(const std::vector<TrainingRecord>& records,
                   const DcModelCoefficients& init = DcModelCoefficients::published());

// Two-stage variant: choose the projection direction of (BRF710, BRF2260)
// that best collapses the cloud, then fit the exponential along it.
DcFit fit_dc_model_two_stage(const std::vector<TrainingRecord>& records,
                             const DcModelCoefficients& init = DcModelCoefficients::published());

// Within-leaf recollision relations fitted on a synthetic set.
struct WithinLeafReport {
  struct Bin {
    double lma_mean = 0.0;
    double k = 0.0;
    double b = 0.0;
    int count = 0;
  };
  std::vector<Bin> bins;
  LineFit k_vs_lma;     // k(LMA) = slope * LMA + intercept
  LineFit b_vs_lma;     // b(LMA)
  LineFit p0_vs_inv_cab;  // p0 = intercept + slope / cab
  LineFit p_vs_inv_cab;
  LineFit r_vs_inv_cab;
  double k_mean = 0.0, k_std = 0.0;
  double b_mean = 0.0, b_std = 0.0;
  double epsilon_min = 0.0, epsilon_max = 0.0;
  int n_leaves = 0;
};

WithinLeafReport fit_within_leaf_relations(const SyntheticLeafSet& leaves,
                                           const OpticalConstants& oc, int n_bins = 5,
                                           unsigned threads = 0);

}  // namespace dasf
