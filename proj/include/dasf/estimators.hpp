#pragma once

#include <string>
#include <string_view>

#include "dasf/canopy.hpp"
#include "dasf/error.hpp"
#include "dasf/spectral.hpp"

namespace dasf {

enum class AlbedoReference { reference_albedo, true_albedo };
enum class DasfMethod { sdasf, idasf, dasf0 };

std::string to_string(DasfMethod m);
DasfMethod parse_method(std::string_view name);

// Line fitted to BRF/albedo against BRF; slope k, intercept b.
struct DasfRegression {
  double k = 0.0;
  double b = 0.0;
  double r2 = 0.0;
  BandWindow window;
  AlbedoReference reference = AlbedoReference::reference_albedo;
};

struct DasfEstimate {
  double value = 0.0;
  DasfMethod method = DasfMethod::sdasf;
  double dc_used = 0.0;
  DasfRegression regression;
};

// DC = exp(c1 * BRF710 + c2 * BRF2260 + c3) + c4
struct DcModelCoefficients {
  double c1 = 9.3894;
  double c2 = -15.1453;
  double c3 = -3.5058;
  double c4 = -0.0227;

  static DcModelCoefficients published() { return {}; }
  void validate() const;
};

// Raised when an estimator's denominator collapses. Carries what was computed
// so callers can report it.
class EstimatorError : public NumericalError {
 public:
  EstimatorError(const std::string& what, DasfRegression reg, double dc)
      : NumericalError(what), regression_(reg), dc_(dc) {}
  const DasfRegression& regression() const { return regression_; }
  double dc() const { return dc_; }

 private:
  DasfRegression regression_;
  double dc_;
};

DasfRegression regress_brf(const Spectrum& brf, const Spectrum& albedo, const BandWindow& w = {},
                           AlbedoReference reference = AlbedoReference::reference_albedo);

// b / (1 - k)
DasfEstimate sdasf(const Spectrum& brf, const Spectrum& w_r, const BandWindow& w = {});

double dc_model(double brf710, double brf2260, const DcModelCoefficients& c = {});

// b / (1 - k - DC) with DC from the BRF at 710 and 2260 nm.
DasfEstimate idasf(const Spectrum& brf, const Spectrum& w_r, const DcModelCoefficients& c = {},
                   const BandWindow& w = {});
DasfEstimate sdasf_from_regression(const DasfRegression& reg);

// Same with an externally supplied DC.
DasfEstimate idasf_with_dc(const Spectrum& brf, const Spectrum& w_r, double dc,
                           const BandWindow& w = {});
DasfEstimate idasf_from_regression(const DasfRegression& reg, double dc);

// b0 / (1 - k0) with the leaf's own albedo.
DasfEstimate dasf0_from_true_albedo(const Spectrum& brf, const Spectrum& w_true,
                                    const BandWindow& w = {});

// 1 - k - b / dasf0
double dc0(const DasfRegression& reg, double dasf0);

struct BiasFactors {
  double t_c = 1.0;
  double t_m = 1.0;
  double cm_km = 0.0;
  double p_leaf = 0.0;
  double A = 1.0;
  double C = 0.0;
  double D = 1.0;
  double dc = 0.0;
  double q = 0.0;
  double B = 0.0;
};

BiasFactors bias_factors(double t_c, double t_m, double cm_km, double p_leaf);

// rho_i0 / (1 - p + C)
double dasf_prime_analytic(const SIForwardParams& params, const BiasFactors& bf);

}  // namespace dasf
