#include "dasf/estimators.hpp"

#include <cmath>
#include <vector>

#include <fmt/core.h>

namespace dasf {

namespace {

constexpr double kSlopeGuard = 1e-9;
constexpr double kDenominatorGuard = 1e-6;

DasfEstimate finish(const DasfRegression& reg, DasfMethod method, double dc) {
  const double denom = 1.0 - reg.k - dc;
  const double guard = method == DasfMethod::idasf ? kDenominatorGuard : kSlopeGuard;
  if (denom <= guard)
    throw EstimatorError(fmt::format("{}: 1 - k - DC = {:.6g} (k = {:.6g}, b = {:.6g}, DC = {:.6g})",
                                     to_string(method), denom, reg.k, reg.b, dc),
                         reg, dc);
  return DasfEstimate{reg.b / denom, method, dc, reg};
}

}  // namespace

std::string to_string(DasfMethod m) {
  switch (m) {
    case DasfMethod::sdasf: return "sdasf";
    case DasfMethod::idasf: return "idasf";
    case DasfMethod::dasf0: return "dasf0";
  }
  return "unknown";
}

DasfMethod parse_method(std::string_view name) {
  if (name == "sdasf") return DasfMethod::sdasf;
  if (name == "idasf") return DasfMethod::idasf;
  if (name == "dasf0") return DasfMethod::dasf0;
  throw InputError(fmt::format("unknown method '{}' (expected sdasf, idasf or dasf0)", name));
}

void DcModelCoefficients::validate() const {
  if (!std::isfinite(c1) || !std::isfinite(c2) || !std::isfinite(c3) || !std::isfinite(c4))
    throw InputError("DC model coefficients must be finite");
}

DasfRegression regress_brf(const Spectrum& brf, const Spectrum& albedo, const BandWindow& w,
                           AlbedoReference reference) {
  const auto x = slice_band(brf, w);
  const auto a = slice_band(albedo, w);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(a[i] > 0.0))
      throw InputError(fmt::format("albedo {} at {} nm must be positive", a[i],
                                   a.grid().wavelength(i)));
    y[i] = x[i] / a[i];
  }
  const auto fit = linear_fit(x.values(), y);
  return DasfRegression{fit.slope, fit.intercept, fit.r2, w, reference};
}

DasfEstimate sdasf(const Spectrum& brf, const Spectrum& w_r, const BandWindow& w) {
  return finish(regress_brf(brf, w_r, w), DasfMethod::sdasf, 0.0);
}

DasfEstimate sdasf_from_regression(const DasfRegression& reg) {
  return finish(reg, DasfMethod::sdasf, 0.0);
}

double dc_model(double brf710, double brf2260, const DcModelCoefficients& c) {
  for (double v : {brf710, brf2260})
    if (!(v >= 0.0 && v <= 1.5))
      throw InputError(fmt::format("DC model input BRF {} outside [0, 1.5]", v));
  return std::exp(c.c1 * brf710 + c.c2 * brf2260 + c.c3) + c.c4;
}

DasfEstimate idasf(const Spectrum& brf, const Spectrum& w_r, const DcModelCoefficients& c,
                   const BandWindow& w) {
  c.validate();
  const double dc = dc_model(brf.at(710), brf.at(2260), c);
  return finish(regress_brf(brf, w_r, w), DasfMethod::idasf, dc);
}

DasfEstimate idasf_with_dc(const Spectrum& brf, const Spectrum& w_r, double dc,
                           const BandWindow& w) {
  return finish(regress_brf(brf, w_r, w), DasfMethod::idasf, dc);
}

DasfEstimate idasf_from_regression(const DasfRegression& reg, double dc) {
  return finish(reg, DasfMethod::idasf, dc);
}

DasfEstimate dasf0_from_true_albedo(const Spectrum& brf, const Spectrum& w_true,
                                    const BandWindow& w) {
  return finish(regress_brf(brf, w_true, w, AlbedoReference::true_albedo), DasfMethod::dasf0, 0.0);
}

double dc0(const DasfRegression& reg, double dasf0) {
  if (!(dasf0 > 0.0)) throw InputError(fmt::format("DASF0 = {} must be positive", dasf0));
  return 1.0 - reg.k - reg.b / dasf0;
}

BiasFactors bias_factors(double t_c, double t_m, double cm_km, double p_leaf) {
  if (!(t_c > 0.0)) throw InputError(fmt::format("t_c = {} must be positive", t_c));
  if (!(p_leaf >= 0.0 && p_leaf < 1.0))
    throw InputError(fmt::format("p_leaf = {} outside [0, 1)", p_leaf));
  BiasFactors f;
  f.t_c = t_c;
  f.t_m = t_m;
  f.cm_km = cm_km;
  f.p_leaf = p_leaf;
  f.A = std::exp((t_c - t_m) * cm_km);
  f.q = (t_c - 1.0) / t_c;
  f.D = f.A * (1.0 - f.q);
  f.C = (1.0 - f.A) / (f.A * (1.0 - p_leaf));
  f.dc = f.D * f.C;
  f.B = (f.q - p_leaf + p_leaf * f.A * (1.0 - f.q)) / (1.0 - p_leaf);
  return f;
}

double dasf_prime_analytic(const SIForwardParams& params, const BiasFactors& bf) {
  const double denom = 1.0 - params.p + bf.C;
  if (!(denom > 0.0)) throw NumericalError(fmt::format("1 - p + C = {} must be positive", denom));
  return params.rho_i0 / denom;
}

}  // namespace dasf
