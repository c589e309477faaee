#include "dasf/canopy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "dasf/error.hpp"

namespace dasf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

}  // namespace

// --- leaf inclination ------------------------------------------------------

LidfParams lidf_params(LidfKind kind) {
  switch (kind) {
    case LidfKind::planophile: return {1.0, 0.0};
    case LidfKind::erectophile: return {-1.0, 0.0};
    case LidfKind::plagiophile: return {0.0, -1.0};
    case LidfKind::extremophile: return {0.0, 1.0};
    case LidfKind::spherical: return {-0.35, -0.15};
    case LidfKind::uniform: return {0.0, 0.0};
  }
  throw InputError("unknown LIDF kind");
}

std::string to_string(LidfKind kind) {
  switch (kind) {
    case LidfKind::planophile: return "planophile";
    case LidfKind::erectophile: return "erectophile";
    case LidfKind::plagiophile: return "plagiophile";
    case LidfKind::extremophile: return "extremophile";
    case LidfKind::spherical: return "spherical";
    case LidfKind::uniform: return "uniform";
  }
  return "unknown";
}

LidfKind parse_lidf_kind(std::string_view name) {
  for (auto kind : kAllLidfKinds)
    if (to_string(kind) == name) return kind;
  throw InputError(fmt::format("unknown LIDF kind '{}' (expected planophile, erectophile, "
                               "plagiophile, extremophile, spherical or uniform)",
                               name));
}

InclinationClasses::InclinationClasses(std::vector<double> upper_bounds_deg)
    : upper_(std::move(upper_bounds_deg)) {
  if (upper_.empty() || upper_.back() != 90.0)
    throw InputError("inclination classes must end at 90 degrees");
  double previous = 0.0;
  for (double u : upper_) {
    if (!(u > previous)) throw InputError("inclination class bounds must ascend");
    previous = u;
  }
}

InclinationClasses InclinationClasses::sail13() {
  return InclinationClasses({10, 20, 30, 40, 50, 60, 70, 80, 82, 84, 86, 88, 90});
}

InclinationClasses InclinationClasses::equal(int n) {
  if (n < 1) throw InputError("need at least one inclination class");
  std::vector<double> upper(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) upper[static_cast<std::size_t>(i)] = 90.0 * (i + 1) / n;
  upper.back() = 90.0;
  return InclinationClasses(std::move(upper));
}

double lidf_cumulative(double a, double b, double theta_deg) {
  const double t = theta_deg * kDeg;
  if (a > 1.0) return 1.0 - std::cos(t);
  // Fixed-point solution of x = 2t + a sin x + b/2 sin 2x.
  constexpr double eps = 1e-8;
  double x = 2.0 * t;
  const double p = x;
  double y = 0.0;
  double delx = 1.0;
  while (delx >= eps) {
    y = a * std::sin(x) + 0.5 * b * std::sin(2.0 * x);
    const double dx = 0.5 * (y - x + p);
    x += dx;
    delx = std::abs(dx);
  }
  return (2.0 * y + p) / kPi;
}

std::vector<double> lidf_density(double a, double b, const InclinationClasses& classes) {
  if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a) + std::abs(b) > 1.0 + 1e-12)
    throw InputError(
        fmt::format("LIDF parameters a = {}, b = {} violate |a| + |b| <= 1", a, b));
  std::vector<double> density(classes.size());
  double previous = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const double cum = i + 1 == classes.size() ? 1.0 : lidf_cumulative(a, b, classes.upper(i));
    density[i] = cum - previous;
    previous = cum;
  }
  return density;
}

// --- structure -------------------------------------------------------------

CanopyStructure CanopyStructure::with_lidf(LidfKind kind, double lai, double hotspot) {
  const auto params = lidf_params(kind);
  return CanopyStructure{lai, params.a, params.b, hotspot};
}

void CanopyStructure::validate() const {
  if (!(lai > 0.0 && lai <= 15.0))
    throw InputError(fmt::format("LAI = {} outside (0, 15]", lai));
  if (!(std::abs(lidf_a) + std::abs(lidf_b) <= 1.0 + 1e-12))
    throw InputError(
        fmt::format("LIDF parameters a = {}, b = {} violate |a| + |b| <= 1", lidf_a, lidf_b));
  if (!(hotspot >= 0.0)) throw InputError(fmt::format("hotspot = {} must be >= 0", hotspot));
}

// --- four-stream model -----------------------------------------------------

namespace {

struct VolumeScattering {
  double chi_s, chi_o, frho, ftau;
};

// Interception and bi-directional scattering for one leaf inclination.
VolumeScattering volscatt(double tts, double tto, double psi, double ttl) {
  const double cts = std::cos(tts * kDeg);
  const double cto = std::cos(tto * kDeg);
  const double sts = std::sin(tts * kDeg);
  const double sto = std::sin(tto * kDeg);
  const double cospsi = std::cos(psi * kDeg);
  const double psir = psi * kDeg;
  const double cttl = std::cos(ttl * kDeg);
  const double sttl = std::sin(ttl * kDeg);
  const double cs = cttl * cts;
  const double co = cttl * cto;
  const double ss = sttl * sts;
  const double so = sttl * sto;

  double cosbts = 5.0;
  if (std::abs(ss) > 1e-6) cosbts = -cs / ss;
  double cosbto = 5.0;
  if (std::abs(so) > 1e-6) cosbto = -co / so;

  double bts, ds;
  if (std::abs(cosbts) < 1.0) {
    bts = std::acos(cosbts);
    ds = ss;
  } else {
    bts = kPi;
    ds = cs;
  }
  const double chi_s = 2.0 / kPi * ((bts - kPi * 0.5) * cs + std::sin(bts) * ss);

  double bto, do_;
  if (std::abs(cosbto) < 1.0) {
    bto = std::acos(cosbto);
    do_ = so;
  } else if (tto < 90.0) {
    bto = kPi;
    do_ = co;
  } else {
    bto = 0.0;
    do_ = -co;
  }
  const double chi_o = 2.0 / kPi * ((bto - kPi * 0.5) * co + std::sin(bto) * so);

  const double btran1 = std::abs(bts - bto);
  const double btran2 = kPi - std::abs(bts + bto - kPi);
  double bt1, bt2, bt3;
  if (psir <= btran1) {
    bt1 = psir;
    bt2 = btran1;
    bt3 = btran2;
  } else {
    bt1 = btran1;
    if (psir <= btran2) {
      bt2 = psir;
      bt3 = btran2;
    } else {
      bt2 = btran2;
      bt3 = psir;
    }
  }
  const double t1 = 2.0 * cs * co + ss * so * cospsi;
  double t2 = 0.0;
  if (bt2 > 0.0) t2 = std::sin(bt2) * (2.0 * ds * do_ + ss * so * std::cos(bt1) * std::cos(bt3));
  const double denom = 2.0 * kPi * kPi;
  const double frho = std::max(((kPi - bt2) * t1 + t2) / denom, 0.0);
  const double ftau = std::max((-bt2 * t1 + t2) / denom, 0.0);
  return {chi_s, chi_o, frho, ftau};
}

double jfunc1(double k, double l, double t) {
  const double del = (k - l) * t;
  if (std::abs(del) > 1e-3) return (std::exp(-l * t) - std::exp(-k * t)) / (k - l);
  return 0.5 * t * (std::exp(-k * t) + std::exp(-l * t)) * (1.0 - del * del / 12.0);
}

double jfunc2(double k, double l, double t) { return (1.0 - std::exp(-(k + l) * t)) / (k + l); }

}  // namespace

FourStreamCanopy::FourStreamCanopy(const CanopyStructure& cs, const ViewGeometry& g,
                                   const InclinationClasses& classes)
    : lai_(cs.lai) {
  cs.validate();
  g.validate();
  const double tts = g.sza_deg;
  const double tto = g.vza_deg;
  // Azimuth folded into [0, 180].
  const double psi = std::abs(g.raa_deg - 360.0 * std::round(g.raa_deg / 360.0));

  const auto lidf = lidf_density(cs.lidf_a, cs.lidf_b, classes);
  const double cts = std::cos(tts * kDeg);
  const double cto = std::cos(tto * kDeg);
  const double ctscto = cts * cto;
  ks_ = ko_ = bf_ = sob_ = sof_ = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const double ttl = classes.center(i);
    const double cttl = std::cos(ttl * kDeg);
    const auto v = volscatt(tts, tto, psi, ttl);
    ks_ += v.chi_s / cts * lidf[i];
    ko_ += v.chi_o / cto * lidf[i];
    bf_ += cttl * cttl * lidf[i];
    sob_ += v.frho * kPi / ctscto * lidf[i];
    sof_ += v.ftau * kPi / ctscto * lidf[i];
  }

  sdb_ = 0.5 * (ks_ + bf_);
  sdf_ = 0.5 * (ks_ - bf_);
  dob_ = 0.5 * (ko_ + bf_);
  dof_ = 0.5 * (ko_ - bf_);
  ddb_ = 0.5 * (1.0 + bf_);
  ddf_ = 0.5 * (1.0 - bf_);

  tss_ = std::exp(-ks_ * lai_);
  too_ = std::exp(-ko_ * lai_);

  // Hotspot: joint gap probability along sun and view paths.
  const double tants = std::tan(tts * kDeg);
  const double tanto = std::tan(tto * kDeg);
  const double dso =
      std::sqrt(std::max(tants * tants + tanto * tanto - 2.0 * tants * tanto * std::cos(psi * kDeg), 0.0));
  double alf = 1e36;
  if (cs.hotspot > 0.0) alf = (dso / cs.hotspot) * 2.0 / (ks_ + ko_);
  if (alf == 0.0) {
    tsstoo_ = tss_;
    sumint_ = (1.0 - tss_) / (ks_ * lai_);
  } else {
    // Exponential Simpson integration in 20 steps of equal slope partition.
    const double fhot = lai_ * std::sqrt(ko_ * ks_);
    double x1 = 0.0, y1 = 0.0, f1 = 1.0;
    const double fint = (1.0 - std::exp(-alf)) * 0.05;
    double sum = 0.0;
    for (int istep = 1; istep <= 20; ++istep) {
      const double x2 = istep < 20 ? -std::log(1.0 - istep * fint) / alf : 1.0;
      const double y2 = -(ko_ + ks_) * lai_ * x2 + fhot * (1.0 - std::exp(-alf * x2)) / alf;
      const double f2 = std::exp(y2);
      sum += (f2 - f1) * (x2 - x1) / (y2 - y1);
      x1 = x2;
      y1 = y2;
      f1 = f2;
    }
    tsstoo_ = f1;
    sumint_ = std::isnan(sum) ? 0.0 : sum;
  }
  if (!std::isfinite(tss_) || !std::isfinite(too_) || !std::isfinite(sumint_))
    throw NumericalError(fmt::format("canopy geometry overflow at LAI {}", lai_));
}

double FourStreamCanopy::brf_absorbing(double rho, double tau, double soil) const {
  double sigb = ddb_ * rho + ddf_ * tau;
  double sigf = ddf_ * rho + ddb_ * tau;
  if (sigf == 0.0) sigf = 1e-36;
  if (sigb == 0.0) sigb = 1e-36;
  const double att = 1.0 - sigf;
  const double m = std::sqrt(att * att - sigb * sigb);
  const double sb = sdb_ * rho + sdf_ * tau;
  const double sf = sdf_ * rho + sdb_ * tau;
  const double vb = dob_ * rho + dof_ * tau;
  const double vf = dof_ * rho + dob_ * tau;
  const double w = sob_ * rho + sof_ * tau;

  const double e1 = std::exp(-m * lai_);
  const double e2 = e1 * e1;
  const double rinf = (att - m) / sigb;
  const double rinf2 = rinf * rinf;
  const double re = rinf * e1;
  const double denom = 1.0 - rinf2 * e2;

  const double j1ks = jfunc1(ks_, m, lai_);
  const double j2ks = jfunc2(ks_, m, lai_);
  const double j1ko = jfunc1(ko_, m, lai_);
  const double j2ko = jfunc2(ko_, m, lai_);
  const double pss = (sf + sb * rinf) * j1ks;
  const double qss = (sf * rinf + sb) * j2ks;
  const double pv = (vf + vb * rinf) * j1ko;
  const double qv = (vf * rinf + vb) * j2ko;
  const double rdd = rinf * (1.0 - e2) / denom;
  const double tsd = (pss - re * qss) / denom;
  const double tdo = (pv - re * qv) / denom;
  const double rdo = (qv - re * pv) / denom;

  const double z = jfunc2(ks_, ko_, lai_);
  const double g1 = (z - j1ks * too_) / (ko_ + m);
  const double g2 = (z - j1ko * tss_) / (ks_ + m);
  const double tv1 = (vf * rinf + vb) * g1;
  const double tv2 = (vf + vb * rinf) * g2;
  const double t1 = tv1 * (sf + sb * rinf);
  const double t2 = tv2 * (sf * rinf + sb);
  const double t3 = (rdo * qss + tdo * pss) * rinf;
  const double rsod = (t1 + t2 - t3) / (1.0 - rinf2);
  const double rsos = w * lai_ * sumint_;
  const double rso = rsos + rsod;

  if (soil == 0.0) return rso;
  const double dn = std::max(1.0 - soil * rdd, 1e-36);
  const double rsodt = ((tss_ + tsd) * tdo + (tsd + tss_ * soil * rdd) * too_) * soil / dn;
  const double rsost = rso + tsstoo_ * soil;
  return rsost + rsodt;
}

double FourStreamCanopy::brf(double rho, double tau, double soil) const {
  // The two-stream solution is singular for non-absorbing leaves; approach
  // the limit from below and extrapolate linearly in the albedo scale.
  constexpr double kConservative = 1e-9;
  constexpr double kStep = 1e-6;
  double value;
  if (1.0 - (rho + tau) < kConservative) {
    const double s1 = 1.0 - kStep;
    const double s2 = 1.0 - 2.0 * kStep;
    value = 2.0 * brf_absorbing(rho * s1, tau * s1, soil) -
            brf_absorbing(rho * s2, tau * s2, soil);
  } else {
    value = brf_absorbing(rho, tau, soil);
  }
  if (!std::isfinite(value))
    throw NumericalError(fmt::format("canopy BRF overflow (rho {}, tau {}, LAI {})", rho, tau, lai_));
  return value;
}

Spectrum FourStreamCanopy::brf(const Spectrum& rho, const Spectrum& tau,
                               const Spectrum& soil) const {
  if (!(rho.grid() == tau.grid()) || !(rho.grid() == soil.grid()))
    throw InputError("leaf and soil spectra must share a wavelength grid");
  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = brf(rho[i], tau[i], soil[i]);
  return Spectrum(rho.grid(), std::move(out));
}

Spectrum black_soil(const WavelengthGrid& grid) { return Spectrum::constant(grid, 0.0); }

Spectrum canopy_brf(const LeafOptics& leaf, const CanopyStructure& cs, const ViewGeometry& g,
                    const Spectrum& soil) {
  return FourStreamCanopy(cs, g).brf(leaf.reflectance, leaf.transmittance, soil);
}

// --- spectral-invariant forward model ----------------------------------------

void SIForwardParams::validate() const {
  if (!(rho_i0 > 0.0) || !std::isfinite(rho_i0))
    throw InputError(fmt::format("rho*i0 = {} must be positive", rho_i0));
  if (!(p >= 0.0 && p < 1.0)) throw InputError(fmt::format("p = {} outside [0, 1)", p));
}

Spectrum si_forward_brf(const SIForwardParams& params, const Spectrum& albedo) {
  params.validate();
  for (std::size_t i = 0; i < albedo.size(); ++i)
    if (1.0 - params.p * albedo[i] <= 0.0)
      throw NumericalError(fmt::format("1 - p * albedo <= 0 at {} nm", albedo.grid().wavelength(i)));
  return albedo.map([&](double w) { return params.rho_i0 * w / (1.0 - params.p * w); });
}

Spectrum non_absorbing_brf_spectrum(const CanopyStructure& cs, const ViewGeometry& g) {
  constexpr double kWaxAirIndex = 1.5;
  const auto grid = WavelengthGrid::standard();
  const auto oc = OpticalConstants::non_absorbing(grid, kWaxAirIndex);
  LeafBiochem bio;
  bio.n_struct = 1.5;
  const auto leaf = prospect(bio, oc);
  return canopy_brf(leaf, cs, g, black_soil(grid));
}

double non_absorbing_brf(const CanopyStructure& cs, const ViewGeometry& g) {
  // The leaf is identical at every wavelength, so one grid point suffices.
  constexpr double kWaxAirIndex = 1.5;
  const auto grid = WavelengthGrid(800, 800, 1);
  const auto oc = OpticalConstants::non_absorbing(grid, kWaxAirIndex);
  LeafBiochem bio;
  bio.n_struct = 1.5;
  const auto leaf = prospect(bio, oc);
  return FourStreamCanopy(cs, g).brf(leaf.reflectance[0], leaf.transmittance[0], 0.0);
}

}  // namespace dasf
