#include "dasf/leaf_optics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>

#include <fmt/core.h>

#include "dasf/csv.hpp"
#include "dasf/error.hpp"
#include "dasf/expint.hpp"

#ifndef DASF_DEFAULT_CONSTANTS
#define DASF_DEFAULT_CONSTANTS "data/prospect_d_constants.csv"
#endif

namespace dasf {

// --- constants ---------------------------------------------------------------

OpticalConstants OpticalConstants::non_absorbing(const WavelengthGrid& grid,
                                                 double refractive_index) {
  const auto n = grid.size();
  OpticalConstants oc;
  oc.grid = grid;
  oc.n.assign(n, refractive_index);
  oc.k_cab.assign(n, 0.0);
  oc.k_car.assign(n, 0.0);
  oc.k_anth.assign(n, 0.0);
  oc.k_brown.assign(n, 0.0);
  oc.k_ewt.assign(n, 0.0);
  oc.k_lma.assign(n, 0.0);
  oc.validate("non-absorbing constants");
  return oc;
}

void OpticalConstants::validate(const std::string& origin) const {
  const auto n_points = grid.size();
  const std::pair<const char*, const std::vector<double>*> series[] = {
      {"n", &n},           {"k_cab", &k_cab},     {"k_car", &k_car}, {"k_anth", &k_anth},
      {"k_brown", &k_brown}, {"k_ewt", &k_ewt}, {"k_lma", &k_lma}};
  for (const auto& [name, values] : series) {
    if (values->size() != n_points)
      throw InputError(fmt::format("{}: column {} has {} values, grid has {}", origin, name,
                                   values->size(), n_points));
    for (std::size_t i = 0; i < n_points; ++i) {
      const double v = (*values)[i];
      if (!std::isfinite(v) || v < 0.0)
        throw InputError(fmt::format("{}: {} at {} nm is negative or non-finite ({})", origin,
                                     name, grid.wavelength(i), v));
    }
  }
  for (std::size_t i = 0; i < n_points; ++i)
    if (!(n[i] > 1.0))
      throw InputError(fmt::format("{}: refractive index at {} nm must exceed 1 (got {})",
                                   origin, grid.wavelength(i), n[i]));
}

OpticalConstants parse_constants(std::istream& in, const std::string& origin) {
  const auto table = csv::read(in, origin);
  const auto c_wl = table.column("wavelength_nm");
  const auto c_n = table.column("n");
  const auto c_cab = table.column("k_cab");
  const auto c_car = table.column("k_car");
  const auto c_anth = table.column("k_anth");
  const auto c_brown = table.column("k_brown");
  const auto c_ewt = table.column("k_ewt");
  const auto c_lma = table.column("k_lma");

  const auto expected = WavelengthGrid::standard();
  if (table.rows.size() != expected.size())
    throw InputError(fmt::format("{}: expected {} rows covering {}-{} nm, found {}", origin,
                                 expected.size(), expected.start_nm(), expected.end_nm(),
                                 table.rows.size()));

  OpticalConstants oc;
  oc.grid = expected;
  int previous = expected.start_nm() - 1;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.lines[r];
    const int wl = csv::to_int(row[c_wl], origin, line);
    if (wl <= previous)
      throw InputError(
          fmt::format("{}:{}: wavelength {} is not strictly ascending", origin, line, wl));
    if (wl != expected.wavelength(r))
      throw InputError(fmt::format("{}:{}: expected wavelength {}, found {} (gap in coverage)",
                                   origin, line, expected.wavelength(r), wl));
    previous = wl;
    oc.n.push_back(csv::to_double(row[c_n], origin, line));
    oc.k_cab.push_back(csv::to_double(row[c_cab], origin, line));
    oc.k_car.push_back(csv::to_double(row[c_car], origin, line));
    oc.k_anth.push_back(csv::to_double(row[c_anth], origin, line));
    oc.k_brown.push_back(csv::to_double(row[c_brown], origin, line));
    oc.k_ewt.push_back(csv::to_double(row[c_ewt], origin, line));
    oc.k_lma.push_back(csv::to_double(row[c_lma], origin, line));
  }
  oc.validate(origin);
  return oc;
}

OpticalConstants load_constants(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open constants file '{}'", path.string()));
  return parse_constants(in, path.string());
}

std::filesystem::path resolve_constants_path(const std::optional<std::string>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return *explicit_path;
  if (const char* env = std::getenv("DASF_CONSTANTS_PATH"); env != nullptr && *env != '\0')
    return env;
  return DASF_DEFAULT_CONSTANTS;
}

// --- plate model -----------------------------------------------------------

LeafBiochem LeafBiochem::reference() {
  LeafBiochem bio;
  bio.n_struct = 1.5;
  bio.cab = 16.0;
  bio.ewt = 0.005;
  bio.lma = 0.002;
  return bio;
}

void LeafBiochem::validate() const {
  if (!(n_struct >= 1.0))
    throw InputError(fmt::format("leaf structure parameter N = {} must be >= 1", n_struct));
  const std::pair<const char*, double> fields[] = {{"cab", cab},     {"car", car},
                                                   {"anth", anth},   {"brown", brown},
                                                   {"ewt", ewt},     {"lma", lma}};
  for (const auto& [name, value] : fields)
    if (!(value >= 0.0) || !std::isfinite(value))
      throw InputError(fmt::format("leaf {} = {} must be a finite value >= 0", name, value));
}

double average_transmittance(double alpha_deg, double n) {
  const double n2 = n * n;
  const double np = n2 + 1.0;
  const double nm = n2 - 1.0;
  const double a = (n + 1.0) * (n + 1.0) / 2.0;
  const double k = -(n2 - 1.0) * (n2 - 1.0) / 4.0;
  const double sa = std::sin(alpha_deg * std::numbers::pi / 180.0);
  const double sa2 = sa * sa;

  const double b1 =
      alpha_deg == 90.0 ? 0.0 : std::sqrt((sa2 - np / 2.0) * (sa2 - np / 2.0) + k);
  const double b2 = sa2 - np / 2.0;
  const double b = b1 - b2;
  const double b3 = b * b * b;
  const double a3 = a * a * a;
  const double ts = (k * k / (6.0 * b3) + k / b - b / 2.0) - (k * k / (6.0 * a3) + k / a - a / 2.0);

  const double tp1 = -2.0 * n2 * (b - a) / (np * np);
  const double tp2 = -2.0 * n2 * np * std::log(b / a) / (nm * nm);
  const double tp3 = n2 * (1.0 / b - 1.0 / a) / 2.0;
  const double tp4 = 16.0 * n2 * n2 * (n2 * n2 + 1.0) *
                     std::log((2.0 * np * b - nm * nm) / (2.0 * np * a - nm * nm)) /
                     (np * np * np * nm * nm);
  const double tp5 = 16.0 * n2 * n2 * n2 *
                     (1.0 / (2.0 * np * b - nm * nm) - 1.0 / (2.0 * np * a - nm * nm)) /
                     (np * np * np);
  const double tp = tp1 + tp2 + tp3 + tp4 + tp5;
  return (ts + tp) / (2.0 * sa2);
}

namespace {

constexpr double kSurfaceConeDeg = 40.0;

struct PlateResult {
  double reflectance;
  double transmittance;
};

PlateResult leaf_at(double n_struct, double n, double k) {
  const double tau = plate_transmissivity(k);

  const double talf = average_transmittance(kSurfaceConeDeg, n);
  const double ralf = 1.0 - talf;
  const double t12 = average_transmittance(90.0, n);
  const double r12 = 1.0 - t12;
  const double t21 = t12 / (n * n);
  const double r21 = 1.0 - t21;

  // Elementary layer, top face illuminated within the surface cone.
  double denom = 1.0 - r21 * r21 * tau * tau;
  const double ta = talf * tau * t21 / denom;
  const double ra = ralf + r21 * tau * ta;
  // Elementary layer, isotropic illumination.
  const double t = t12 * tau * t21 / denom;
  const double r = r12 + r21 * tau * t;

  double r_sub = 0.0;
  double t_sub = 0.0;
  if (1.0 - r - t < 1e-12) {
    // Non-absorbing pile of N - 1 plates.
    t_sub = t / (t + (1.0 - t) * (n_struct - 1.0));
    r_sub = 1.0 - t_sub;
  } else {
    // Stokes relations for N - 1 identical plates (N real).
    const double d = std::sqrt((1.0 + r + t) * (1.0 + r - t) * (1.0 - r + t) * (1.0 - r - t));
    const double rq = r * r;
    const double tq = t * t;
    const double a = (1.0 + rq - tq + d) / (2.0 * r);
    const double b = (1.0 - rq + tq + d) / (2.0 * t);
    const double b_nm1 = std::pow(b, n_struct - 1.0);
    const double b_n2 = b_nm1 * b_nm1;
    const double a2 = a * a;
    const double den = a2 * b_n2 - 1.0;
    r_sub = a * (b_n2 - 1.0) / den;
    t_sub = b_nm1 * (a2 - 1.0) / den;
    if (!std::isfinite(r_sub) || !std::isfinite(t_sub)) {
      // Opaque stack: b^(N-1) overflows, the sub-layers transmit nothing.
      r_sub = 1.0 / a;
      t_sub = 0.0;
    }
  }

  denom = 1.0 - r_sub * r;
  return {ra + ta * r_sub * t / denom, ta * t_sub / denom};
}

}  // namespace

LeafOptics prospect(const LeafBiochem& bio, const OpticalConstants& oc) {
  bio.validate();
  const auto n_points = oc.grid.size();
  std::vector<double> refl(n_points), tran(n_points), alb(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double k = (bio.cab * oc.k_cab[i] + bio.car * oc.k_car[i] + bio.anth * oc.k_anth[i] +
                      bio.brown * oc.k_brown[i] + bio.ewt * oc.k_ewt[i] + bio.lma * oc.k_lma[i]) /
                     bio.n_struct;
    const auto [r, t] = leaf_at(bio.n_struct, oc.n[i], k);
    if (!std::isfinite(r) || !std::isfinite(t))
      throw NumericalError(
          fmt::format("plate model produced a non-finite value at {} nm", oc.grid.wavelength(i)));
    refl[i] = r;
    tran[i] = t;
    alb[i] = r + t;
  }
  return LeafOptics{Spectrum(oc.grid, std::move(refl)), Spectrum(oc.grid, std::move(tran)),
                    Spectrum(oc.grid, std::move(alb)), 0.0};
}

Spectrum reference_albedo(const OpticalConstants& oc) {
  return prospect(LeafBiochem::reference(), oc).albedo;
}

Spectrum with_surface_fraction(const Spectrum& transformed_albedo, double surface_fraction) {
  if (!(surface_fraction >= 0.0 && surface_fraction <= 0.05))
    throw InputError(
        fmt::format("surface fraction {} outside [0, 0.05]", surface_fraction));
  return transformed_albedo.map(
      [s = surface_fraction](double w) { return s + (1.0 - s) * w; });
}

// --- within-leaf spectral invariants ---------------------------------------

WithinLeafFit leaf_invariant_fit(const Spectrum& albedo, const Spectrum& reference,
                                 const BandWindow& w) {
  const auto x = slice_band(albedo, w);
  const auto ref = slice_band(reference, w);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(ref[i] > 0.0))
      throw InputError(fmt::format("reference albedo is not positive at {} nm",
                                   ref.grid().wavelength(i)));
    y[i] = x[i] / ref[i];
  }
  const auto fit = linear_fit(x.values(), y);
  return {fit.intercept, fit.slope, fit.intercept + fit.slope - 1.0};
}

FundamentalTerm fundamental_from_albedo(const Spectrum& albedo, double p_leaf) {
  if (!(p_leaf >= 0.0 && p_leaf < 1.0))
    throw InputError(fmt::format("p_leaf = {} outside [0, 1)", p_leaf));
  return {albedo.map([p_leaf](double w) { return w / (1.0 - p_leaf + p_leaf * w); }), p_leaf};
}

Spectrum albedo_from_fundamental(const FundamentalTerm& f) {
  const double p = f.p_leaf;
  if (!(p >= 0.0 && p < 1.0)) throw InputError(fmt::format("p_leaf = {} outside [0, 1)", p));
  return f.w_leaf.map([p](double w) { return (1.0 - p) * w / (1.0 - p * w); });
}

Spectrum power_approx(const Spectrum& w_r, double t_c) {
  if (!(t_c > 0.0)) throw InputError(fmt::format("t_c = {} must be positive", t_c));
  const double q = (t_c - 1.0) / t_c;
  return w_r.map([q](double w) { return (1.0 - q) * w / (1.0 - q * w); });
}

WithinLeafModels within_leaf_models(double cab, double lma) {
  if (!(cab >= 10.0))
    throw InputError(
        fmt::format("Cab = {} ug/cm^2 is below the green-leaf floor of 10 ug/cm^2", cab));
  if (!(lma >= 0.0)) throw InputError(fmt::format("LMA = {} g/cm^2 must be >= 0", lma));
  WithinLeafModels m;
  m.p0 = 1.04 - 15.54 / cab;
  m.k_line = 9.18 * lma + 0.98;
  m.b_line = -9.16 * lma + 0.02;
  m.p = 1.04 - 16.63 / cab;
  m.r = 15.07 / cab - 0.02;
  return m;
}

Spectrum transformed_albedo_model(const Spectrum& reference, double t_c, double t_m,
                                  double cm_km, double p_leaf) {
  if (!(t_c > 0.0) || !(t_m > 0.0))
    throw InputError(fmt::format("t_c = {} and t_m = {} must be positive", t_c, t_m));
  if (!(p_leaf >= 0.0 && p_leaf < 1.0))
    throw InputError(fmt::format("p_leaf = {} outside [0, 1)", p_leaf));
  const double a = std::exp((t_c - t_m) * cm_km);
  const double q = (t_c - 1.0) / t_c;
  const double b = (q - p_leaf + p_leaf * a * (1.0 - q)) / (1.0 - p_leaf);
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (b * reference[i] >= 1.0)
      throw NumericalError(fmt::format(
          "transformed albedo model is non-physical: B * reference = {} at {} nm",
          b * reference[i], reference.grid().wavelength(i)));
  return reference.map([a, q, b](double w) { return a * (1.0 - q) * w / (1.0 - b * w); });
}

double fit_p_leaf(const Spectrum& transformed_albedo, const OpticalConstants& oc,
                  const BandWindow& w) {
  const auto band = slice_band(transformed_albedo, w);
  std::vector<double> k_cab(band.size());
  for (std::size_t i = 0; i < band.size(); ++i) {
    k_cab[i] = oc.k_cab[oc.grid.index_of(band.grid().wavelength(i))];
    if (!(band[i] > 0.0 && band[i] <= 1.0))
      throw InputError(fmt::format("albedo {} at {} nm outside (0, 1]", band[i],
                                   band.grid().wavelength(i)));
  }

  std::vector<double> log_w(band.size());
  const auto residual = [&](double p) {
    for (std::size_t i = 0; i < band.size(); ++i)
      log_w[i] = std::log(band[i] / (1.0 - p + p * band[i]));
    const auto fit = linear_fit(k_cab, log_w);
    double ss = 0.0;
    for (std::size_t i = 0; i < band.size(); ++i) {
      const double e = log_w[i] - (fit.slope * k_cab[i] + fit.intercept);
      ss += e * e;
    }
    return ss;
  };

  // Coarse scan, then golden-section refinement around the best cell.
  constexpr double kUpper = 0.999;
  constexpr int kCells = 999;
  int best = 0;
  double best_value = residual(0.0);
  for (int i = 1; i <= kCells; ++i) {
    const double v = residual(kUpper * i / kCells);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  double lo = kUpper * std::max(best - 1, 0) / kCells;
  double hi = kUpper * std::min(best + 1, kCells) / kCells;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = residual(x1);
  double f2 = residual(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = residual(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = residual(x2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace dasf
