#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dasf/spectral.hpp"

namespace dasf {

// Leaf-material optical constants: refractive index and the specific
// absorption coefficients of each constituent on a full wavelength grid.
struct OpticalConstants {
  WavelengthGrid grid;
  std::vector<double> n;        // refractive index, > 1
  std::vector<double> k_cab;    // cm^2/ug
  std::vector<double> k_car;    // cm^2/ug
  std::vector<double> k_anth;   // cm^2/ug
  std::vector<double> k_brown;  // unitless
  std::vector<double> k_ewt;    // 1/cm
  std::vector<double> k_lma;    // cm^2/g

  // Absorption-free material with a constant refractive index.
  static OpticalConstants non_absorbing(const WavelengthGrid& grid, double refractive_index);
  void validate(const std::string& origin) const;
};

// Constants CSV: `wavelength_nm,n,k_cab,k_car,k_anth,k_brown,k_ewt,k_lma`.
OpticalConstants load_constants(const std::filesystem::path& path);
OpticalConstants parse_constants(std::istream& in, const std::string& origin);

// Resolution order: explicit path, DASF_CONSTANTS_PATH, bundled data file.
std::filesystem::path resolve_constants_path(const std::optional<std::string>& explicit_path);

struct LeafBiochem {
  double n_struct = 1.5;  // plate count N
  double cab = 0.0;       // ug/cm^2
  double car = 0.0;       // ug/cm^2
  double anth = 0.0;      // ug/cm^2
  double brown = 0.0;     // unitless
  double ewt = 0.0;       // cm
  double lma = 0.0;       // g/cm^2

  // Reference green leaf: Cab 16, EWT 0.005, LMA 0.002, N 1.5, others 0.
  static LeafBiochem reference();
  void validate() const;
};

struct LeafOptics {
  Spectrum reflectance;
  Spectrum transmittance;
  Spectrum albedo;  // reflectance + transmittance
  double surface_fraction = 0.0;
};

// Generalized plate model: one compact layer with rough-surface (40 deg)
// entry plus N - 1 homogeneous layers stacked with the Stokes relations.
LeafOptics prospect(const LeafBiochem& bio, const OpticalConstants& oc);

// Average transmittance of isotropic light within a cone of half-angle
// alpha_deg across a dielectric interface of relative index n.
double average_transmittance(double alpha_deg, double n);

// Albedo of the reference leaf.
Spectrum reference_albedo(const OpticalConstants& oc);

// Leaf albedo with a wavelength-flat surface reflection fraction s_L:
// s_L + (1 - s_L) * transformed_albedo.
Spectrum with_surface_fraction(const Spectrum& transformed_albedo, double surface_fraction);

// --- Within-leaf spectral invariants ---------------------------------------

struct WithinLeafFit {
  double r = 0.0;
  double p = 0.0;
  double epsilon = 0.0;  // r + p - 1
};

// Fits albedo / reference = r + p * albedo over the window.
WithinLeafFit leaf_invariant_fit(const Spectrum& albedo, const Spectrum& reference,
                                 const BandWindow& w = {});

struct FundamentalTerm {
  Spectrum w_leaf;
  double p_leaf = 0.0;
};

// W = albedo / (1 - p_leaf + p_leaf * albedo)
FundamentalTerm fundamental_from_albedo(const Spectrum& albedo, double p_leaf);
// albedo = (1 - p_leaf) W / (1 - p_leaf W)
Spectrum albedo_from_fundamental(const FundamentalTerm& f);

// W^t ~ (1 - q) W / (1 - q W) with q = (t - 1) / t.
Spectrum power_approx(const Spectrum& w_r, double t_c);

// Empirical within-leaf relations against Cab (ug/cm^2) and LMA (g/cm^2).
struct WithinLeafModels {
  double p0 = 0.0;      // recollision at reference LMA
  double p = 0.0;       // recollision, mean-line approximation
  double r = 0.0;
  double k_line = 0.0;  // slope of p against p0 at this LMA
  double b_line = 0.0;  // intercept of p against p0 at this LMA
};
WithinLeafModels within_leaf_models(double cab, double lma);

// Transformed albedo of a leaf whose chlorophyll and dry matter are t_c and
// t_m times the reference, given the reference transformed albedo.
Spectrum transformed_albedo_model(const Spectrum& reference, double t_c, double t_m,
                                  double cm_km, double p_leaf);

// Chooses p_leaf in [0, 0.999] minimizing the residual of regressing
// ln W_leaf on {k_cab, 1} over the window (dry-matter absorption is flat
// there, so ln W is affine in k_cab for the right p_leaf).
double fit_p_leaf(const Spectrum& transformed_albedo, const OpticalConstants& oc,
                  const BandWindow& w = {});

}  // namespace dasf
