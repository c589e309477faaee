#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "dasf/leaf_optics.hpp"
#include "dasf/spectral.hpp"

namespace dasf {

enum class LidfKind { planophile, erectophile, plagiophile, extremophile, spherical, uniform };

inline constexpr std::array<LidfKind, 6> kAllLidfKinds = {
    LidfKind::planophile, LidfKind::erectophile, LidfKind::plagiophile,
    LidfKind::extremophile, LidfKind::spherical, LidfKind::uniform};

struct LidfParams {
  double a = 0.0;
  double b = 0.0;
};

LidfParams lidf_params(LidfKind kind);
std::string to_string(LidfKind kind);
LidfKind parse_lidf_kind(std::string_view name);

// Leaf inclination classes given by their upper bounds in degrees (last is 90).
class InclinationClasses {
 public:
  explicit InclinationClasses(std::vector<double> upper_bounds_deg);

  // SAIL convention: 10-degree classes to 80, then 2-degree classes to 90.
  static InclinationClasses sail13();
  // n classes of equal width.
  static InclinationClasses equal(int n);

  std::size_t size() const { return upper_.size(); }
  double lower(std::size_t i) const { return i == 0 ? 0.0 : upper_[i - 1]; }
  double upper(std::size_t i) const { return upper_[i]; }
  double center(std::size_t i) const { return 0.5 * (lower(i) + upper(i)); }

 private:
  std::vector<double> upper_;
};

// Cumulative two-parameter inclination distribution at theta (degrees).
double lidf_cumulative(double a, double b, double theta_deg);

// Probability mass per inclination class; sums to 1.
// Throws InputError unless |a| + |b| <= 1.
std::vector<double> lidf_density(double a, double b,
                                 const InclinationClasses& classes = InclinationClasses::sail13());

struct CanopyStructure {
  double lai = 5.0;
  double lidf_a = 0.0;
  double lidf_b = 0.0;
  double hotspot = 0.01;

  static CanopyStructure with_lidf(LidfKind kind, double lai = 5.0, double hotspot = 0.01);
  void validate() const;
};

// Four-stream turbid-medium canopy over a Lambertian soil. The geometry
// dependent factors are computed once per structure/geometry pair.
class FourStreamCanopy {
 public:
  FourStreamCanopy(const CanopyStructure& cs, const ViewGeometry& g,
                   const InclinationClasses& classes = InclinationClasses::sail13());

  // Bidirectional reflectance factor for leaf reflectance rho, leaf
  // transmittance tau and soil reflectance at one wavelength.
  double brf(double rho, double tau, double soil) const;
  Spectrum brf(const Spectrum& rho, const Spectrum& tau, const Spectrum& soil) const;

  double extinction_sun() const { return ks_; }
  double extinction_view() const { return ko_; }

 private:
  double brf_absorbing(double rho, double tau, double soil) const;

  double lai_;
  double ks_, ko_, bf_, sob_, sof_;
  double sdb_, sdf_, dob_, dof_, ddb_, ddf_;
  double tss_, too_, tsstoo_, sumint_;
};

Spectrum black_soil(const WavelengthGrid& grid = WavelengthGrid::standard());

Spectrum canopy_brf(const LeafOptics& leaf, const CanopyStructure& cs, const ViewGeometry& g,
                    const Spectrum& soil);

// Spectral-invariant canopy: BRF = rho_i0 * w / (1 - p * w).
struct SIForwardParams {
  double rho_i0 = 0.0;
  double p = 0.0;

  double dasf() const { return rho_i0 / (1.0 - p); }
  void validate() const;
};

Spectrum si_forward_brf(const SIForwardParams& params, const Spectrum& albedo);

// BRF of the canopy filled with absorption-free leaves (surface refractive
// index 1.5) over black soil; flat across wavelengths.
Spectrum non_absorbing_brf_spectrum(const CanopyStructure& cs, const ViewGeometry& g);
double non_absorbing_brf(const CanopyStructure& cs, const ViewGeometry& g);

}  // namespace dasf
