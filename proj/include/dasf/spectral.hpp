#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dasf {

// Regular integer wavelength grid, inclusive at both ends.
class WavelengthGrid {
 public:
  WavelengthGrid() = default;
  WavelengthGrid(int start_nm, int end_nm, int step_nm = 1);

  // 400-2500 nm at 1 nm: the native sampling of the leaf coefficient tables.
  static WavelengthGrid standard() { return {}; }

  int start_nm() const { return start_nm_; }
  int end_nm() const { return end_nm_; }
  int step_nm() const { return step_nm_; }
  std::size_t size() const {
    return static_cast<std::size_t>((end_nm_ - start_nm_) / step_nm_) + 1;
  }

  bool contains(int nm) const;
  // Throws InputError when nm is not a grid point.
  std::size_t index_of(int nm) const;
  int wavelength(std::size_t index) const {
    return start_nm_ + static_cast<int>(index) * step_nm_;
  }

  friend bool operator==(const WavelengthGrid&, const WavelengthGrid&) = default;

 private:
  int start_nm_ = 400;
  int end_nm_ = 2500;
  int step_nm_ = 1;
};

// Inclusive wavelength interval used for band regressions.
struct BandWindow {
  int lo_nm = 710;
  int hi_nm = 790;

  // Parses "710:790".
  static BandWindow parse(const std::string& text);
  std::string to_string() const;
  friend bool operator==(const BandWindow&, const BandWindow&) = default;
};

// Unitless values sampled on a WavelengthGrid. Immutable after construction.
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(WavelengthGrid grid, std::vector<double> values);

  static Spectrum constant(const WavelengthGrid& grid, double value);
  static Spectrum generate(const WavelengthGrid& grid,
                           const std::function<double(int)>& value_at_nm);

  const WavelengthGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t index) const { return values_[index]; }

  // Exact grid lookup; throws InputError off the grid.
  double at(int nm) const { return values_[grid_.index_of(nm)]; }

  double min() const;
  double max() const;

  // Pointwise transform producing a spectrum on the same grid.
  Spectrum map(const std::function<double(double)>& fn) const;
  // Pointwise combination of two spectra on identical grids.
  Spectrum zip(const Spectrum& other,
               const std::function<double(double, double)>& fn) const;

  friend Spectrum operator+(const Spectrum& a, const Spectrum& b);
  friend Spectrum operator*(const Spectrum& a, double c);
  friend Spectrum operator*(double c, const Spectrum& a) { return a * c; }

 private:
  WavelengthGrid grid_;
  std::vector<double> values_;
};

// Contiguous sub-spectrum covering [w.lo_nm, w.hi_nm].
Spectrum slice_band(const Spectrum& s, const BandWindow& w);

inline double at(const Spectrum& s, int nm) { return s.at(nm); }

struct ViewGeometry {
  double sza_deg = 30.0;
  double vza_deg = 0.0;
  double raa_deg = 0.0;

  // Validates zeniths and wraps the azimuth into [0, 360).
  static ViewGeometry make(double sza_deg, double vza_deg, double raa_deg);
  void validate() const;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares y = slope * x + intercept.
// Throws InputError on length mismatch or fewer than 3 points and
// NumericalError when var(x) <= 1e-12.
LineFit linear_fit(std::span<const double> x, std::span<const double> y);

// Spectrum CSV: header `wavelength_nm,value`, ascending contiguous rows.
Spectrum read_spectrum_csv(std::istream& in, const std::string& origin = "<stream>");
Spectrum read_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(std::ostream& out, const Spectrum& s);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s);

}  // namespace dasf
