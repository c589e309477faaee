#include "dasf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "dasf/csv.hpp"
#include "dasf/error.hpp"

namespace dasf {

WavelengthGrid::WavelengthGrid(int start_nm, int end_nm, int step_nm)
    : start_nm_(start_nm), end_nm_(end_nm), step_nm_(step_nm) {
  if (step_nm <= 0 || end_nm < start_nm || (end_nm - start_nm) % step_nm != 0)
    throw InputError(
        fmt::format("invalid wavelength grid {}-{} step {}", start_nm, end_nm, step_nm));
}

bool WavelengthGrid::contains(int nm) const {
  return nm >= start_nm_ && nm <= end_nm_ && (nm - start_nm_) % step_nm_ == 0;
}

std::size_t WavelengthGrid::index_of(int nm) const {
  if (!contains(nm))
    throw InputError(fmt::format("wavelength {} nm is not on the grid {}-{} nm (step {})",
                                 nm, start_nm_, end_nm_, step_nm_));
  return static_cast<std::size_t>((nm - start_nm_) / step_nm_);
}

BandWindow BandWindow::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw InputError(fmt::format("window '{}' must look like LO:HI", text));
  BandWindow w;
  w.lo_nm = csv::to_int(text.substr(0, colon), "--window", 0);
  w.hi_nm = csv::to_int(text.substr(colon + 1), "--window", 0);
  if (w.lo_nm > w.hi_nm)
    throw InputError(fmt::format("window '{}' has lo > hi", text));
  return w;
}

std::string BandWindow::to_string() const { return fmt::format("{}:{}", lo_nm, hi_nm); }

Spectrum::Spectrum(WavelengthGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw InputError(fmt::format("spectrum has {} values for a grid of {} points",
                                 values_.size(), grid_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw NumericalError(
          fmt::format("non-finite spectrum value at {} nm", grid_.wavelength(i)));
}

Spectrum Spectrum::constant(const WavelengthGrid& grid, double value) {
  return Spectrum(grid, std::vector<double>(grid.size(), value));
}

Spectrum Spectrum::generate(const WavelengthGrid& grid,
                            const std::function<double(int)>& value_at_nm) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = value_at_nm(grid.wavelength(i));
  return Spectrum(grid, std::move(v));
}

double Spectrum::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Spectrum::max() const { return *std::max_element(values_.begin(), values_.end()); }

Spectrum Spectrum::map(const std::function<double(double)>& fn) const {
  std::vector<double> v(values_.size());
  std::transform(values_.begin(), values_.end(), v.begin(), fn);
  return Spectrum(grid_, std::move(v));
}

Spectrum Spectrum::zip(const Spectrum& other,
                       const std::function<double(double, double)>& fn) const {
  if (!(grid_ == other.grid_)) throw InputError("spectra are sampled on different grids");
  std::vector<double> v(values_.size());
  std::transform(values_.begin(), values_.end(), other.values_.begin(), v.begin(), fn);
  return Spectrum(grid_, std::move(v));
}

Spectrum operator+(const Spectrum& a, const Spectrum& b) {
  return a.zip(b, [](double x, double y) { return x + y; });
}

Spectrum operator*(const Spectrum& a, double c) {
  return a.map([c](double x) { return x * c; });
}

Spectrum slice_band(const Spectrum& s, const BandWindow& w) {
  const auto& g = s.grid();
  if (w.lo_nm > w.hi_nm || !g.contains(w.lo_nm) || !g.contains(w.hi_nm))
    throw InputError(fmt::format("window {}-{} nm lies outside the spectrum grid {}-{} nm",
                                 w.lo_nm, w.hi_nm, g.start_nm(), g.end_nm()));
  const auto lo = g.index_of(w.lo_nm);
  const auto hi = g.index_of(w.hi_nm);
  auto values = s.values();
  return Spectrum(WavelengthGrid(w.lo_nm, w.hi_nm, g.step_nm()),
                  std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(lo),
                                      values.begin() + static_cast<std::ptrdiff_t>(hi) + 1));
}

ViewGeometry ViewGeometry::make(double sza_deg, double vza_deg, double raa_deg) {
  ViewGeometry g{sza_deg, vza_deg, std::fmod(raa_deg, 360.0)};
  if (g.raa_deg < 0.0) g.raa_deg += 360.0;
  if (g.raa_deg >= 360.0) g.raa_deg = 0.0;
  g.validate();
  return g;
}

void ViewGeometry::validate() const {
  if (!(sza_deg >= 0.0 && sza_deg < 90.0))
    throw InputError(fmt::format("solar zenith {} deg outside [0, 90)", sza_deg));
  if (!(vza_deg >= 0.0 && vza_deg < 90.0))
    throw InputError(fmt::format("view zenith {} deg outside [0, 90)", vza_deg));
  if (!(raa_deg >= 0.0 && raa_deg < 360.0))
    throw InputError(fmt::format("relative azimuth {} deg outside [0, 360)", raa_deg));
}

LineFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw InputError(fmt::format("linear_fit: {} x values but {} y values", x.size(), y.size()));
  const std::size_t n = x.size();
  if (n < 3) throw InputError(fmt::format("linear_fit needs at least 3 points, got {}", n));

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx / static_cast<double>(n) <= 1e-12)
    throw NumericalError("linear_fit: x has (near-)zero variance; the BRF band is flat");

  LineFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

Spectrum read_spectrum_csv(std::istream& in, const std::string& origin) {
  const auto table = csv::read(in, origin);
  const auto wl_col = table.column("wavelength_nm");
  const auto v_col = table.column("value");
  if (table.rows.size() < 1) throw InputError(fmt::format("{}: no data rows", origin));

  std::vector<int> wl;
  std::vector<double> values;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    wl.push_back(csv::to_int(table.rows[r][wl_col], origin, table.lines[r]));
    values.push_back(csv::to_double(table.rows[r][v_col], origin, table.lines[r]));
  }
  const int step = wl.size() > 1 ? wl[1] - wl[0] : 1;
  for (std::size_t i = 1; i < wl.size(); ++i)
    if (wl[i] - wl[i - 1] != step || step <= 0)
      throw InputError(fmt::format("{}:{}: wavelengths must ascend on a regular grid", origin,
                                   table.lines[i]));
  return Spectrum(WavelengthGrid(wl.front(), wl.back(), step), std::move(values));
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open spectrum file '{}'", path.string()));
  return read_spectrum_csv(in, path.string());
}

void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
  out << "wavelength_nm,value\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    fmt::print(out, "{},{}\n", s.grid().wavelength(i), s[i]);
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
  std::ofstream out(path);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  write_spectrum_csv(out, s);
}

}  // namespace dasf
