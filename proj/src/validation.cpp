#include "dasf/validation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "dasf/csv.hpp"
#include "dasf/error.hpp"
#include "dasf/parallel.hpp"

namespace dasf {

double rrmse(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size() || est.empty())
    throw InputError(fmt::format("rRMSE needs equal nonzero lengths ({} vs {})", est.size(),
                                 ref.size()));
  double ss = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    ss += (est[i] - ref[i]) * (est[i] - ref[i]);
    sum += ref[i];
  }
  const double n = static_cast<double>(est.size());
  const double mean = sum / n;
  if (!(mean > 0.0)) throw NumericalError("rRMSE reference has non-positive mean");
  return 100.0 * std::sqrt(ss / n) / mean;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string format_number(double v) { return fmt::format("{:g}", v); }

}  // namespace

// --- sweeps --------------------------------------------------------------------

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::lai: return "lai";
    case SweepAxis::lidf: return "lidf";
    case SweepAxis::vza: return "vza";
  }
  return "unknown";
}

SweepAxis parse_axis(std::string_view name) {
  if (name == "lai") return SweepAxis::lai;
  if (name == "lidf") return SweepAxis::lidf;
  if (name == "vza") return SweepAxis::vza;
  throw InputError(fmt::format("unknown sweep axis '{}' (expected lai, lidf or vza)", name));
}

void SweepConfig::validate() const {
  if (axes.empty()) throw InputError("sweep needs at least one axis");
  for (auto axis : axes) {
    if (axis == SweepAxis::lai && lai_values.empty()) throw InputError("LAI sweep has no values");
    if (axis == SweepAxis::lidf && lidf_kinds.empty()) throw InputError("LIDF sweep has no kinds");
    if (axis == SweepAxis::vza && vza_values.empty()) throw InputError("VZA sweep has no values");
  }
  if (subset < 0) throw InputError(fmt::format("subset {} must be >= 0", subset));
  base.validate();
  base_view.validate();
}

std::vector<SweepPoint> expand_sweep(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<SweepPoint> points;
  for (auto axis : cfg.axes) {
    switch (axis) {
      case SweepAxis::lai:
        for (double lai : cfg.lai_values) {
          auto cs = cfg.base;
          cs.lai = lai;
          cs.validate();
          points.push_back({axis, format_number(lai), cs, cfg.base_view});
        }
        break;
      case SweepAxis::lidf:
        for (auto kind : cfg.lidf_kinds) {
          auto cs = cfg.base;
          const auto ab = lidf_params(kind);
          cs.lidf_a = ab.a;
          cs.lidf_b = ab.b;
          points.push_back({axis, to_string(kind), cs, cfg.base_view});
        }
        break;
      case SweepAxis::vza:
        for (double vza : cfg.vza_values) {
          const auto g = ViewGeometry::make(cfg.base_view.sza_deg, vza, cfg.vza_raa_deg);
          points.push_back({axis, format_number(vza), cfg.base, g});
        }
        break;
    }
  }
  return points;
}

std::vector<ConfigReport> run_sweep(const SweepConfig& cfg, const SyntheticLeafSet& leaves,
                                    const DcModelCoefficients& coeffs, const OpticalConstants& oc,
                                    unsigned threads) {
  coeffs.validate();
  const auto points = expand_sweep(cfg);
  std::size_t n = leaves.leaves.size();
  if (cfg.subset > 0) n = std::min(n, static_cast<std::size_t>(cfg.subset));
  if (n == 0) throw InputError("sweep has no leaves");

  const BandWindow window;
  const auto w_r = slice_band(reference_albedo(oc), window);

  // Leaf optics are shared by every configuration.
  struct LeafBands {
    Spectrum rho, tau, albedo;
    double rho2260, tau2260;
  };
  std::vector<LeafBands> optics(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto leaf = prospect(leaves.leaves[i], oc);
    optics[i] = {slice_band(leaf.reflectance, window), slice_band(leaf.transmittance, window),
                 slice_band(leaf.albedo, window), leaf.reflectance.at(2260),
                 leaf.transmittance.at(2260)};
  });

  std::vector<ConfigReport> reports;
  reports.reserve(points.size());
  for (const auto& point : points) {
    const FourStreamCanopy model(point.canopy, point.view);
    struct Result {
      bool ok = false;
      double d0 = 0.0, s = 0.0, i = 0.0;
    };
    std::vector<Result> results(n);
    parallel_for(n, threads, [&](std::size_t li) {
      const auto& o = optics[li];
      std::vector<double> brf(o.rho.size());
      for (std::size_t j = 0; j < brf.size(); ++j) brf[j] = model.brf(o.rho[j], o.tau[j], 0.0);
      const Spectrum brf_w(o.rho.grid(), std::move(brf));
      const double brf2260 = model.brf(o.rho2260, o.tau2260, 0.0);
      try {
        const auto d0 = dasf0_from_true_albedo(brf_w, o.albedo, window);
        const auto reg = regress_brf(brf_w, w_r, window);
        const auto s = sdasf_from_regression(reg);
        const auto i = idasf_from_regression(reg, dc_model(brf_w.at(710), brf2260, coeffs));
        results[li] = {true, d0.value, s.value, i.value};
      } catch (const Error&) {
        results[li] = {};
      }
    });

    ConfigReport rep;
    rep.point = point;
    for (const auto& r : results) {
      if (!r.ok) {
        ++rep.n_failed;
        continue;
      }
      ++rep.n_ok;
      rep.dasf0.push_back(r.d0);
      rep.sdasf.values.push_back(r.s);
      rep.idasf.values.push_back(r.i);
    }
    rep.non_absorbing_brf = non_absorbing_brf(point.canopy, point.view);
    if (rep.n_ok > 0) {
      rep.mean_dasf0 = mean_of(rep.dasf0);
      for (auto* m : {&rep.sdasf, &rep.idasf}) {
        m->mean = mean_of(m->values);
        m->rrmse_pct = rrmse(m->values, rep.dasf0);
      }
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::vector<AxisSummary> summarize_sweep(const std::vector<ConfigReport>& reports) {
  std::vector<AxisSummary> out;
  for (auto axis : {SweepAxis::lai, SweepAxis::lidf, SweepAxis::vza}) {
    AxisSummary s{axis};
    int count = 0;
    for (const auto& r : reports) {
      if (r.point.axis != axis || r.n_ok == 0) continue;
      s.mean_rrmse_sdasf += r.sdasf.rrmse_pct;
      s.mean_rrmse_idasf += r.idasf.rrmse_pct;
      s.reduction_pct += 100.0 * (r.sdasf.rrmse_pct - r.idasf.rrmse_pct) / r.sdasf.rrmse_pct;
      ++count;
    }
    if (count == 0) continue;
    s.mean_rrmse_sdasf /= count;
    s.mean_rrmse_idasf /= count;
    s.reduction_pct /= count;
    out.push_back(s);
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<ConfigReport>& reports) {
  fmt::print(out, "axis,value,method,rrmse_pct,mean_dasf,mean_dasf0,non_absorbing_brf,n_ok,n_failed\n");
  for (const auto& r : reports) {
    const auto row = [&](const char* method, double rr, double mean) {
      fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", to_string(r.point.axis), r.point.label, method,
                 rr, mean, r.mean_dasf0, r.non_absorbing_brf, r.n_ok, r.n_failed);
    };
    row("dasf0", 0.0, r.mean_dasf0);
    row("sdasf", r.sdasf.rrmse_pct, r.sdasf.mean);
    row("idasf", r.idasf.rrmse_pct, r.idasf.mean);
  }
}

// --- measured libraries ----------------------------------------------------------

std::string to_string(Species s) {
  switch (s) {
    case Species::pine: return "pine";
    case Species::oak: return "oak";
    case Species::other: return "other";
  }
  return "other";
}

namespace {

// Builds a spectrum from unordered (wavelength, value) samples on a regular grid.
Spectrum assemble(std::vector<std::pair<int, double>> samples, const std::string& what) {
  std::sort(samples.begin(), samples.end());
  if (samples.size() < 2) throw InputError(fmt::format("{}: fewer than two wavelengths", what));
  const int step = samples[1].first - samples[0].first;
  if (step <= 0) throw InputError(fmt::format("{}: repeated wavelength {} nm", what, samples[0].first));
  std::vector<double> values;
  values.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].first != samples[0].first + static_cast<int>(i) * step)
      throw InputError(fmt::format("{}: wavelengths are not a regular grid near {} nm", what,
                                   samples[i].first));
    values.push_back(samples[i].second);
  }
  return Spectrum(WavelengthGrid(samples.front().first, samples.back().first, step),
                  std::move(values));
}

Species parse_species(const std::string& s, bool& known) {
  known = true;
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pine") return Species::pine;
  if (lower == "oak") return Species::oak;
  known = lower == "other";
  return Species::other;
}

}  // namespace

MeasuredLibrary ingest_measured_library(std::istream& spectra, std::istream& leaf,
                                        const std::string& spectra_origin,
                                        const std::string& leaf_origin) {
  MeasuredLibrary lib;

  struct Pending {
    std::string species;
    std::map<ViewKey, std::vector<std::pair<int, double>>> views;
  };
  std::map<std::string, Pending> canopies;
  std::vector<std::string> order;

  const auto st = csv::read(spectra, spectra_origin);
  {
    const auto c_id = st.column("canopy_id"), c_sp = st.column("species"),
               c_vza = st.column("vza_deg"), c_raa = st.column("raa_deg"),
               c_wl = st.column("wavelength_nm"), c_dsc = st.column("dsc");
    for (std::size_t r = 0; r < st.rows.size(); ++r) {
      const auto& row = st.rows[r];
      const auto line = st.lines[r];
      const auto& id = row[c_id];
      const ViewKey key{csv::to_double(row[c_vza], st.origin, line),
                        csv::to_double(row[c_raa], st.origin, line)};
      const int nm = csv::to_int(row[c_wl], st.origin, line);
      const double dsc = csv::to_double(row[c_dsc], st.origin, line);
      if (dsc < 0.0)
        throw InputError(fmt::format("{}:{}: negative DSC {}", st.origin, line, dsc));
      auto [it, inserted] = canopies.try_emplace(id);
      if (inserted) {
        order.push_back(id);
        it->second.species = row[c_sp];
      } else if (it->second.species != row[c_sp]) {
        throw InputError(fmt::format("{}:{}: canopy '{}' listed with species '{}' and '{}'",
                                     st.origin, line, id, it->second.species, row[c_sp]));
      }
      it->second.views[key].emplace_back(nm, std::numbers::pi * dsc);
    }
  }

  std::map<std::string, std::map<int, std::pair<double, int>>> albedo_sums;
  const auto lt = csv::read(leaf, leaf_origin);
  {
    const auto c_id = lt.column("canopy_id"), c_wl = lt.column("wavelength_nm"),
               c_r = lt.column("dhrf"), c_t = lt.column("dhtf");
    lt.column("sample_id");
    lt.column("side");
    for (std::size_t r = 0; r < lt.rows.size(); ++r) {
      const auto& row = lt.rows[r];
      const auto line = lt.lines[r];
      const int nm = csv::to_int(row[c_wl], lt.origin, line);
      const double dhrf = csv::to_double(row[c_r], lt.origin, line);
      const double dhtf = csv::to_double(row[c_t], lt.origin, line);
      if (dhrf < 0.0 || dhtf < 0.0)
        throw InputError(fmt::format("{}:{}: negative DHRF/DHTF", lt.origin, line));
      if (dhrf + dhtf > 1.0 + 1e-6)
        throw InputError(
            fmt::format("{}:{}: DHRF + DHTF = {} exceeds 1", lt.origin, line, dhrf + dhtf));
      auto& cell = albedo_sums[row[c_id]][nm];
      cell.first += dhrf + dhtf;
      cell.second += 1;
    }
  }

  for (const auto& [id, _] : albedo_sums)
    if (!canopies.contains(id))
      lib.warnings.push_back(fmt::format("leaf data for canopy '{}' has no canopy spectra", id));

  for (const auto& id : order) {
    const auto& pending = canopies.at(id);
    const auto sums = albedo_sums.find(id);
    if (sums == albedo_sums.end())
      throw InputError(fmt::format("canopy '{}' has no leaf albedo data in {}", id, lt.origin));
    MeasuredCanopy mc;
    mc.canopy_id = id;
    bool known = true;
    mc.species = parse_species(pending.species, known);
    if (!known)
      lib.warnings.push_back(fmt::format("canopy '{}': unknown species '{}' treated as other", id,
                                         pending.species));
    std::vector<std::pair<int, double>> albedo;
    for (const auto& [nm, cell] : sums->second) {
      const double w = cell.first / cell.second;
      if (!(w > 0.0))
        throw InputError(fmt::format("canopy '{}': leaf albedo {} at {} nm must be positive", id, w,
                                     nm));
      albedo.emplace_back(nm, w);
    }
    mc.leaf_albedo = assemble(std::move(albedo), fmt::format("leaf albedo of '{}'", id));
    for (const auto& [key, samples] : pending.views)
      mc.brf.emplace(key, assemble(samples, fmt::format("canopy '{}' view ({}, {})", id,
                                                         key.vza_deg, key.raa_deg)));
    lib.canopies.push_back(std::move(mc));
  }
  return lib;
}

MeasuredLibrary ingest_measured_library(const std::filesystem::path& spectra,
                                        const std::filesystem::path& leaf) {
  std::ifstream s(spectra), l(leaf);
  if (!s) throw InputError(fmt::format("cannot open spectra file '{}'", spectra.string()));
  if (!l) throw InputError(fmt::format("cannot open leaf file '{}'", leaf.string()));
  return ingest_measured_library(s, l, spectra.string(), leaf.string());
}

Spectrum resample_exact(const Spectrum& s, const WavelengthGrid& grid) {
  if (s.grid() == grid) return s;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.at(grid.wavelength(i));
  return Spectrum(grid, std::move(v));
}

namespace {

Histogram histogram(const std::vector<double>& values, double hi, int bins) {
  Histogram h;
  h.lo = 0.0;
  h.width = hi > 0.0 ? hi / bins : 1e-3;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor(v / h.width));
    h.counts[std::min(b, h.counts.size() - 1)] += 1;
  }
  return h;
}

}  // namespace

MeasuredReport validate_measured(const MeasuredLibrary& library, const DcModelCoefficients& coeffs,
                                 const OpticalConstants& oc, int histogram_bins, unsigned threads) {
  coeffs.validate();
  if (histogram_bins < 1) throw InputError("histogram needs at least one bin");
  const auto w_r = reference_albedo(oc);

  MeasuredReport rep;
  struct Job {
    const MeasuredCanopy* canopy;
    const ViewKey* view;
    const Spectrum* brf;
  };
  std::vector<Job> jobs;
  for (const auto& c : library.canopies)
    for (const auto& [key, brf] : c.brf) jobs.push_back({&c, &key, &brf});

  rep.observations.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    auto& obs = rep.observations[i];
    obs.canopy_id = job.canopy->canopy_id;
    obs.species = job.canopy->species;
    obs.view = *job.view;
    try {
      const auto& grid = job.brf->grid();
      const auto albedo = resample_exact(job.canopy->leaf_albedo, grid);
      const auto ref = resample_exact(w_r, grid);
      obs.dasf0 = dasf0_from_true_albedo(*job.brf, albedo).value;
      obs.sdasf = sdasf(*job.brf, ref).value;
      obs.idasf = idasf(*job.brf, ref, coeffs).value;
      obs.ae_sdasf = std::abs(obs.sdasf - obs.dasf0);
      obs.ae_idasf = std::abs(obs.idasf - obs.dasf0);
      obs.ok = true;
    } catch (const Error& e) {
      obs.error = e.what();
    }
  });

  for (auto species : {Species::pine, Species::oak, Species::other}) {
    SpeciesSummary sum;
    sum.species = species;
    std::vector<double> ae_s, ae_i;
    for (const auto& o : rep.observations) {
      if (o.species != species) continue;
      if (!o.ok) {
        ++sum.n_failed;
        continue;
      }
      ae_s.push_back(o.ae_sdasf);
      ae_i.push_back(o.ae_idasf);
    }
    sum.n_ok = static_cast<int>(ae_s.size());
    if (sum.n_ok + sum.n_failed == 0) continue;
    if (sum.n_ok > 0) {
      sum.mae_sdasf = mean_of(ae_s);
      sum.mae_idasf = mean_of(ae_i);
      sum.mae_reduction_pct =
          sum.mae_sdasf > 0.0 ? 100.0 * (sum.mae_sdasf - sum.mae_idasf) / sum.mae_sdasf : 0.0;
    }
    double hi = 0.0;
    for (double v : ae_s) hi = std::max(hi, v);
    for (double v : ae_i) hi = std::max(hi, v);
    sum.ae_sdasf = histogram(ae_s, hi, histogram_bins);
    sum.ae_idasf = histogram(ae_i, hi, histogram_bins);
    rep.n_failed += sum.n_failed;
    rep.species.push_back(std::move(sum));
  }

  std::map<std::pair<Species, ViewKey>, AngleCell> cells;
  for (const auto& o : rep.observations) {
    if (!o.ok) continue;
    auto& cell = cells[{o.species, o.view}];
    cell.species = o.species;
    cell.view = o.view;
    cell.count += 1;
    cell.mean_delta_ae += o.ae_idasf - o.ae_sdasf;
    cell.mean_dasf0 += o.dasf0;
  }
  for (auto& [_, cell] : cells) {
    cell.mean_delta_ae /= cell.count;
    cell.mean_dasf0 /= cell.count;
    rep.angle_map.push_back(cell);
  }
  return rep;
}

}  // namespace dasf
