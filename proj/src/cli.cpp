#include "dasf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "dasf/calibration.hpp"
#include "dasf/canopy.hpp"
#include "dasf/error.hpp"
#include "dasf/estimators.hpp"
#include "dasf/leaf_optics.hpp"
#include "dasf/validation.hpp"

namespace dasf::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// --- configuration -----------------------------------------------------------------

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// Inline JSON (starting with '{') or a path to a JSON file.
json json_argument(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw InputError(fmt::format("invalid inline JSON: {}", e.what()));
    }
  }
  return read_json_file(text);
}

template <class T>
T json_get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: key '{}': {}", where, key, e.what()));
  }
}

// Values given on the command line win over the --config file.
class Settings {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    file_ = read_json_file(path);
    if (!file_.is_object()) throw InputError(fmt::format("{}: config must be a JSON object", path));
    origin_ = path;
  }

  template <class T>
  void fill(const CLI::Option* opt, const char* key, T& target) const {
    if (opt->count() > 0 || !file_.contains(key)) return;
    target = json_get<T>(file_, key, origin_);
  }

  const json* block(const char* key) const {
    return file_.contains(key) ? &file_.at(key) : nullptr;
  }
  const std::string& origin() const { return origin_; }

 private:
  json file_ = json::object();
  std::string origin_ = "<config>";
};

DcModelCoefficients dc_from_json(const json& j, const std::string& where) {
  const json& c = j.contains("coefficients") ? j.at("coefficients") : j;
  DcModelCoefficients out{json_get<double>(c, "c1", where), json_get<double>(c, "c2", where),
                          json_get<double>(c, "c3", where), json_get<double>(c, "c4", where)};
  out.validate();
  return out;
}

json dc_to_json(const DcModelCoefficients& c) {
  return json{{"c1", c.c1}, {"c2", c.c2}, {"c3", c.c3}, {"c4", c.c4}};
}

struct CanopySetup {
  CanopyStructure structure;
  ViewGeometry view;
  std::string soil = "black";
};

void apply_canopy_json(const json& j, CanopySetup& s, const std::string& where) {
  if (!j.is_object()) throw InputError(fmt::format("{}: canopy must be a JSON object", where));
  if (j.contains("lai")) s.structure.lai = json_get<double>(j, "lai", where);
  if (j.contains("hotspot")) s.structure.hotspot = json_get<double>(j, "hotspot", where);
  if (j.contains("lidf")) {
    const auto& l = j.at("lidf");
    if (l.is_string()) {
      const auto ab = lidf_params(parse_lidf_kind(l.get<std::string>()));
      s.structure.lidf_a = ab.a;
      s.structure.lidf_b = ab.b;
    } else {
      s.structure.lidf_a = json_get<double>(l, "a", where);
      s.structure.lidf_b = json_get<double>(l, "b", where);
    }
  }
  if (j.contains("sza_deg")) s.view.sza_deg = json_get<double>(j, "sza_deg", where);
  if (j.contains("vza_deg")) s.view.vza_deg = json_get<double>(j, "vza_deg", where);
  if (j.contains("raa_deg")) s.view.raa_deg = json_get<double>(j, "raa_deg", where);
  if (j.contains("soil")) s.soil = json_get<std::string>(j, "soil", where);
}

CanopySetup finish_canopy(CanopySetup s) {
  s.view = ViewGeometry::make(s.view.sza_deg, s.view.vza_deg, s.view.raa_deg);
  s.structure.validate();
  return s;
}

Spectrum load_soil(const std::string& soil, const WavelengthGrid& grid) {
  if (soil.empty() || soil == "black") return black_soil(grid);
  return resample_exact(read_spectrum_csv(fs::path(soil)), grid);
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InputError(fmt::format("cannot create output directory '{}': {}", p.string(),
                                       ec.message()));
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw InputError(fmt::format("cannot write '{}'", p.string()));
  return f;
}

std::string num(double v) { return fmt::format("{:.6g}", v); }

// --- shared option groups ------------------------------------------------------------

struct Common {
  std::string config;
  std::string constants;
  unsigned threads = 0;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* constants_opt = nullptr;
};

struct BiochemOptions {
  LeafBiochem bio;
  std::vector<std::pair<CLI::Option*, const char*>> opts;

  void add(CLI::App* app) {
    opts = {{app->add_option("--n", bio.n_struct, "Leaf structure parameter N")->capture_default_str(), "n"},
            {app->add_option("--cab", bio.cab, "Chlorophyll a+b (ug/cm2)")->capture_default_str(), "cab"},
            {app->add_option("--car", bio.car, "Carotenoids (ug/cm2)")->capture_default_str(), "car"},
            {app->add_option("--anth", bio.anth, "Anthocyanins (ug/cm2)")->capture_default_str(), "anth"},
            {app->add_option("--brown", bio.brown, "Brown pigments")->capture_default_str(), "brown"},
            {app->add_option("--ewt", bio.ewt, "Equivalent water thickness (cm)")->capture_default_str(), "ewt"},
            {app->add_option("--lma", bio.lma, "Leaf mass per area (g/cm2)")->capture_default_str(), "lma"}};
  }
  void fill(const Settings& s) {
    const json* leaf = s.block("leaf");
    if (!leaf) return;
    double* targets[] = {&bio.n_struct, &bio.cab, &bio.car, &bio.anth, &bio.brown, &bio.ewt, &bio.lma};
    for (std::size_t i = 0; i < opts.size(); ++i)
      if (opts[i].first->count() == 0 && leaf->contains(opts[i].second))
        *targets[i] = json_get<double>(*leaf, opts[i].second, s.origin());
  }
};

struct CanopyOptions {
  std::string canopy_json;
  double lai = 5.0, hotspot = 0.01, sza = 30.0, vza = 0.0, raa = 0.0;
  std::string lidf, soil;
  CLI::Option *o_lai, *o_hot, *o_sza, *o_vza, *o_raa, *o_lidf, *o_soil, *o_json;

  void add(CLI::App* app) {
    o_json = app->add_option("--canopy", canopy_json,
                             "Canopy JSON (file or inline): lai, lidf, hotspot, sza_deg, vza_deg, "
                             "raa_deg, soil");
    o_lai = app->add_option("--lai", lai, "Leaf area index")->capture_default_str();
    o_lidf = app->add_option("--lidf", lidf,
                             "LIDF kind: planophile, erectophile, plagiophile, extremophile, "
                             "spherical, uniform (default uniform)");
    o_hot = app->add_option("--hotspot", hotspot, "Hotspot parameter")->capture_default_str();
    o_sza = app->add_option("--sza", sza, "Solar zenith angle (deg)")->capture_default_str();
    o_vza = app->add_option("--vza", vza, "View zenith angle (deg)")->capture_default_str();
    o_raa = app->add_option("--raa", raa, "Relative azimuth (deg)")->capture_default_str();
    o_soil = app->add_option("--soil", soil, "Soil spectrum CSV or 'black' (default)");
  }

  CanopySetup resolve(const Settings& s) const {
    CanopySetup setup;
    if (const json* block = s.block("canopy")) apply_canopy_json(*block, setup, s.origin());
    if (o_json->count() > 0) apply_canopy_json(json_argument(canopy_json), setup, canopy_json);
    if (o_lai->count()) setup.structure.lai = lai;
    if (o_hot->count()) setup.structure.hotspot = hotspot;
    if (o_lidf->count()) {
      const auto ab = lidf_params(parse_lidf_kind(lidf));
      setup.structure.lidf_a = ab.a;
      setup.structure.lidf_b = ab.b;
    }
    if (o_sza->count()) setup.view.sza_deg = sza;
    if (o_vza->count()) setup.view.vza_deg = vza;
    if (o_raa->count()) setup.view.raa_deg = raa;
    if (o_soil->count()) setup.soil = soil;
    return finish_canopy(setup);
  }
};

struct DcOptions {
  std::string text;
  CLI::Option* opt = nullptr;

  void add(CLI::App* app) {
    opt = app->add_option("--dc-coeffs", text,
                          "DC model coefficients: JSON file or inline {\"c1\":..,\"c2\":..,"
                          "\"c3\":..,\"c4\":..} (default: published values)");
  }
  DcModelCoefficients resolve(const Settings& s) const {
    if (opt->count() > 0) return dc_from_json(json_argument(text), text);
    if (const json* block = s.block("dc_coefficients")) {
      if (block->is_string()) return dc_from_json(json_argument(block->get<std::string>()), s.origin());
      return dc_from_json(*block, s.origin());
    }
    return DcModelCoefficients::published();
  }
};

OpticalConstants load_oc(const Common& c) {
  std::optional<std::string> path;
  if (!c.constants.empty()) path = c.constants;
  const auto resolved = resolve_constants_path(path);
  if (!fs::exists(resolved))
    throw InputError(fmt::format("constants file '{}' not found", resolved.string()));
  return load_constants(resolved);
}

// --- subcommands ----------------------------------------------------------------------

int cmd_constants_check(const Common& c, std::ostream& out) {
  std::optional<std::string> path;
  if (!c.constants.empty()) path = c.constants;
  const auto resolved = resolve_constants_path(path);
  const auto oc = load_oc(c);
  const auto [nmin, nmax] = std::minmax_element(oc.n.begin(), oc.n.end());
  fmt::print(out, "constants: {}\n", resolved.string());
  fmt::print(out, "grid: {}-{} nm step {} ({} rows)\n", oc.grid.start_nm(), oc.grid.end_nm(),
             oc.grid.step_nm(), oc.grid.size());
  fmt::print(out, "refractive index: {} to {}\n", num(*nmin), num(*nmax));
  fmt::print(out, "reference albedo at 710/750/790 nm: {} {} {}\n",
             num(reference_albedo(oc).at(710)), num(reference_albedo(oc).at(750)),
             num(reference_albedo(oc).at(790)));
  return kExitOk;
}

int cmd_leaf(const Common& c, BiochemOptions& b, bool reference, double surface_fraction,
             const std::string& out_dir, const std::string& prefix, std::ostream& out) {
  const auto oc = load_oc(c);
  const auto bio = reference ? LeafBiochem::reference() : b.bio;
  bio.validate();
  auto leaf = prospect(bio, oc);
  if (surface_fraction > 0.0) leaf.albedo = with_surface_fraction(leaf.albedo, surface_fraction);
  const auto dir = prepare_dir(out_dir);
  const auto name = prefix.empty() ? std::string(reference ? "reference" : "leaf") : prefix;
  const std::pair<const char*, const Spectrum*> files[] = {{"reflectance", &leaf.reflectance},
                                                           {"transmittance", &leaf.transmittance},
                                                           {"albedo", &leaf.albedo}};
  for (const auto& [suffix, s] : files) write_spectrum_csv(dir / fmt::format("{}_{}.csv", name, suffix), *s);
  fmt::print(out, "wrote {}_{{reflectance,transmittance,albedo}}.csv to {} ({} rows each)\n", name,
             dir.string(), leaf.albedo.size());
  return kExitOk;
}

int cmd_canopy(const Common& c, BiochemOptions& b, const CanopyOptions& co, const Settings& s,
               const std::string& refl, const std::string& trans, const std::string& out_path,
               std::ostream& out) {
  const auto setup = co.resolve(s);
  Spectrum rho, tau;
  if (!refl.empty() || !trans.empty()) {
    if (refl.empty() || trans.empty())
      throw InputError("--leaf-reflectance and --leaf-transmittance must be given together");
    rho = read_spectrum_csv(fs::path(refl));
    tau = read_spectrum_csv(fs::path(trans));
  } else {
    b.bio.validate();
    const auto leaf = prospect(b.bio, load_oc(c));
    rho = leaf.reflectance;
    tau = leaf.transmittance;
  }
  const auto soil = load_soil(setup.soil, rho.grid());
  const auto brf = FourStreamCanopy(setup.structure, setup.view).brf(rho, tau, soil);
  if (out_path.empty() || out_path == "-") {
    write_spectrum_csv(out, brf);
  } else {
    write_spectrum_csv(fs::path(out_path), brf);
    fmt::print(out, "wrote {} ({} rows)\n", out_path, brf.size());
  }
  return kExitOk;
}

json regression_json(const DasfEstimate& e) {
  return json{{"method", to_string(e.method)}, {"k", e.regression.k}, {"b", e.regression.b},
              {"r2", e.regression.r2},         {"dc", e.dc_used},     {"dasf", e.value}};
}

int cmd_estimate(const Common& c, const Settings& s, const DcOptions& dco, std::string brf_path,
                 std::string albedo_path, std::string true_albedo_path, std::string method,
                 std::string window_text, std::ostream& out, std::ostream& err) {
  if (brf_path.empty()) throw InputError("estimate needs a BRF spectrum CSV");
  const auto brf = read_spectrum_csv(fs::path(brf_path));
  const auto window = BandWindow::parse(window_text);
  const auto coeffs = dco.resolve(s);

  Spectrum w_r;
  if (!albedo_path.empty()) {
    w_r = resample_exact(read_spectrum_csv(fs::path(albedo_path)), brf.grid());
  } else {
    w_r = resample_exact(reference_albedo(load_oc(c)), brf.grid());
  }
  std::optional<Spectrum> w_true;
  if (!true_albedo_path.empty())
    w_true = resample_exact(read_spectrum_csv(fs::path(true_albedo_path)), brf.grid());

  std::vector<DasfMethod> methods;
  if (method == "all") {
    methods = {DasfMethod::sdasf, DasfMethod::idasf};
    if (w_true) methods.push_back(DasfMethod::dasf0);
  } else {
    methods = {parse_method(method)};
  }
  for (auto m : methods) {
    if (m == DasfMethod::idasf && !brf.grid().contains(2260))
      throw InputError(fmt::format("iDASF needs BRF at 2260 nm; '{}' covers {}-{} nm", brf_path,
                                   brf.grid().start_nm(), brf.grid().end_nm()));
    if (m == DasfMethod::dasf0 && !w_true)
      throw InputError("method dasf0 needs --true-albedo");
  }

  json results = json::array();
  for (auto m : methods) {
    try {
      switch (m) {
        case DasfMethod::sdasf: results.push_back(regression_json(sdasf(brf, w_r, window))); break;
        case DasfMethod::idasf: {
          auto j = regression_json(idasf(brf, w_r, coeffs, window));
          j["dc_coefficients"] = dc_to_json(coeffs);
          results.push_back(j);
          break;
        }
        case DasfMethod::dasf0:
          results.push_back(regression_json(dasf0_from_true_albedo(brf, *w_true, window)));
          break;
      }
    } catch (const EstimatorError& e) {
      json diag{{"error", e.what()},
                {"method", to_string(m)},
                {"k", e.regression().k},
                {"b", e.regression().b},
                {"r2", e.regression().r2},
                {"dc", e.dc()}};
      if (m == DasfMethod::idasf) {
        diag["dc_coefficients"] = dc_to_json(coeffs);
        try {
          diag["sdasf"] = sdasf(brf, w_r, window).value;
        } catch (const Error&) {
        }
      }
      fmt::print(out, "{}\n", diag.dump(2));
      fmt::print(err, "error: {}\n", e.what());
      return kExitNumerical;
    }
  }
  const json doc = results.size() == 1 ? results[0] : json{{"estimates", results}};
  fmt::print(out, "{}\n", doc.dump(2));
  return kExitOk;
}

SyntheticLeafSet make_leaves(const Settings& s, const std::string& stats_path,
                             const std::string& corr_path, int n, std::uint64_t seed) {
  auto stats = ConstituentStats::defaults();
  auto corr = source_correlation();
  std::string sp = stats_path, cp = corr_path;
  if (sp.empty())
    if (const json* b = s.block("stats"); b && b->is_string()) sp = b->get<std::string>();
  if (cp.empty())
    if (const json* b = s.block("corr"); b && b->is_string()) cp = b->get<std::string>();
  if (!sp.empty()) stats = load_stats(sp);
  if (!cp.empty()) corr = load_correlation(cp);
  return sample_leaves(stats, corr, n, seed);
}

json fit_json(const DcFit& fit) {
  return json{{"coefficients", dc_to_json(fit.coeffs)},
              {"published", dc_to_json(DcModelCoefficients::published())},
              {"report",
               {{"rmse", fit.report.rmse},
                {"r2", fit.report.r2},
                {"iterations", fit.report.iterations},
                {"converged", fit.report.converged},
                {"rmse_history", fit.report.rmse_history}}}};
}

json within_leaf_json(const WithinLeafReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins)
    bins.push_back({{"lma_mean", b.lma_mean}, {"k", b.k}, {"b", b.b}, {"count", b.count}});
  const auto line = [](const LineFit& f, double pub_slope, double pub_intercept) {
    return json{{"slope", f.slope},
                {"intercept", f.intercept},
                {"r2", f.r2},
                {"published_slope", pub_slope},
                {"published_intercept", pub_intercept}};
  };
  return json{{"n_leaves", r.n_leaves},
              {"bins", bins},
              {"k_vs_lma", line(r.k_vs_lma, 9.18, 0.98)},
              {"b_vs_lma", line(r.b_vs_lma, -9.16, 0.02)},
              {"p0_vs_inv_cab", line(r.p0_vs_inv_cab, -15.54, 1.04)},
              {"p_vs_inv_cab", line(r.p_vs_inv_cab, -16.63, 1.04)},
              {"r_vs_inv_cab", line(r.r_vs_inv_cab, 15.07, -0.02)},
              {"k_mean", r.k_mean},
              {"k_std", r.k_std},
              {"b_mean", r.b_mean},
              {"b_std", r.b_std},
              {"epsilon_min", r.epsilon_min},
              {"epsilon_max", r.epsilon_max}};
}

int cmd_calibrate(const Common& c, const Settings& s, const CanopyOptions& co, int n,
                  std::uint64_t seed, const std::string& stats, const std::string& corr,
                  bool two_stage, bool within_leaf, const std::string& out_dir,
                  std::ostream& out) {
  const auto oc = load_oc(c);
  const auto setup = co.resolve(s);
  if (setup.soil != "black") throw InputError("calibration assumes a black soil");
  const auto leaves = make_leaves(s, stats, corr, n, seed);
  const auto records = build_training_set(leaves, setup.structure, setup.view, oc, c.threads);
  const auto fit = two_stage ? fit_dc_model_two_stage(records) : fit_dc_model(records);

  const auto dir = prepare_dir(out_dir);
  {
    auto f = open_out(dir / "training.csv");
    write_training_csv(f, records);
  }
  auto doc = fit_json(fit);
  doc["procedure"] = two_stage ? "two-stage" : "direct";
  doc["seed"] = seed;
  doc["n_requested"] = leaves.n_requested;
  doc["n_retained"] = leaves.n_retained;
  if (within_leaf) doc["within_leaf"] = within_leaf_json(fit_within_leaf_relations(leaves, oc, 5, c.threads));
  {
    auto f = open_out(dir / "dc_fit.json");
    fmt::print(f, "{}\n", doc.dump(2));
  }
  fmt::print(out, "retained {} of {} leaves; DC fit c = ({}, {}, {}, {}), RMSE {}, R2 {}{}\n",
             leaves.n_retained, leaves.n_requested, num(fit.coeffs.c1), num(fit.coeffs.c2),
             num(fit.coeffs.c3), num(fit.coeffs.c4), num(fit.report.rmse), num(fit.report.r2),
             fit.report.converged ? "" : " (not converged)");
  return fit.report.converged ? kExitOk : kExitNumerical;
}

json quantiles(std::vector<double> v) {
  json q = json::object();
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  for (double p : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0}) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    q[fmt::format("{:g}", p)] = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }
  return q;
}

int cmd_sweep(const Common& c, const Settings& s, const DcOptions& dco, const std::string& axis,
              int n, std::uint64_t seed, int subset, const std::string& stats,
              const std::string& corr, bool refit, const std::string& out_dir,
              std::ostream& out) {
  const auto oc = load_oc(c);
  SweepConfig cfg;
  if (axis != "all") cfg.axes = {parse_axis(axis)};
  cfg.subset = subset;
  const auto leaves = make_leaves(s, stats, corr, n, seed);
  auto coeffs = dco.resolve(s);
  if (refit) {
    const auto records = build_training_set(leaves, cfg.base, cfg.base_view, oc, c.threads);
    coeffs = fit_dc_model(records).coeffs;
  }
  const auto reports = run_sweep(cfg, leaves, coeffs, oc, c.threads);

  const auto dir = prepare_dir(out_dir);
  {
    auto f = open_out(dir / "sweep.csv");
    write_sweep_csv(f, reports);
  }
  json plot = json::array();
  int failed = 0;
  for (const auto& r : reports) {
    failed += r.n_failed;
    plot.push_back({{"axis", to_string(r.point.axis)},
                    {"value", r.point.label},
                    {"non_absorbing_brf", r.non_absorbing_brf},
                    {"dasf0", quantiles(r.dasf0)},
                    {"sdasf", quantiles(r.sdasf.values)},
                    {"idasf", quantiles(r.idasf.values)},
                    {"rrmse_sdasf", r.sdasf.rrmse_pct},
                    {"rrmse_idasf", r.idasf.rrmse_pct}});
  }
  {
    auto f = open_out(dir / "sweep_plot.json");
    fmt::print(f, "{}\n", json{{"dc_coefficients", dc_to_json(coeffs)}, {"configurations", plot}}.dump(2));
  }
  for (const auto& a : summarize_sweep(reports))
    fmt::print(out, "{}: mean rRMSE sDASF {:.2f}% iDASF {:.2f}% (reduction {:.1f}%)\n",
               to_string(a.axis), a.mean_rrmse_sdasf, a.mean_rrmse_idasf, a.reduction_pct);
  if (failed > 0) {
    fmt::print(out, "{} leaf estimates failed and were excluded\n", failed);
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_validate_measured(const Common& c, const Settings& s, const DcOptions& dco,
                          const std::string& spectra, const std::string& leaf, int bins,
                          const std::string& out_dir, std::ostream& out, std::ostream& err) {
  if (spectra.empty() || leaf.empty())
    throw InputError("validate-measured needs --spectra and --leaf");
  const auto oc = load_oc(c);
  const auto lib = ingest_measured_library(fs::path(spectra), fs::path(leaf));
  for (const auto& w : lib.warnings) fmt::print(err, "warning: {}\n", w);
  const auto rep = validate_measured(lib, dco.resolve(s), oc, bins, c.threads);

  const auto dir = prepare_dir(out_dir);
  {
    auto f = open_out(dir / "observations.csv");
    fmt::print(f, "canopy_id,species,vza_deg,raa_deg,ok,dasf0,sdasf,idasf,ae_sdasf,ae_idasf,error\n");
    for (const auto& o : rep.observations)
      fmt::print(f, "{},{},{},{},{},{},{},{},{},{},\"{}\"\n", o.canopy_id, to_string(o.species),
                 o.view.vza_deg, o.view.raa_deg, o.ok ? 1 : 0, o.dasf0, o.sdasf, o.idasf,
                 o.ae_sdasf, o.ae_idasf, o.error);
  }
  json species = json::array();
  for (const auto& sp : rep.species) {
    const auto hist = [](const Histogram& h) {
      return json{{"lo", h.lo}, {"width", h.width}, {"counts", h.counts}};
    };
    species.push_back({{"species", to_string(sp.species)},
                       {"n_ok", sp.n_ok},
                       {"n_failed", sp.n_failed},
                       {"mae_sdasf", sp.mae_sdasf},
                       {"mae_idasf", sp.mae_idasf},
                       {"mae_reduction_pct", sp.mae_reduction_pct},
                       {"ae_histogram_sdasf", hist(sp.ae_sdasf)},
                       {"ae_histogram_idasf", hist(sp.ae_idasf)}});
  }
  json cells = json::array();
  for (const auto& cell : rep.angle_map)
    cells.push_back({{"species", to_string(cell.species)},
                     {"vza_deg", cell.view.vza_deg},
                     {"raa_deg", cell.view.raa_deg},
                     {"count", cell.count},
                     {"mean_delta_ae", cell.mean_delta_ae},
                     {"mean_dasf0", cell.mean_dasf0}});
  {
    auto f = open_out(dir / "measured_report.json");
    fmt::print(f, "{}\n", json{{"species", species}, {"angle_map", cells}}.dump(2));
  }
  for (const auto& sp : rep.species)
    fmt::print(out, "{}: MAE sDASF {} iDASF {} (reduction {:.1f}%, {} observations, {} failed)\n",
               to_string(sp.species), num(sp.mae_sdasf), num(sp.mae_idasf), sp.mae_reduction_pct,
               sp.n_ok, sp.n_failed);
  return rep.n_failed > 0 ? kExitPartial : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Directional area scattering factor (DASF) estimation toolkit", "dasf"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "JSON config file; command-line flags override it");
  common.threads_opt =
      app.add_option("--threads", common.threads, "Worker threads (0 = all cores)")->capture_default_str();
  common.constants_opt = app.add_option(
      "--constants", common.constants,
      "Optical constants CSV (default: $DASF_CONSTANTS_PATH, then the bundled file)");

  auto* c_check = app.add_subcommand("constants-check", "Load and summarize the optical constants");

  auto* c_leaf = app.add_subcommand("leaf", "Leaf reflectance, transmittance and albedo");
  BiochemOptions leaf_bio;
  leaf_bio.add(c_leaf);
  bool leaf_reference = false;
  double surface_fraction = 0.0;
  std::string leaf_out = ".", leaf_prefix;
  c_leaf->add_flag("--reference", leaf_reference,
                   "Use the reference leaf (Cab 16, EWT 0.005, LMA 0.002, N 1.5)");
  c_leaf->add_option("--surface-fraction", surface_fraction,
                     "Flat surface reflection fraction added to the albedo (0-0.05)");
  auto* leaf_out_opt = c_leaf->add_option("--out-dir", leaf_out, "Output directory")->capture_default_str();
  c_leaf->add_option("--prefix", leaf_prefix, "File name prefix (default 'leaf' or 'reference')");

  auto* c_canopy = app.add_subcommand("canopy", "Canopy BRF of a leaf over a soil");
  BiochemOptions canopy_bio;
  canopy_bio.add(c_canopy);
  CanopyOptions canopy_opts;
  canopy_opts.add(c_canopy);
  std::string canopy_refl, canopy_trans, canopy_out;
  c_canopy->add_option("--leaf-reflectance", canopy_refl, "Leaf reflectance CSV instead of biochemistry");
  c_canopy->add_option("--leaf-transmittance", canopy_trans, "Leaf transmittance CSV");
  c_canopy->add_option("--out", canopy_out, "Output CSV (default stdout)");

  auto* c_est = app.add_subcommand("estimate", "Estimate DASF from a BRF spectrum");
  std::string est_brf, est_albedo, est_true, est_method = "sdasf", est_window = "710:790";
  DcOptions est_dc;
  c_est->add_option("brf", est_brf, "BRF spectrum CSV")->required();
  c_est->add_option("--reference-albedo", est_albedo,
                    "Reference albedo CSV (default: computed from the constants)");
  c_est->add_option("--true-albedo", est_true, "Leaf albedo CSV for the dasf0 estimate");
  c_est->add_option("--method", est_method, "sdasf, idasf, dasf0 or all")
      ->check(CLI::IsMember({"sdasf", "idasf", "dasf0", "all"}))
      ->capture_default_str();
  auto* est_window_opt =
      c_est->add_option("--window", est_window, "Regression window lo:hi in nm")->capture_default_str();
  est_dc.add(c_est);

  auto* c_cal = app.add_subcommand("calibrate", "Synthetic leaves, training cloud and DC model fit");
  int cal_n = 2000;
  std::uint64_t cal_seed = kDefaultSeed;
  std::string cal_stats, cal_corr, cal_out = ".";
  bool cal_two_stage = false, cal_within = false;
  auto* cal_n_opt = c_cal->add_option("--n", cal_n, "Leaves to draw")->capture_default_str();
  auto* cal_seed_opt = c_cal->add_option("--seed", cal_seed, "Random seed")->capture_default_str();
  c_cal->add_option("--stats", cal_stats, "Constituent statistics JSON");
  c_cal->add_option("--corr", cal_corr, "Correlation matrix JSON");
  CanopyOptions cal_canopy;
  cal_canopy.add(c_cal);
  c_cal->add_flag("--two-stage", cal_two_stage, "Rotate-then-fit procedure instead of the direct fit");
  c_cal->add_flag("--within-leaf", cal_within, "Also fit the within-leaf recollision relations");
  auto* cal_out_opt = c_cal->add_option("--out-dir", cal_out, "Output directory")->capture_default_str();

  auto* c_sweep = app.add_subcommand("sweep", "LAI / LIDF / VZA sensitivity sweeps");
  std::string sw_axis = "all", sw_stats, sw_corr, sw_out = ".";
  int sw_n = 2000, sw_subset = 0;
  std::uint64_t sw_seed = kDefaultSeed;
  bool sw_refit = false;
  DcOptions sw_dc;
  c_sweep->add_option("--axis", sw_axis, "lai, lidf, vza or all")
      ->check(CLI::IsMember({"lai", "lidf", "vza", "all"}))
      ->capture_default_str();
  auto* sw_n_opt = c_sweep->add_option("--n", sw_n, "Leaves to draw")->capture_default_str();
  auto* sw_seed_opt = c_sweep->add_option("--seed", sw_seed, "Random seed")->capture_default_str();
  c_sweep->add_option("--subset", sw_subset, "Use only the first n retained leaves (0 = all)");
  c_sweep->add_option("--stats", sw_stats, "Constituent statistics JSON");
  c_sweep->add_option("--corr", sw_corr, "Correlation matrix JSON");
  c_sweep->add_flag("--refit", sw_refit, "Refit the DC model on the same leaves before sweeping");
  sw_dc.add(c_sweep);
  auto* sw_out_opt = c_sweep->add_option("--out-dir", sw_out, "Output directory")->capture_default_str();

  auto* c_meas = app.add_subcommand("validate-measured", "Evaluate estimators on a measured library");
  std::string m_spectra, m_leaf, m_out = ".";
  int m_bins = 20;
  DcOptions m_dc;
  c_meas->add_option("--spectra", m_spectra,
                     "Canopy CSV: canopy_id,species,vza_deg,raa_deg,wavelength_nm,dsc");
  c_meas->add_option("--leaf", m_leaf, "Leaf CSV: canopy_id,sample_id,side,wavelength_nm,dhrf,dhtf");
  c_meas->add_option("--bins", m_bins, "AE histogram bins")->capture_default_str();
  m_dc.add(c_meas);
  auto* m_out_opt = c_meas->add_option("--out-dir", m_out, "Output directory")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    fmt::print(out, "{}", o.str());
    fmt::print(err, "{}", e2.str());
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    Settings s;
    s.load(common.config);
    s.fill(common.threads_opt, "threads", common.threads);
    s.fill(common.constants_opt, "constants", common.constants);

    if (c_check->parsed()) return cmd_constants_check(common, out);
    if (c_leaf->parsed()) {
      leaf_bio.fill(s);
      s.fill(leaf_out_opt, "output_dir", leaf_out);
      return cmd_leaf(common, leaf_bio, leaf_reference, surface_fraction, leaf_out, leaf_prefix, out);
    }
    if (c_canopy->parsed()) {
      canopy_bio.fill(s);
      return cmd_canopy(common, canopy_bio, canopy_opts, s, canopy_refl, canopy_trans, canopy_out, out);
    }
    if (c_est->parsed()) {
      s.fill(est_window_opt, "window", est_window);
      return cmd_estimate(common, s, est_dc, est_brf, est_albedo, est_true, est_method, est_window,
                          out, err);
    }
    if (c_cal->parsed()) {
      s.fill(cal_n_opt, "n", cal_n);
      s.fill(cal_seed_opt, "seed", cal_seed);
      s.fill(cal_out_opt, "output_dir", cal_out);
      return cmd_calibrate(common, s, cal_canopy, cal_n, cal_seed, cal_stats, cal_corr, cal_two_stage,
                           cal_within, cal_out, out);
    }
    if (c_sweep->parsed()) {
      s.fill(sw_n_opt, "n", sw_n);
      s.fill(sw_seed_opt, "seed", sw_seed);
      s.fill(sw_out_opt, "output_dir", sw_out);
      if (const json* block = s.block("sweep")) {
        if (block->contains("subset") && sw_subset == 0) sw_subset = json_get<int>(*block, "subset", s.origin());
        if (block->contains("axis") && sw_axis == "all") sw_axis = json_get<std::string>(*block, "axis", s.origin());
      }
      return cmd_sweep(common, s, sw_dc, sw_axis, sw_n, sw_seed, sw_subset, sw_stats, sw_corr,
                       sw_refit, sw_out, out);
    }
    if (c_meas->parsed()) {
      s.fill(m_out_opt, "output_dir", m_out);
      return cmd_validate_measured(common, s, m_dc, m_spectra, m_leaf, m_bins, m_out, out, err);
    }
  } catch (const InputError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitInput;
  } catch (const NumericalError& e) {
    fmt::print(err, "numerical error: {}\n", e.what());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace dasf::cli
