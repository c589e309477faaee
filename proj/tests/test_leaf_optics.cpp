#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dasf/error.hpp"
#include "dasf/leaf_optics.hpp"
#include "support.hpp"

using namespace dasf;

namespace {

std::string constants_text() { return test::slurp(test::constants_path()); }

Spectrum window_ramp(double lo, double hi) {
  return Spectrum::generate(WavelengthGrid::standard(),
                            [=](int nm) { return lo + (hi - lo) * (nm - 400) / 2100.0; });
}

}  // namespace

TEST_CASE("load_constants") {
  const auto& oc = test::constants();
  CHECK(oc.grid.size() == 2101);
  CHECK(oc.n.size() == 2101);
  CHECK(oc.k_lma.size() == 2101);

  const auto text = constants_text();
  SUBCASE("missing k_lma column") {
    std::istringstream in(text.substr(0, text.find('\n')).replace(text.find(",k_lma"), 6, ""));
    CHECK_THROWS_AS(parse_constants(in, "<test>"), InputError);
  }
  SUBCASE("repeated wavelength") {
    std::istringstream lines(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(lines, line)) {
      out << line << '\n';
      if (line.rfind("500,", 0) == 0) out << line << '\n';
    }
    std::istringstream in(out.str());
    CHECK_THROWS_AS(parse_constants(in, "<test>"), InputError);
  }
  SUBCASE("negative coefficient") {
    auto broken = text;
    const auto pos = broken.find("\n401,");
    const auto end = broken.find('\n', pos + 1);
    broken.replace(pos + 1, end - pos - 1, "401,1.5,-1,0,0,0,0,0");
    std::istringstream in(broken);
    CHECK_THROWS_AS(parse_constants(in, "<test>"), InputError);
  }
  CHECK_THROWS_AS(load_constants("/nonexistent/constants.csv"), InputError);
}

TEST_CASE("prospect conserves energy without absorbers") {
  const auto& oc = test::constants();
  for (double n : {1.0, 1.5, 2.5}) {
    LeafBiochem bio;
    bio.n_struct = n;
    const auto leaf = prospect(bio, oc);
    for (std::size_t i = 0; i < leaf.albedo.size(); ++i)
      REQUIRE(std::abs(leaf.albedo[i] - 1.0) < 1e-6);
  }
}

TEST_CASE("prospect matches an independent plate-model implementation") {
  const auto& oc = test::constants();
  const auto t = csv::read_file((test::data_dir() / "prospect_oracle.csv").string());
  const auto cases = test::read_json(test::data_dir() / "prospect_oracle_cases.json");
  REQUIRE(t.rows.size() == 2101);
  for (const auto& [name, c] : cases.items()) {
    CAPTURE(name);
    LeafBiochem bio;
    bio.n_struct = c["n"];
    bio.cab = c["cab"];
    bio.car = c["car"];
    bio.anth = c["anth"];
    bio.brown = c["brown"];
    bio.ewt = c["ewt"];
    bio.lma = c["lma"];
    const auto leaf = prospect(bio, oc);
    const auto cr = t.column(name + "_r"), ct = t.column(name + "_t");
    double worst = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      worst = std::max(worst, std::abs(leaf.reflectance[i] - std::stod(t.rows[i][cr])));
      worst = std::max(worst, std::abs(leaf.transmittance[i] - std::stod(t.rows[i][ct])));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("prospect opaque limit and output bounds") {
  LeafBiochem bio = LeafBiochem::reference();
  bio.cab = 1e4;
  const auto leaf = prospect(bio, test::constants());
  CHECK(leaf.transmittance.at(680) < 1e-3);
  for (std::size_t i = 0; i < leaf.albedo.size(); ++i) {
    CHECK(leaf.reflectance[i] >= 0.0);
    CHECK(leaf.transmittance[i] >= 0.0);
    CHECK(leaf.albedo[i] <= 1.0 + 1e-9);
  }
  LeafBiochem bad;
  bad.cab = -1;
  CHECK_THROWS_AS(prospect(bad, test::constants()), InputError);
  bad = LeafBiochem{};
  bad.n_struct = 0.5;
  CHECK_THROWS_AS(prospect(bad, test::constants()), InputError);
}

TEST_CASE("increasing an absorber never increases albedo") {
  const auto& oc = test::constants();
  LeafBiochem base;
  base.cab = 30;
  base.car = 6;
  base.anth = 1;
  base.brown = 0.1;
  base.ewt = 0.01;
  base.lma = 0.005;
  const auto w0 = prospect(base, oc).albedo;
  double LeafBiochem::*fields[] = {&LeafBiochem::cab,   &LeafBiochem::car, &LeafBiochem::anth,
                                   &LeafBiochem::brown, &LeafBiochem::ewt, &LeafBiochem::lma};
  for (auto f : fields) {
    for (double factor : {1.1, 2.0}) {
      auto bio = base;
      bio.*f *= factor;
      const auto w1 = prospect(bio, oc).albedo;
      for (std::size_t i = 0; i < w0.size(); ++i) REQUIRE(w1[i] <= w0[i] + 1e-12);
    }
  }
}

TEST_CASE("reference albedo") {
  const auto& oc = test::constants();
  const auto leaf = prospect(LeafBiochem::reference(), oc);
  const auto w1 = reference_albedo(oc), w2 = reference_albedo(oc);
  for (std::size_t i = 0; i < w1.size(); ++i) {
    CHECK(w1[i] == leaf.reflectance[i] + leaf.transmittance[i]);
    CHECK(w1[i] == w2[i]);
  }
  CHECK(slice_band(w1, {710, 790}).max() > w1.at(680));
}

TEST_CASE("surface fraction") {
  const auto w = test::reference();
  const auto s = with_surface_fraction(w, 0.02);
  CHECK(s.at(800) == doctest::Approx(0.02 + 0.98 * w.at(800)));
  CHECK_THROWS_AS(with_surface_fraction(w, 0.1), InputError);
}

TEST_CASE("leaf_invariant_fit") {
  const auto& w_r = test::reference();
  auto f = leaf_invariant_fit(w_r, w_r);
  CHECK(std::abs(f.p) < 1e-12);
  CHECK(f.r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(f.epsilon) < 1e-12);

  // albedo = r * w_r / (1 - p * w_r) satisfies albedo / w_r = r + p * albedo.
  const auto w = w_r.map([](double v) { return 0.8 * v / (1.0 - 0.25 * v); });
  f = leaf_invariant_fit(w, w_r);
  CHECK(std::abs(f.r - 0.8) < 1e-9);
  CHECK(std::abs(f.p - 0.25) < 1e-9);
  CHECK(std::abs(f.epsilon - 0.05) < 1e-9);

  CHECK_THROWS_AS(leaf_invariant_fit(Spectrum::constant(WavelengthGrid::standard(), 0.5), w_r),
                  NumericalError);
}

TEST_CASE("fundamental term and albedo are inverse") {
  const auto w = test::sigmoid_albedo(0.05, 0.95, 720, 15);
  auto f = fundamental_from_albedo(w, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(f.w_leaf[i] == w[i]);

  const auto one = Spectrum::constant(WavelengthGrid::standard(), 1.0);
  f = fundamental_from_albedo(one, 0.7);
  CHECK(f.w_leaf.at(500) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(albedo_from_fundamental({one, 0.4}).at(900) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(albedo_from_fundamental({w, 0.0}).at(900) == w.at(900));

  const auto half = Spectrum::constant(WavelengthGrid::standard(), 0.5);
  CHECK(albedo_from_fundamental({half, 0.9}).at(700) == doctest::Approx(0.05 / 0.55));

  for (double p : {0.0, 0.3, 0.9, 0.99}) {
    const auto back = albedo_from_fundamental(fundamental_from_albedo(w, p));
    for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(std::abs(back[i] - w[i]) < 1e-12);
  }
  CHECK_THROWS_AS(fundamental_from_albedo(w, 1.0), InputError);
}

TEST_CASE("power approximation") {
  const auto w = test::sigmoid_albedo(0.3, 0.9, 720, 15);
  auto a = power_approx(w, 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(a[i] == doctest::Approx(w[i]).epsilon(1e-15));
  const auto one = Spectrum::constant(WavelengthGrid::standard(), 1.0);
  CHECK(power_approx(one, 2.0).at(750) == doctest::Approx(1.0).epsilon(1e-15));

  // Reference fundamental term with within-leaf recollision 0.9; brute-force
  // comparison against exact powers gives a worst case of 0.88 % here.
  const auto ref_w = fundamental_from_albedo(test::reference(), 0.9).w_leaf;
  double worst = 0.0;
  for (double t = 0.5; t <= 4.0 + 1e-12; t += 0.01) {
    const auto approx = slice_band(power_approx(ref_w, t), {710, 790});
    const auto exact = slice_band(ref_w, {710, 790}).map([t](double v) { return std::pow(v, t); });
    for (std::size_t i = 0; i < exact.size(); ++i)
      worst = std::max(worst, std::abs(approx[i] / exact[i] - 1.0));
  }
  CHECK(worst < 0.01);
  CHECK_THROWS_AS(power_approx(w, 0.0), InputError);
}

TEST_CASE("within-leaf relation models") {
  auto m = within_leaf_models(16, 0.002);
  CHECK(m.p0 == doctest::Approx(0.06875));
  CHECK(m.p == doctest::Approx(0.000625));
  CHECK(m.r == doctest::Approx(0.921875));
  CHECK(m.k_line == doctest::Approx(0.99836));
  CHECK(m.b_line == doctest::Approx(0.00168));

  const auto stats = ConstituentStats::defaults();
  for (double lma = stats.lma.min; lma <= 0.0155; lma += 0.0005) {
    m = within_leaf_models(30, lma);
    CHECK(m.k_line >= 0.99);
    CHECK(m.k_line <= 1.13);
    CHECK(m.b_line >= -0.13);
    CHECK(m.b_line <= 0.01);
  }
  CHECK_THROWS_AS(within_leaf_models(9.9, 0.002), InputError);
}

TEST_CASE("transformed albedo model") {
  const auto& w_r = test::reference();
  auto w = transformed_albedo_model(w_r, 1.0, 1.0, 0.05, 0.9);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(w_r[i]).epsilon(1e-14));

  // Dry-matter-neutral case reduces to the chlorophyll-only form.
  for (double t : {0.5, 2.0, 3.0}) {
    w = transformed_albedo_model(w_r, t, t, 0.05, 0.6);
    const auto direct = test::q_transform(w_r, (t - 1.0) / t);
    for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(std::abs(w[i] - direct[i]) < 1e-12);
  }

  // A = e^-0.05, B = (0 - 0.9 + 0.9 A) / 0.1
  const double A = std::exp(-0.05), B = (-0.9 + 0.9 * A) / 0.1;
  CHECK(A == doctest::Approx(0.9512).epsilon(1e-4));
  CHECK(B == doctest::Approx(-0.4392).epsilon(1e-3));
  w = transformed_albedo_model(w_r, 1.0, 2.0, 0.05, 0.9);
  CHECK(w.at(750) == doctest::Approx(A * w_r.at(750) / (1.0 - B * w_r.at(750))).epsilon(1e-14));

  CHECK_THROWS_AS(transformed_albedo_model(window_ramp(0.5, 0.99), 4.0, 0.5, 1.0, 0.5),
                  NumericalError);
}

TEST_CASE("fit_p_leaf recovers the recollision of a constructed leaf") {
  const auto& oc = test::constants();
  std::vector<double> lw(oc.grid.size());
  for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = std::exp(-(20.0 * oc.k_cab[i] + 0.01));
  for (double p : {0.3, 0.8}) {
    const auto albedo = albedo_from_fundamental({Spectrum(oc.grid, lw), p});
    CHECK(fit_p_leaf(albedo, oc) == doctest::Approx(p).epsilon(1e-4));
  }
  const double p_ref = fit_p_leaf(test::reference(), oc);
  CHECK(p_ref >= 0.0);
  CHECK(p_ref <= 0.999);
}
