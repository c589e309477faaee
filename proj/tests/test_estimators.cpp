#include <doctest.h>

#include <cmath>
#include <random>

#include "dasf/canopy.hpp"
#include "dasf/error.hpp"
#include "dasf/estimators.hpp"
#include "support.hpp"

using namespace dasf;

namespace {

// Canopy BRF of a leaf differing from the reference only in chlorophyll.
Spectrum q_canopy(const Spectrum& w_r, double rho_i0, double p, double q) {
  return si_forward_brf({rho_i0, p}, test::q_transform(w_r, q));
}

// Canopy BRF of a leaf differing from the reference in chlorophyll and dry matter.
Spectrum biased_canopy(const Spectrum& w_r, const SIForwardParams& params, double t_c, double t_m,
                       double cm_km, double p_leaf) {
  return si_forward_brf(params, transformed_albedo_model(w_r, t_c, t_m, cm_km, p_leaf));
}

DasfRegression line(double k, double b) {
  DasfRegression r;
  r.k = k;
  r.b = b;
  return r;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("methods round trip through names") {
  for (auto m : {DasfMethod::sdasf, DasfMethod::idasf, DasfMethod::dasf0})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("cdasf"), InputError);
}

TEST_CASE("regress_brf on closed-form canopies") {
  const auto w_r = test::sigmoid_albedo(0.08, 0.92, 715, 12);
  auto reg = regress_brf(q_canopy(w_r, 0.4, 0.6, 0.0), w_r);
  CHECK(near(reg.k, 0.6, 1e-12));
  CHECK(near(reg.b, 0.4, 1e-12));
  CHECK(reg.window == BandWindow{710, 790});

  reg = regress_brf(q_canopy(w_r, 0.4, 0.6, 0.5), w_r);
  CHECK(near(reg.k, 0.8, 1e-12));
  CHECK(near(reg.b, 0.2, 1e-12));

  reg = regress_brf(0.3 * w_r, w_r);
  CHECK(near(reg.k, 0.0, 1e-12));
  CHECK(near(reg.b, 0.3, 1e-12));

  const auto dark = Spectrum::generate(WavelengthGrid::standard(),
                                       [](int nm) { return nm == 750 ? 0.0 : 0.5; });
  CHECK_THROWS_AS(regress_brf(w_r, dark), InputError);
  CHECK_THROWS_AS(regress_brf(Spectrum::constant(WavelengthGrid::standard(), 0.2), w_r),
                  NumericalError);
}

TEST_CASE("sdasf is unbiased for chlorophyll-only deviations") {
  const auto w_r = test::sigmoid_albedo(0.08, 0.92, 715, 12);
  CHECK(near(sdasf(q_canopy(w_r, 0.4, 0.6, 0.0), w_r).value, 1.0, 1e-12));
  CHECK(near(sdasf(q_canopy(w_r, 0.4, 0.6, 0.5), w_r).value, 1.0, 1e-12));
  const auto e = sdasf(q_canopy(w_r, 0.4, 0.6, 0.5), w_r);
  CHECK(e.method == DasfMethod::sdasf);
  CHECK(e.dc_used == 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rho(0.1, 0.6), p(0.3, 0.9), q(0.0, 0.75);
  for (int i = 0; i < 50; ++i) {
    const double r = rho(rng), pp = p(rng), qq = q(rng);
    const auto w = test::random_albedo(rng);
    CHECK(near(sdasf(q_canopy(w, r, pp, qq), w).value, r / (1.0 - pp), 1e-9));
  }
}

TEST_CASE("sdasf guards against a unit slope") {
  CHECK_THROWS_AS(sdasf_from_regression(line(1.0, 0.3)), EstimatorError);
  try {
    sdasf_from_regression(line(1.0, 0.3));
  } catch (const EstimatorError& e) {
    CHECK(e.regression().b == 0.3);
  }
}

TEST_CASE("worked dry-matter example") {
  const auto& w_r = test::reference();
  const SIForwardParams params{0.4, 0.6};
  const auto f = bias_factors(1, 2, 0.05, 0.9);
  CHECK(near(f.A, 0.9512, 1e-4));
  CHECK(near(f.D, 0.9512, 1e-4));
  CHECK(near(f.C, 0.5131, 1e-3));
  CHECK(near(f.dc, 0.488, 1e-3));
  CHECK(near(f.q, 0.0, 0.0));
  CHECK(near(f.dc, (1.0 - std::exp(-0.05)) / (1.0 * 0.1), 1e-12));

  const auto brf = biased_canopy(w_r, params, 1, 2, 0.05, 0.9);
  const auto reg = regress_brf(brf, w_r);
  CHECK(near(reg.b, 0.3805, 1e-3));
  CHECK(near(reg.k, 0.1315, 1e-3));

  const auto s = sdasf(brf, w_r);
  CHECK(near(s.value, 0.438, 1e-3));
  CHECK(near(s.value, dasf_prime_analytic(params, f), 1e-9));
  CHECK(near(dasf_prime_analytic(params, f), 0.4 / (1.0 - 0.6 + f.C), 1e-15));

  const auto i = idasf_with_dc(brf, w_r, f.dc);
  CHECK(near(i.value, 1.0, 1e-9));
  CHECK(i.dc_used == f.dc);
  CHECK(near(dc0(reg, params.dasf()), f.dc, 1e-9));
}

TEST_CASE("bias factor properties") {
  const auto f = bias_factors(1.7, 1.7, 0.08, 0.5);
  CHECK(f.A == 1.0);
  CHECK(f.C == 0.0);
  CHECK(f.dc == 0.0);

  // Needle-like leaves (more dry matter than chlorophyll) push DC positive.
  CHECK(bias_factors(0.6, 3.0, 0.05, 0.8).dc > 0.0);
  CHECK(bias_factors(3.0, 0.6, 0.05, 0.8).dc < 0.0);

  CHECK(near(dasf_prime_analytic({0.3, 0.5}, bias_factors(1, 1, 0.05, 0.5)), 0.6, 1e-15));
  CHECK_THROWS_AS(bias_factors(0.0, 1, 0.05, 0.5), InputError);
  CHECK_THROWS_AS(bias_factors(1.0, 1, 0.05, 1.0), InputError);
}

TEST_CASE("dc_model") {
  const DcModelCoefficients paper;
  CHECK(near(dc_model(0, 0, paper), std::exp(-3.5058) - 0.0227, 1e-15));
  CHECK(near(dc_model(0, 0, paper), 0.00733, 1e-5));
  CHECK(near(dc_model(0.05, 0.05, paper), -0.00018, 1e-5));
  CHECK_THROWS_AS(dc_model(-0.01, 0.1), InputError);
  CHECK_THROWS_AS(dc_model(0.1, 1.6), InputError);

  for (double x = 0.02; x < 0.3; x += 0.02) {
    CHECK(dc_model(x + 0.01, 0.05) > dc_model(x, 0.05));
    CHECK(dc_model(0.1, x + 0.01) < dc_model(0.1, x));
  }
}

TEST_CASE("idasf") {
  const auto w_r = test::sigmoid_albedo(0.08, 0.92, 715, 12);
  const auto brf = q_canopy(w_r, 0.3, 0.5, 0.2);
  CHECK(idasf_with_dc(brf, w_r, 0.0).value == sdasf(brf, w_r).value);
  CHECK(near(idasf_from_regression(line(0.6, 0.36), 0.04).value, 1.0, 1e-12));

  const auto e = idasf(brf, w_r);
  const double dc = dc_model(brf.at(710), brf.at(2260));
  CHECK(e.dc_used == dc);
  CHECK(e.method == DasfMethod::idasf);
  CHECK(near(e.value, e.regression.b / (1.0 - e.regression.k - dc), 1e-15));

  CHECK_THROWS_AS(idasf_from_regression(line(0.6, 0.36), 0.4), EstimatorError);
  CHECK_THROWS_AS(idasf_from_regression(line(0.6, 0.36), 0.4 - 5e-7), EstimatorError);
  try {
    idasf_from_regression(line(0.6, 0.36), 0.4);
  } catch (const EstimatorError& err) {
    CHECK(err.dc() == 0.4);
    CHECK(err.regression().k == 0.6);
  }
  DcModelCoefficients bad;
  bad.c1 = std::nan("");
  CHECK_THROWS_AS(idasf(brf, w_r, bad), InputError);
}

TEST_CASE("dasf0 from the leaf's own albedo") {
  std::mt19937_64 rng(8);
  const auto w1 = test::random_albedo(rng), w2 = test::random_albedo(rng);
  const auto a = dasf0_from_true_albedo(si_forward_brf({0.3, 0.5}, w1), w1);
  const auto b = dasf0_from_true_albedo(si_forward_brf({0.3, 0.5}, w2), w2);
  CHECK(near(a.value, 0.6, 1e-9));
  CHECK(near(a.value, b.value, 1e-9));
  CHECK(a.method == DasfMethod::dasf0);
  CHECK(a.regression.reference == AlbedoReference::true_albedo);
}

TEST_CASE("spectral-invariant line is nearly exact on four-stream canopies") {
  const auto& oc = test::constants();
  for (auto kind : kAllLidfKinds) {
    LeafBiochem bio = LeafBiochem::reference();
    bio.cab = 45;
    bio.lma = 0.008;
    const auto leaf = prospect(bio, oc);
    const auto brf = canopy_brf(leaf, CanopyStructure::with_lidf(kind), {}, black_soil());
    CHECK(dasf0_from_true_albedo(brf, leaf.albedo).regression.r2 > 0.99);
  }
}

TEST_CASE("dc0") {
  CHECK(near(dc0(line(0.6, 0.36), 1.0), 0.04, 1e-15));
  CHECK_THROWS_AS(dc0(line(0.6, 0.36), 0.0), InputError);
  const auto w_r = test::sigmoid_albedo(0.08, 0.92, 715, 12);
  const auto reg = regress_brf(q_canopy(w_r, 0.35, 0.55, 0.4), w_r);
  CHECK(near(dc0(reg, 0.35 / 0.45), 0.0, 1e-9));
}

TEST_CASE("bias law on random constructions") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> rho(0.1, 0.6), p(0.3, 0.9), tc(0.5, 3.0), tm(0.5, 4.0),
      ck(0.01, 0.1), pl(0.5, 0.95);
  int checked = 0;
  while (checked < 50) {
    const SIForwardParams params{rho(rng), p(rng)};
    const double t_c = tc(rng), t_m = tm(rng), cm_km = ck(rng), p_leaf = pl(rng);
    const auto f = bias_factors(t_c, t_m, cm_km, p_leaf);
    if (1.0 - params.p + f.C <= 0.05) continue;
    const auto w = test::random_albedo(rng);
    Spectrum brf;
    try {
      brf = biased_canopy(w, params, t_c, t_m, cm_km, p_leaf);
    } catch (const NumericalError&) {
      continue;
    }
    const auto reg = regress_brf(brf, w);
    CHECK(near(sdasf_from_regression(reg).value, dasf_prime_analytic(params, f), 1e-9));
    CHECK(near(dc0(reg, params.dasf()), f.dc, 1e-9));
    CHECK(near(idasf_from_regression(reg, f.dc).value, params.dasf(), 1e-9));
    ++checked;
  }
}
