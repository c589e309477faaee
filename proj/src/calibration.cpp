#include "dasf/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <Eigen/Dense>
#include <fmt/core.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "dasf/error.hpp"
#include "dasf/parallel.hpp"

namespace dasf {

namespace {

constexpr std::array<const char*, 4> kOrder = {"cab", "car", "lma", "ewt"};

void check_range(const char* name, const ConstituentRange& r) {
  if (!(r.min < r.max) || !(r.std > 0.0) || !(r.mean >= r.min && r.mean <= r.max) ||
      !std::isfinite(r.max))
    throw InputError(fmt::format("constituent '{}' statistics are inconsistent (mean {}, std {}, "
                                 "min {}, max {})",
                                 name, r.mean, r.std, r.min, r.max));
}

std::array<const ConstituentRange*, 4> ranges(const ConstituentStats& s) {
  return {&s.cab, &s.car, &s.lma, &s.ewt};
}

CorrelationMatrix from_lower(double cab_car, double cab_lma, double car_lma, double cab_ewt,
                             double car_ewt, double lma_ewt) {
  CorrelationMatrix m;
  m << 1.0, cab_car, cab_lma, cab_ewt,  //
      cab_car, 1.0, car_lma, car_ewt,   //
      cab_lma, car_lma, 1.0, lma_ewt,   //
      cab_ewt, car_ewt, lma_ewt, 1.0;
  return m;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// --- Levenberg-Marquardt ---------------------------------------------------

struct LmResult {
  Eigen::VectorXd x;
  double rmse = 0.0;
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
};

// residual(x, r, J) fills residuals r and Jacobian J at x.
template <class Residual>
LmResult levenberg_marquardt(Residual&& residual, Eigen::VectorXd x, std::size_t m,
                             int max_iterations = 500, double rel_tol = 1e-9) {
  const auto n = x.size();
  Eigen::VectorXd r(m), r_try(m);
  Eigen::MatrixXd J(m, n), J_try(m, n);
  residual(x, r, J);
  double sse = r.squaredNorm();
  if (!std::isfinite(sse)) throw NumericalError("least-squares objective is not finite at the start");
  const auto rmse_of = [m](double s) { return std::sqrt(s / static_cast<double>(m)); };

  LmResult out;
  out.history.push_back(rmse_of(sse));
  double lambda = 1e-3;
  for (int it = 1; it <= max_iterations; ++it) {
    out.iterations = it;
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    Eigen::MatrixXd damped = A;
    const double floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) damped(i, i) += lambda * std::max(A(i, i), floor);
    const Eigen::VectorXd step = damped.ldlt().solve(-g);
    const Eigen::VectorXd x_try = x + step;
    residual(x_try, r_try, J_try);
    const double sse_try = r_try.squaredNorm();
    if (std::isfinite(sse_try) && sse_try < sse) {
      const double before = rmse_of(sse);
      const double after = rmse_of(sse_try);
      x = x_try;
      r.swap(r_try);
      J.swap(J_try);
      sse = sse_try;
      out.history.push_back(after);
      lambda = std::max(lambda / 10.0, 1e-12);
      if (before - after <= rel_tol * before) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      // No descent direction left at machine precision.
      if (lambda > 1e16) {
        out.converged = true;
        break;
      }
    }
  }
  out.x = x;
  out.rmse = rmse_of(sse);
  return out;
}

struct Cloud {
  Eigen::VectorXd x1, x2, y;
};

Cloud cloud_of(const std::vector<TrainingRecord>& records) {
  if (records.size() < 50)
    throw InputError(fmt::format("DC fit needs at least 50 records, got {}", records.size()));
  Cloud c{Eigen::VectorXd(records.size()), Eigen::VectorXd(records.size()),
          Eigen::VectorXd(records.size())};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!std::isfinite(rec.brf710) || !std::isfinite(rec.brf2260) || !std::isfinite(rec.dc0))
      throw InputError(fmt::format("training record {} is not finite", i));
    c.x1[static_cast<Eigen::Index>(i)] = rec.brf710;
    c.x2[static_cast<Eigen::Index>(i)] = rec.brf2260;
    c.y[static_cast<Eigen::Index>(i)] = rec.dc0;
  }
  const auto spread = [](const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); };
  if (spread(c.x1) <= 1e-9 || spread(c.x2) <= 1e-9)
    throw InputError("DC fit needs spread in both BRF710 and BRF2260");
  return c;
}

double r2_of(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted) {
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  const double ss_res = (y - fitted).squaredNorm();
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

Eigen::VectorXd predict(const Cloud& c, const DcModelCoefficients& k) {
  return ((k.c1 * c.x1 + k.c2 * c.x2).array() + k.c3).exp() + k.c4;
}

}  // namespace

// --- statistics --------------------------------------------------------------

ConstituentStats ConstituentStats::defaults() {
  ConstituentStats s;
  s.cab = {33.8, 21.8, 0.78, 106.7};
  s.car = {8.66, 5.08, 0.0, 25.3};
  s.lma = {0.0052, 0.0036, 0.0017, 0.0331};
  s.ewt = {0.0116, 0.0048, 0.0044, 0.0340};
  return s;
}

void ConstituentStats::validate() const {
  const auto r = ranges(*this);
  for (std::size_t i = 0; i < 4; ++i) check_range(kOrder[i], *r[i]);
}

CorrelationMatrix source_correlation() { return from_lower(0.86, 0.19, 0.43, 0.19, 0.27, 0.63); }

CorrelationMatrix synthetic_correlation() {
  return from_lower(0.85, 0.19, 0.42, 0.19, 0.26, 0.63);
}

void validate_correlation(const CorrelationMatrix& corr) {
  if (!corr.allFinite()) throw InputError("correlation matrix has non-finite entries");
  for (int i = 0; i < 4; ++i) {
    if (std::abs(corr(i, i) - 1.0) > 1e-12) throw InputError("correlation diagonal must be 1");
    for (int j = 0; j < i; ++j) {
      if (std::abs(corr(i, j) - corr(j, i)) > 1e-12)
        throw InputError("correlation matrix must be symmetric");
      if (std::abs(corr(i, j)) > 1.0) throw InputError("correlations must lie in [-1, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<CorrelationMatrix> es(corr);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw InputError(fmt::format("correlation matrix is not positive semi-definite "
                                 "(smallest eigenvalue {:.3g})",
                                 es.eigenvalues().minCoeff()));
}

ConstituentStats load_stats(const std::filesystem::path& path) {
  const auto j = read_json(path);
  ConstituentStats s;
  auto r = std::array<ConstituentRange*, 4>{&s.cab, &s.car, &s.lma, &s.ewt};
  try {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& e = j.at(kOrder[i]);
      *r[i] = {e.at("mean").get<double>(), e.at("std").get<double>(), e.at("min").get<double>(),
               e.at("max").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
  s.validate();
  return s;
}

CorrelationMatrix load_correlation(const std::filesystem::path& path) {
  const auto j = read_json(path);
  CorrelationMatrix m;
  try {
    const auto& rows = j.is_array() ? j : j.at("matrix");
    std::array<int, 4> perm = {0, 1, 2, 3};
    if (j.is_object() && j.contains("order")) {
      const auto order = j.at("order").get<std::vector<std::string>>();
      if (order.size() != 4) throw InputError("correlation 'order' must list four constituents");
      for (std::size_t i = 0; i < 4; ++i) {
        const auto it = std::find(kOrder.begin(), kOrder.end(), order[i]);
        if (it == kOrder.end())
          throw InputError(fmt::format("unknown constituent '{}' in correlation order", order[i]));
        perm[i] = static_cast<int>(it - kOrder.begin());
      }
    }
    if (rows.size() != 4) throw InputError("correlation matrix must be 4x4");
    for (std::size_t i = 0; i < 4; ++i) {
      if (rows[i].size() != 4) throw InputError("correlation matrix must be 4x4");
      for (std::size_t k = 0; k < 4; ++k) m(perm[i], perm[k]) = rows[i][k].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
  validate_correlation(m);
  return m;
}

// --- sampling ----------------------------------------------------------------

SyntheticLeafSet sample_leaves(const ConstituentStats& stats, const CorrelationMatrix& corr, int n,
                               std::uint64_t seed) {
  if (n < 1) throw InputError(fmt::format("sample size {} must be positive", n));
  stats.validate();
  validate_correlation(corr);

  Eigen::SelfAdjointEigenSolver<CorrelationMatrix> es(corr);
  const Eigen::Vector4d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CorrelationMatrix sqrt_corr = es.eigenvectors() * root.asDiagonal() *
                                      es.eigenvectors().transpose();

  const auto r = ranges(stats);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kMaxAttempts = 1000;

  SyntheticLeafSet set;
  set.seed = seed;
  set.n_requested = n;
  for (int s = 0; s < n; ++s) {
    Eigen::Vector4d x;
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      Eigen::Vector4d z;
      for (int i = 0; i < 4; ++i) z[i] = normal(rng);
      const Eigen::Vector4d c = sqrt_corr * z;
      accepted = true;
      for (int i = 0; i < 4; ++i) {
        x[i] = r[static_cast<std::size_t>(i)]->mean + r[static_cast<std::size_t>(i)]->std * c[i];
        if (x[i] < r[static_cast<std::size_t>(i)]->min || x[i] > r[static_cast<std::size_t>(i)]->max)
          accepted = false;
      }
    }
    if (!accepted)
      throw InputError(fmt::format("constituent bounds are infeasible: {} consecutive draws "
                                   "rejected",
                                   kMaxAttempts));
    if (x[0] < kGreenLeafCabFloor) continue;
    LeafBiochem leaf;
    leaf.n_struct = 1.5;
    leaf.cab = x[0];
    leaf.car = x[1];
    leaf.lma = x[2];
    leaf.ewt = x[3];
    set.leaves.push_back(leaf);
  }
  set.n_retained = static_cast<int>(set.leaves.size());
  return set;
}

CorrelationMatrix sample_correlation(const std::vector<LeafBiochem>& leaves) {
  if (leaves.size() < 3) throw InputError("need at least 3 leaves for a correlation");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(leaves.size()), 4);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = leaves[i].cab;
    x(row, 1) = leaves[i].car;
    x(row, 2) = leaves[i].lma;
    x(row, 3) = leaves[i].ewt;
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::Matrix4d cov = centered.transpose() * centered;
  const Eigen::Vector4d sd = cov.diagonal().cwiseSqrt();
  if (sd.minCoeff() <= 0.0) throw NumericalError("a constituent has zero variance");
  return cov.array() / (sd * sd.transpose()).array();
}

// --- training cloud ----------------------------------------------------------

std::vector<TrainingRecord> build_training_set(const SyntheticLeafSet& leaves,
                                               const CanopyStructure& canopy,
                                               const ViewGeometry& g, const OpticalConstants& oc,
                                               unsigned threads) {
  const FourStreamCanopy model(canopy, g);
  const auto w_r = reference_albedo(oc);
  const auto soil = black_soil(oc.grid);
  std::vector<TrainingRecord> out(leaves.leaves.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto& bio = leaves.leaves[i];
    const auto leaf = prospect(bio, oc);
    const auto brf = model.brf(leaf.reflectance, leaf.transmittance, soil);
    const auto d0 = dasf0_from_true_albedo(brf, leaf.albedo);
    const auto reg = regress_brf(brf, w_r);
    out[i] = TrainingRecord{bio, brf.at(710), brf.at(2260), dc0(reg, d0.value), d0.value, reg.k,
                            reg.b};
  });
  return out;
}

void write_training_csv(std::ostream& out, const std::vector<TrainingRecord>& records) {
  fmt::print(out, "cab,car,ewt,lma,brf710,brf2260,k,b,dasf0,dc0\n");
  for (const auto& r : records)
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{}\n", r.leaf.cab, r.leaf.car, r.leaf.ewt,
               r.leaf.lma, r.brf710, r.brf2260, r.k, r.b, r.dasf0, r.dc0);
}

// --- DC model fit --------------------------------------------------------------

DcFit fit_dc_model(const std::vector<TrainingRecord>& records, const DcModelCoefficients& init) {
  init.validate();
  const auto c = cloud_of(records);
  const auto m = static_cast<std::size_t>(c.y.size());
  auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const Eigen::ArrayXd e = ((p[0] * c.x1 + p[1] * c.x2).array() + p[2]).exp();
    r = (e + p[3]).matrix() - c.y;
    J.col(0) = (c.x1.array() * e).matrix();
    J.col(1) = (c.x2.array() * e).matrix();
    J.col(2) = e.matrix();
    J.col(3).setOnes();
  };
  Eigen::VectorXd x0(4);
  x0 << init.c1, init.c2, init.c3, init.c4;
  const auto lm = levenberg_marquardt(residual, x0, m);

  DcFit fit;
  fit.coeffs = {lm.x[0], lm.x[1], lm.x[2], lm.x[3]};
  fit.report.rmse = lm.rmse;
  fit.report.r2 = r2_of(c.y, predict(c, fit.coeffs));
  fit.report.iterations = lm.iterations;
  fit.report.converged = lm.converged;
  fit.report.rmse_history = lm.history;
  return fit;
}

DcFit fit_dc_model_two_stage(const std::vector<TrainingRecord>& records,
                             const DcModelCoefficients& init) {
  init.validate();
  const auto c = cloud_of(records);
  const auto m = static_cast<std::size_t>(c.y.size());
  const double scale0 = std::hypot(init.c1, init.c2);

  // Stage two: for a fixed direction theta, fit y = exp(s * u + c3) + c4.
  struct Inner {
    LmResult lm;
    double theta;
  };
  auto fit_along = [&](double theta) {
    const Eigen::VectorXd u = std::cos(theta) * c.x1 - std::sin(theta) * c.x2;
    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
      const Eigen::ArrayXd e = (p[0] * u.array() + p[1]).exp();
      r = (e + p[2]).matrix() - c.y;
      J.col(0) = (u.array() * e).matrix();
      J.col(1) = e.matrix();
      J.col(2).setOnes();
    };
    Eigen::VectorXd x0(3);
    x0 << scale0, init.c3, init.c4;
    return Inner{levenberg_marquardt(residual, x0, m), theta};
  };

  // Stage one: scan the rotation angle, then refine by golden section.
  constexpr double kHalfPi = 1.5707963267948966;
  constexpr int kScan = 90;
  Inner best = fit_along(0.0);
  for (int i = 1; i <= kScan; ++i) {
    auto trial = fit_along(kHalfPi * i / kScan);
    if (trial.lm.rmse < best.lm.rmse) best = std::move(trial);
  }
  double lo = std::max(0.0, best.theta - kHalfPi / kScan);
  double hi = std::min(kHalfPi, best.theta + kHalfPi / kScan);
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 60 && hi - lo > 1e-12; ++i) {
    const double a = hi - golden * (hi - lo);
    const double b = lo + golden * (hi - lo);
    auto fa = fit_along(a);
    auto fb = fit_along(b);
    if (fa.lm.rmse < fb.lm.rmse) {
      hi = b;
      if (fa.lm.rmse < best.lm.rmse) best = std::move(fa);
    } else {
      lo = a;
      if (fb.lm.rmse < best.lm.rmse) best = std::move(fb);
    }
  }

  DcFit fit;
  const double s = best.lm.x[0];
  fit.coeffs = {s * std::cos(best.theta), -s * std::sin(best.theta), best.lm.x[1], best.lm.x[2]};
  fit.report.rmse = best.lm.rmse;
  fit.report.r2 = r2_of(c.y, predict(c, fit.coeffs));
  fit.report.iterations = best.lm.iterations;
  fit.report.converged = best.lm.converged;
  fit.report.rmse_history = best.lm.history;
  return fit;
}

// --- within-leaf relations -----------------------------------------------------

WithinLeafReport fit_within_leaf_relations(const SyntheticLeafSet& leaves,
                                           const OpticalConstants& oc, int n_bins,
                                           unsigned threads) {
  constexpr double kReferenceLma = 0.002;
  constexpr int kMinPerBin = 10;
  const auto n = leaves.leaves.size();
  if (n_bins < 2) throw InputError("need at least two LMA bins");
  if (n < static_cast<std::size_t>(n_bins * kMinPerBin))
    throw InputError(fmt::format("{} leaves cannot fill {} LMA bins of at least {}", n, n_bins,
                                 kMinPerBin));

  const auto w_r = reference_albedo(oc);
  struct Row {
    double cab, lma, p, r, eps, p0;
  };
  std::vector<Row> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    auto bio = leaves.leaves[i];
    const auto fit = leaf_invariant_fit(prospect(bio, oc).albedo, w_r);
    bio.lma = kReferenceLma;
    const auto fit0 = leaf_invariant_fit(prospect(bio, oc).albedo, w_r);
    rows[i] = {bio.cab, leaves.leaves[i].lma, fit.p, fit.r, fit.epsilon, fit0.p};
  });

  WithinLeafReport rep;
  rep.n_leaves = static_cast<int>(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].lma < rows[b].lma; });

  std::vector<double> lma_means, ks, bs;
  for (int bin = 0; bin < n_bins; ++bin) {
    const std::size_t begin = n * static_cast<std::size_t>(bin) / static_cast<std::size_t>(n_bins);
    const std::size_t end = n * static_cast<std::size_t>(bin + 1) / static_cast<std::size_t>(n_bins);
    std::vector<double> p0, p;
    double lma_sum = 0.0;
    for (std::size_t j = begin; j < end; ++j) {
      p0.push_back(rows[order[j]].p0);
      p.push_back(rows[order[j]].p);
      lma_sum += rows[order[j]].lma;
    }
    const auto line = linear_fit(p0, p);
    WithinLeafReport::Bin b{lma_sum / static_cast<double>(end - begin), line.slope, line.intercept,
                            static_cast<int>(end - begin)};
    rep.bins.push_back(b);
    lma_means.push_back(b.lma_mean);
    ks.push_back(b.k);
    bs.push_back(b.b);
  }
  rep.k_vs_lma = linear_fit(lma_means, ks);
  rep.b_vs_lma = linear_fit(lma_means, bs);

  const auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size()));
  };
  mean_std(ks, rep.k_mean, rep.k_std);
  mean_std(bs, rep.b_mean, rep.b_std);

  std::vector<double> inv_cab(n), p0(n), p(n), r(n);
  rep.epsilon_min = std::numeric_limits<double>::infinity();
  rep.epsilon_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    inv_cab[i] = 1.0 / rows[i].cab;
    p0[i] = rows[i].p0;
    p[i] = rows[i].p;
    r[i] = rows[i].r;
    rep.epsilon_min = std::min(rep.epsilon_min, rows[i].eps);
    rep.epsilon_max = std::max(rep.epsilon_max, rows[i].eps);
  }
  rep.p0_vs_inv_cab = linear_fit(inv_cab, p0);
  rep.p_vs_inv_cab = linear_fit(inv_cab, p);
  rep.r_vs_inv_cab = linear_fit(inv_cab, r);
  return rep;
}

}  // namespace dasf
