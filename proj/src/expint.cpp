#include "dasf/expint.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/core.h>

#include "dasf/error.hpp"

namespace dasf {

namespace {
constexpr int kMaxIterations = 500;
constexpr double kEps = 1e-16;
}  // namespace

double expint_e1(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw NumericalError(fmt::format("E1 undefined for x = {}", x));

  if (x <= 1.0) {
    // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    double sum = 0.0;
    double term = 1.0;  // (-x)^k / k!
    for (int k = 1; k <= kMaxIterations; ++k) {
      term *= -x / k;
      const double add = term / k;
      sum += add;
      if (std::abs(add) < kEps * std::abs(sum)) return -std::numbers::egamma - std::log(x) - sum;
    }
    throw NumericalError(fmt::format("E1 series did not converge at x = {}", x));
  }

  // Continued fraction e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...))).
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h * std::exp(-x);
  }
  throw NumericalError(fmt::format("E1 continued fraction did not converge at x = {}", x));
}

double plate_transmissivity(double k) {
  if (k < 0.0 || !std::isfinite(k))
    throw NumericalError(fmt::format("plate absorption coefficient {} is invalid", k));
  if (k == 0.0) return 1.0;
  // e^{-k} and E1(k) both underflow together for very thick plates.
  if (k > 700.0) return 0.0;
  return (1.0 - k) * std::exp(-k) + k * k * expint_e1(k);
}

}  // namespace dasf
