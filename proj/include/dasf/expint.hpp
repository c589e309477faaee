#pragma once

namespace dasf {

// Exponential integral E1(x) = \int_x^\infty e^{-t}/t dt for x > 0.
// Power series below x = 1, modified-Lentz continued fraction above;
// relative accuracy better than 1e-14. Throws NumericalError for x <= 0,
// non-finite x, or a series that fails to converge.
double expint_e1(double x);

// Plate transmissivity for isotropic light through an absorbing slab with
// optical thickness k: (1 - k) e^{-k} + k^2 E1(k), equal to 1 at k = 0.
double plate_transmissivity(double k);

}  // namespace dasf
