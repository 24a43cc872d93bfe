#pragma once

namespace ap {

// Error function, implemented in-repo (no libm dependency for the value path).
// Maclaurin-type series for small arguments, Lentz continued fraction for the
// complementary function at large arguments. Absolute error < 1e-14 over the
// real line; validated against a frozen high-precision table in the tests.
double erf(double x);

// Complementary error function, 1 - erf(x), accurate in the tail.
double erfc(double x);

}  // namespace ap
