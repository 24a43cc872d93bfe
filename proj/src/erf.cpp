#include "ap/erf.hpp"

#include <cmath>
#include <limits>

namespace ap {
namespace {

constexpr double kInvSqrtPi = 0.5641895835477562869480794515608;

// erf(x) = (2x/sqrt(pi)) * exp(-x^2) * sum_n (2x^2)^n / (2n+1)!!
// All series terms are positive, so there is no cancellation.
double erf_series(double x) {
    const double x2 = x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int n = 1; n < 200; ++n) {
        term *= 2.0 * x2 / static_cast<double>(2 * n + 1);
        sum += term;
        if (term < sum * 1e-17) {
            break;
        }
    }
    return 2.0 * x * kInvSqrtPi * std::exp(-x2) * sum;
}

// erfc(x) ~ exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm; valid for x >= 1.
double erfc_cf(double x) {
    const double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 300; ++n) {
        const double a = 0.5 * static_cast<double>(n);
        d = x + a * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) {
            break;
        }
    }
    return std::exp(-x * x) * kInvSqrtPi / f;
}

}  // namespace

double erf(double x) {
    if (std::isnan(x)) {
        return x;
    }
    const double ax = std::fabs(x);
    if (ax < 3.0) {
        return erf_series(x);
    }
    const double tail = erfc_cf(ax);
    return x > 0.0 ? 1.0 - tail : tail - 1.0;
}

double erfc(double x) {
    if (std::isnan(x)) {
        return x;
    }
    // The continued fraction keeps full relative accuracy where erfc is
    // small; the series complement only loses absolute precision where the
    // result is order one.
    if (x >= 2.0) {
        return erfc_cf(x);
    }
    if (x > -2.0) {
        return 1.0 - erf_series(x);
    }
    return 2.0 - erfc_cf(-x);
}

}  // namespace ap
