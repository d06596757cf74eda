#pragma once

// Two-term exponential hardening law
//
//   R(eps, p) = gamma1/beta1 (1 - exp(-beta1 eps)) + gamma2/beta2 (1 - exp(-beta2 eps))
//
// with analytic derivatives in p and the term-swapping permutation under which
// R is invariant.

#include "hardid/types.hpp"

#include <cmath>

namespace hardid {

/// |beta * eps| below this switches each term to its Taylor expansion.
inline constexpr double kSeriesThreshold = 1e-4;

namespace detail {

// (1 - exp(-beta eps)) / beta, which tends to eps as beta -> 0.
template <typename Scalar>
Scalar saturation(Scalar beta, Scalar eps) {
  using std::abs;
  using std::expm1;
  const Scalar x = beta * eps;
  if (abs(x) < Scalar(kSeriesThreshold)) {
    return eps * (Scalar(1) - x / Scalar(2) + x * x / Scalar(6));
  }
  return -expm1(-x) / beta;
}

// d/dbeta of saturation(beta, eps).
template <typename Scalar>
Scalar saturationDBeta(Scalar beta, Scalar eps) {
  using std::abs;
  using std::exp;
  using std::expm1;
  const Scalar x = beta * eps;
  if (abs(x) < Scalar(kSeriesThreshold)) {
    return eps * eps * (Scalar(-0.5) + x / Scalar(3) - x * x / Scalar(8));
  }
  return (x * exp(-x) + expm1(-x)) / (beta * beta);
}

}  // namespace detail

template <typename Scalar>
Scalar hardeningStress(Scalar eps, const MaterialParams<Scalar>& p) {
  return p.gamma1() * detail::saturation(p.beta1(), eps) +
         p.gamma2() * detail::saturation(p.beta2(), eps);
}

/// (dR/dgamma1, dR/dgamma2, dR/dbeta1, dR/dbeta2) at (eps, p).
template <typename Scalar>
Vector4<Scalar> gradParams(Scalar eps, const MaterialParams<Scalar>& p) {
  Vector4<Scalar> g;
  for (int k = 0; k < 2; ++k) {
    g[MaterialParams<Scalar>::kGamma1 + k] = detail::saturation(p.beta(k), eps);
    g[MaterialParams<Scalar>::kBeta1 + k] =
        p.gamma(k) * detail::saturationDBeta(p.beta(k), eps);
  }
  return g;
}

/// Stress and its parameter gradient in one pass (shares the exponentials'
/// branch decisions with the separate functions).
template <typename Scalar>
Scalar hardeningStressWithGrad(Scalar eps, const MaterialParams<Scalar>& p,
                               Vector4<Scalar>& grad) {
  Scalar value(0);
  for (int k = 0; k < 2; ++k) {
    const Scalar s = detail::saturation(p.beta(k), eps);
    grad[MaterialParams<Scalar>::kGamma1 + k] = s;
    grad[MaterialParams<Scalar>::kBeta1 + k] =
        p.gamma(k) * detail::saturationDBeta(p.beta(k), eps);
    value += p.gamma(k) * s;
  }
  return value;
}

/// Swaps the two hardening terms: (g1, g2, b1, b2) -> (g2, g1, b2, b1).
template <typename Scalar>
MaterialParams<Scalar> permute(const MaterialParams<Scalar>& p) {
  return MaterialParams<Scalar>(p.gamma2(), p.gamma1(), p.beta2(), p.beta1());
}

template <typename Scalar>
StressCurve<Scalar> evaluateCurve(const StrainGrid<Scalar>& grid,
                                  const MaterialParams<Scalar>& p) {
  StressCurve<Scalar> curve{Vector<Scalar>(grid.count()), grid};
  for (int i = 0; i < grid.count(); ++i) {
    curve.values[i] = hardeningStress(grid.point(i), p);
  }
  return curve;
}

/// Saturation value gamma1/beta1 + gamma2/beta2 approached for large strain.
template <typename Scalar>
Scalar hardeningAsymptote(const MaterialParams<Scalar>& p) {
  return p.gamma1() / p.beta1() + p.gamma2() / p.beta2();
}

}  // namespace hardid
