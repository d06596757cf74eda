#pragma once

// Normalized L1 distance between two hardening curves over the grid's strain
// interval,
//
//   d(p, q) = 1/(eps_S - eps_1) * integral |R(eps, p) - R(eps, q)| d eps,
//
// by the composite trapezoid rule on the exact forward model.

#include "hardid/material_model.hpp"
#include "hardid/types.hpp"

#include <stdexcept>

namespace hardid {

struct QuadratureSpec {
  static constexpr int kDefaultResolution = 2000;

  int resolution = kDefaultResolution;  // subintervals of [eps_1, eps_S]

  QuadratureSpec() = default;
  explicit QuadratureSpec(int res) : resolution(res) {
    if (res < 2) throw std::invalid_argument("quadrature resolution must be >= 2");
  }
};

/// R(., p) at the resolution + 1 quadrature nodes spanning the grid.
template <typename Scalar>
Vector<Scalar> sampleOnQuadratureNodes(const MaterialParams<Scalar>& p,
                                       const StrainGrid<Scalar>& grid,
                                       const QuadratureSpec& quad) {
  const StrainGrid<Scalar> nodes(grid.epsStart(), grid.epsEnd(), quad.resolution + 1);
  Vector<Scalar> values(nodes.count());
  for (int i = 0; i < nodes.count(); ++i) values[i] = hardeningStress(nodes.point(i), p);
  return values;
}

/// Trapezoid mean of |a - b| over uniformly spaced node values. The interval
/// length cancels against the normalization, leaving a plain weighted mean.
/// The interior sum uses four interleaved accumulators in a fixed order, so
/// the result does not depend on where the operands sit in memory.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar trapezoidMeanAbsDiff(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  using std::abs;
  const Eigen::Index n = a.size();
  const Scalar ends = (abs(a[0] - b[0]) + abs(a[n - 1] - b[n - 1])) / Scalar(2);
  Scalar acc[4] = {Scalar(0), Scalar(0), Scalar(0), Scalar(0)};
  Eigen::Index i = 1;
  for (; i + 4 <= n - 1; i += 4) {
    acc[0] += abs(a[i] - b[i]);
    acc[1] += abs(a[i + 1] - b[i + 1]);
    acc[2] += abs(a[i + 2] - b[i + 2]);
    acc[3] += abs(a[i + 3] - b[i + 3]);
  }
  for (; i < n - 1; ++i) acc[0] += abs(a[i] - b[i]);
  const Scalar interior = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  return (interior + ends) / Scalar(n - 1);
}

template <typename Scalar>
Scalar curveDistance(const MaterialParams<Scalar>& p, const MaterialParams<Scalar>& q,
                     const StrainGrid<Scalar>& grid,
                     const QuadratureSpec& quad = QuadratureSpec()) {
  return trapezoidMeanAbsDiff(sampleOnQuadratureNodes(p, grid, quad),
                              sampleOnQuadratureNodes(q, grid, quad));
}

}  // namespace hardid
