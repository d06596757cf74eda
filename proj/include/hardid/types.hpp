#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace hardid {

// Dense shorthands, templated on the scalar type like the rest of the core.
template <typename Scalar, int Rows = Eigen::Dynamic, int Cols = Rows>
using Matrix = Eigen::Matrix<Scalar, Rows, Cols>;

template <typename Scalar, int Rows = Eigen::Dynamic>
using Vector = Eigen::Matrix<Scalar, Rows, 1>;

template <typename Scalar>
using Vector4 = Vector<Scalar, 4>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Vector4d = Vector4<double>;

/// Parameters p = (gamma1, gamma2, beta1, beta2) of the two-term exponential
/// hardening law. Stored as a fixed 4-vector so it composes with Eigen
/// expressions; the named accessors are the only place the layout is spelled.
template <typename Scalar>
class MaterialParams {
 public:
  static constexpr int kSize = 4;
  static constexpr int kGamma1 = 0;
  static constexpr int kGamma2 = 1;
  static constexpr int kBeta1 = 2;
  static constexpr int kBeta2 = 3;

  MaterialParams() : values_(Vector4<Scalar>::Zero()) {}
  MaterialParams(Scalar gamma1, Scalar gamma2, Scalar beta1, Scalar beta2)
      : values_(gamma1, gamma2, beta1, beta2) {}
  explicit MaterialParams(const Vector4<Scalar>& values) : values_(values) {}

  Scalar gamma1() const { return values_[kGamma1]; }
  Scalar gamma2() const { return values_[kGamma2]; }
  Scalar beta1() const { return values_[kBeta1]; }
  Scalar beta2() const { return values_[kBeta2]; }

  // Term k in {0, 1}.
  Scalar gamma(int k) const { return values_[kGamma1 + k]; }
  Scalar beta(int k) const { return values_[kBeta1 + k]; }

  const Vector4<Scalar>& vec() const { return values_; }
  Vector4<Scalar>& vec() { return values_; }

  Scalar operator[](int i) const { return values_[i]; }
  Scalar& operator[](int i) { return values_[i]; }

  bool allFinite() const { return values_.allFinite(); }
  bool allPositive() const { return (values_.array() > Scalar(0)).all(); }

  friend bool operator==(const MaterialParams& a, const MaterialParams& b) {
    return a.values_ == b.values_;
  }

 private:
  Vector4<Scalar> values_;
};

using MaterialParamsd = MaterialParams<double>;

/// Equally spaced strain points eps_start, ..., eps_end (count points).
template <typename Scalar>
class StrainGrid {
 public:
  static constexpr int kDefaultCount = 20;

  StrainGrid() : StrainGrid(Scalar(0), Scalar(0.1), kDefaultCount) {}
  StrainGrid(Scalar eps_start, Scalar eps_end, int count)
      : eps_start_(eps_start), eps_end_(eps_end), count_(count) {
    if (!(eps_start < eps_end) || !std::isfinite(double(eps_start)) ||
        !std::isfinite(double(eps_end))) {
      throw std::invalid_argument("strain grid needs finite eps_start < eps_end");
    }
    if (count < 2) {
      throw std::invalid_argument("strain grid needs at least 2 points");
    }
  }

  Scalar epsStart() const { return eps_start_; }
  Scalar epsEnd() const { return eps_end_; }
  int count() const { return count_; }
  Scalar length() const { return eps_end_ - eps_start_; }

  Scalar point(int i) const {
    // Pin the last node exactly to eps_end.
    if (i == count_ - 1) return eps_end_;
    return eps_start_ + length() * Scalar(i) / Scalar(count_ - 1);
  }

  Vector<Scalar> points() const {
    Vector<Scalar> eps(count_);
    for (int i = 0; i < count_; ++i) eps[i] = point(i);
    return eps;
  }

  friend bool operator==(const StrainGrid& a, const StrainGrid& b) {
    return a.eps_start_ == b.eps_start_ && a.eps_end_ == b.eps_end_ &&
           a.count_ == b.count_;
  }

 private:
  Scalar eps_start_;
  Scalar eps_end_;
  int count_;
};

using StrainGridd = StrainGrid<double>;

/// Hardening stresses sampled on a strain grid; the network input.
template <typename Scalar>
struct StressCurve {
  Vector<Scalar> values;
  StrainGrid<Scalar> grid;
};

using StressCurved = StressCurve<double>;

}  // namespace hardid
