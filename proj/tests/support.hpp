#pragma once

#include <cmath>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "wynn/types.hpp"

namespace testing_support {

inline wynn::Vector vec(std::initializer_list<double> v) {
  wynn::Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

inline wynn::Vector pt(double x) { return wynn::Vector::Constant(1, x); }

inline std::vector<wynn::Vector> pts(std::initializer_list<double> xs) {
  std::vector<wynn::Vector> out;
  for (double x : xs) out.push_back(pt(x));
  return out;
}

inline wynn::Matrix random_pd(int p, std::mt19937_64& rng, double shift = 0.1) {
  std::normal_distribution<double> n(0.0, 1.0);
  wynn::Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = n(rng);
  return a * a.transpose() + shift * wynn::Matrix::Identity(p, p);
}

// Composite Simpson rule in long double.
template <class F>
long double simpson(F&& f, long double a, long double b, int intervals) {
  if (intervals % 2) ++intervals;
  const long double h = (b - a) / intervals;
  long double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0L : 2.0L) * f(a + h * i);
  return s * h / 3.0L;
}

inline std::string temp_path(const std::string& name) {
  return std::string(WYNN_TEST_TMP) + "/" + name;
}

}  // namespace testing_support
