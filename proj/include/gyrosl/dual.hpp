#pragma once

// Minimal forward-mode automatic differentiation. Nesting Dual<Dual<double>>
// gives exact second derivatives of the analytic field model.

#include <cmath>

namespace gyrosl {

template <class T>
struct Dual {
  T val{};
  T der{};

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v), der(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(T v, T d) : val(v), der(d) {}

  static constexpr Dual variable(T v) { return Dual(v, T(1.0)); }
};

template <class T>
inline Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.val + b.val, a.der + b.der}; }
template <class T>
inline Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.val - b.val, a.der - b.der}; }
template <class T>
inline Dual<T> operator-(const Dual<T>& a) { return {-a.val, -a.der}; }
template <class T>
inline Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.val * b.val, a.der * b.val + a.val * b.der};
}
template <class T>
inline Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T inv = T(1.0) / b.val;
  return {a.val * inv, (a.der * b.val - a.val * b.der) * inv * inv};
}

template <class T>
inline Dual<T> operator+(const Dual<T>& a, double b) { return {a.val + b, a.der}; }
template <class T>
inline Dual<T> operator+(double a, const Dual<T>& b) { return {a + b.val, b.der}; }
template <class T>
inline Dual<T> operator-(const Dual<T>& a, double b) { return {a.val - b, a.der}; }
template <class T>
inline Dual<T> operator-(double a, const Dual<T>& b) { return {a - b.val, -b.der}; }
template <class T>
inline Dual<T> operator*(const Dual<T>& a, double b) { return {a.val * b, a.der * b}; }
template <class T>
inline Dual<T> operator*(double a, const Dual<T>& b) { return {a * b.val, a * b.der}; }
template <class T>
inline Dual<T> operator/(const Dual<T>& a, double b) { return {a.val / b, a.der / b}; }
template <class T>
inline Dual<T> operator/(double a, const Dual<T>& b) { return Dual<T>(a) / b; }

template <class T>
inline Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.val);
  return {s, a.der / (2.0 * s)};
}
template <class T>
inline Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {cos(a.val), -sin(a.val) * a.der};
}
template <class T>
inline Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {sin(a.val), cos(a.val) * a.der};
}
template <class T>
inline Dual<T> pow(const Dual<T>& a, double p) {
  using std::pow;
  return {pow(a.val, p), p * pow(a.val, p - 1.0) * a.der};
}

// Value of a possibly nested dual, for branching on magnitudes.
inline double primal(double x) { return x; }
template <class T>
inline double primal(const Dual<T>& x) { return primal(x.val); }

}  // namespace gyrosl
