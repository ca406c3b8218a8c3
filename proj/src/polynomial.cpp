#include "higgsbal/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace higgsbal {

cplx poly_eval(const Polynomial& p, cplx z) {
  cplx acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * z + *it;
  return acc;
}

Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
  if (a.empty() || b.empty()) return {};
  Polynomial out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Polynomial poly_add(const Polynomial& a, const Polynomial& b) {
  Polynomial out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

Polynomial poly_sub(const Polynomial& a, const Polynomial& b) { return poly_add(a, poly_scale(b, -1.0)); }

Polynomial poly_scale(const Polynomial& a, cplx c) {
  Polynomial out(a);
  for (auto& x : out) x *= c;
  return out;
}

Polynomial poly_trim(Polynomial p, double tol) {
  while (!p.empty() && std::abs(p.back()) <= tol) p.pop_back();
  return p;
}

int poly_degree(const Polynomial& p, double tol) {
  return static_cast<int>(poly_trim(p, tol).size()) - 1;
}

double poly_norm(const Polynomial& p) {
  double s = 0.0;
  for (const auto& c : p) s += std::norm(c);
  return std::sqrt(s);
}

bool poly_is_zero(const Polynomial& p, double tol) {
  return std::all_of(p.begin(), p.end(), [tol](cplx c) { return std::abs(c) <= tol; });
}

std::vector<cplx> poly_roots(const Polynomial& p, double tol) {
  const Polynomial q = poly_trim(p, tol);
  if (q.empty()) throw DomainError("poly_roots: zero polynomial");
  const int deg = static_cast<int>(q.size()) - 1;
  if (deg == 0) return {};
  CMatrix companion = CMatrix::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -q[i] / q[deg];
  Eigen::ComplexEigenSolver<CMatrix> es(companion, false);
  std::vector<cplx> roots(es.eigenvalues().data(), es.eigenvalues().data() + deg);
  return roots;
}

bool poly_sqrt(const Polynomial& p, Polynomial& root, double tol) {
  const Polynomial q = poly_trim(p, tol);
  root.clear();
  if (q.empty()) return true;
  const int deg = static_cast<int>(q.size()) - 1;
  if (deg % 2 != 0) return false;
  const int half = deg / 2;
  // Match coefficients from the top: (sum r_i z^i)^2 = q.
  Polynomial r(half + 1, 0.0);
  r[half] = std::sqrt(q[deg]);
  for (int j = half - 1; j >= 0; --j) {
    cplx acc = q[half + j];
    for (int i = j + 1; i < half; ++i) acc -= r[i] * r[half + j - i];
    r[j] = acc / (2.0 * r[half]);
  }
  const Polynomial check = poly_sub(poly_mul(r, r), q);
  if (!poly_is_zero(check, tol * std::max(1.0, poly_norm(q)))) return false;
  root = r;
  return true;
}

cplx weighted_eval(const Polynomial& p, int d, double t, double theta) {
  cplx acc = 0.0;
  const double s = std::sqrt(t);
  const double c = std::sqrt(1.0 - t);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (static_cast<int>(k) > d) throw DomainError("weighted_eval: degree exceeds weight");
    acc += p[k] * std::pow(s, double(k)) * std::pow(c, double(d - static_cast<int>(k))) *
           std::polar(1.0, double(k) * theta);
  }
  return acc;
}

} // namespace higgsbal
