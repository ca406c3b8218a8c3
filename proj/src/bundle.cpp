#include "higgsbal/bundle.hpp"
#include "higgsbal/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace higgsbal {

int BundleSpec::degree() const { return std::accumulate(degrees.begin(), degrees.end(), 0); }

int BundleSpec::min_level() const {
  return -*std::min_element(degrees.begin(), degrees.end());
}

void BundleSpec::validate() const {
  if (degrees.size() < 2) throw DomainError("BundleSpec: rank must be at least 2");
  if (!std::is_sorted(degrees.begin(), degrees.end(), std::greater<int>()))
    throw DomainError("BundleSpec: degrees must be non-increasing");
}

PolySection canonicalize(PolySection s, const BundleSpec& spec, int k) {
  if (static_cast<int>(s.components.size()) != spec.rank())
    throw DomainError("PolySection: component count does not match rank");
  for (int i = 0; i < spec.rank(); ++i) {
    const int bound = spec.degrees[i] + k;
    Polynomial& p = s.components[i];
    if (poly_degree(p) > bound)
      throw DomainError("PolySection: component " + std::to_string(i) + " exceeds degree " +
                        std::to_string(bound));
    p.resize(static_cast<std::size_t>(std::max(bound + 1, 0)), 0.0);
  }
  return s;
}

int basis_dimension(const BundleSpec& spec, int k) {
  spec.validate();
  if (k < spec.min_level())
    throw DomainError("basis_dimension: level " + std::to_string(k) +
                      " is below the base-point-free threshold " + std::to_string(spec.min_level()));
  int n = 0;
  for (int a : spec.degrees) n += a + k + 1;
  return n;
}

SectionBasis monomial_basis(const BundleSpec& spec, int k) {
  const int n = basis_dimension(spec, k);
  SectionBasis basis;
  basis.spec = spec;
  basis.level_k = k;
  basis.sections.reserve(n);
  for (int i = 0; i < spec.rank(); ++i) {
    for (int p = 0; p <= spec.degrees[i] + k; ++p) {
      PolySection s;
      s.components.assign(spec.rank(), Polynomial{});
      s.components[i].assign(p + 1, 0.0);
      s.components[i][p] = 1.0;
      basis.sections.push_back(canonicalize(std::move(s), spec, k));
    }
  }
  return basis;
}

int summand_offset(const BundleSpec& spec, int k, int summand) {
  int off = 0;
  for (int i = 0; i < summand; ++i) off += spec.degrees[i] + k + 1;
  return off;
}

BasisEvaluation evaluate_basis(const SectionBasis& basis, const QuadGrid& grid) {
  const int r = basis.spec.rank();
  const int n = basis.size();
  int max_d = 0;
  for (int i = 0; i < r; ++i) max_d = std::max(max_d, basis.spec.degrees[i] + basis.level_k);
  for (const auto& s : basis.sections)
    for (int i = 0; i < r; ++i)
      if (poly_degree(s.components[i]) > basis.spec.degrees[i] + basis.level_k)
        throw DomainError("evaluate_basis: component exceeds its degree bound");
  BasisEvaluation ev;
  ev.rank = r;
  ev.count = n;
  ev.raw.assign(grid.size(), CMatrix::Zero(r, n));
  ev.weighted.assign(grid.size(), CMatrix::Zero(r, n));
  parallel_for(grid.size(), [&](std::size_t j) {
    const GridNode& node = grid.nodes[j];
    // Power tables: z^p, and the weighted monomial t^(p/2) (1-t)^((d-p)/2) e^(i p theta) split into factors.
    const std::size_t len = static_cast<std::size_t>(max_d) + 1;
    std::vector<cplx> zp(len), ep(len);
    std::vector<double> sp(len), cp(len);
    const double s = std::sqrt(node.t), c = std::sqrt(1.0 - node.t);
    zp[0] = 1.0;
    sp[0] = 1.0;
    cp[0] = 1.0;
    for (std::size_t q = 1; q < len; ++q) {
      zp[q] = zp[q - 1] * node.z;
      sp[q] = sp[q - 1] * s;
      cp[q] = cp[q - 1] * c;
    }
    for (std::size_t q = 0; q < len; ++q) ep[q] = std::polar(1.0, double(q) * node.theta);
    for (int col = 0; col < n; ++col) {
      const PolySection& sec = basis.sections[col];
      for (int i = 0; i < r; ++i) {
        const Polynomial& p = sec.components[i];
        const int d = basis.spec.degrees[i] + basis.level_k;
        cplx raw = 0.0, weighted = 0.0;
        for (std::size_t q = 0; q < p.size() && static_cast<int>(q) <= d; ++q) {
          if (p[q] == 0.0) continue;
          raw += p[q] * zp[q];
          weighted += p[q] * (sp[q] * cp[static_cast<std::size_t>(d) - q]) * ep[q];
        }
        if (!std::isfinite(raw.real()) || !std::isfinite(raw.imag()))
          throw NumericalError("evaluate_basis: overflow at node " + std::to_string(j));
        ev.raw[j](i, col) = raw;
        ev.weighted[j](i, col) = weighted;
      }
    }
  });
  return ev;
}

} // namespace higgsbal
