#pragma once

// Dense complex polynomials in z, coefficients in ascending order.

#include <vector>

#include "higgsbal/types.hpp"

namespace higgsbal {

using Polynomial = std::vector<cplx>;

cplx poly_eval(const Polynomial& p, cplx z);
Polynomial poly_mul(const Polynomial& a, const Polynomial& b);
Polynomial poly_add(const Polynomial& a, const Polynomial& b);
Polynomial poly_sub(const Polynomial& a, const Polynomial& b);
Polynomial poly_scale(const Polynomial& a, cplx c);

/// Drops trailing coefficients with |c| <= tol.
Polynomial poly_trim(Polynomial p, double tol = 0.0);

/// Degree after trimming at tol; -1 for the zero polynomial.
int poly_degree(const Polynomial& p, double tol = 0.0);

double poly_norm(const Polynomial& p);

bool poly_is_zero(const Polynomial& p, double tol);

/// Roots of a nonzero polynomial via companion-matrix eigenvalues.
std::vector<cplx> poly_roots(const Polynomial& p, double tol = 0.0);

/// Square root of a perfect-square polynomial, if one exists within tol.
/// Returns false when p is not a square.
bool poly_sqrt(const Polynomial& p, Polynomial& root, double tol);

/// Evaluates sum_p c_p z^p (1+|z|^2)^(-d/2) in the stable form
/// sum_p c_p t^(p/2) (1-t)^((d-p)/2) e^(i p theta). Requires deg <= d.
cplx weighted_eval(const Polynomial& p, int d, double t, double theta);

} // namespace higgsbal
