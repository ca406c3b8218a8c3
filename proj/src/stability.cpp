#include "higgsbal/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "higgsbal/bundle.hpp"
#include "higgsbal/parallel.hpp"
#include "higgsbal/polynomial.hpp"

namespace higgsbal {

namespace {

constexpr double kRelTol = 1e-10;

double coeff_scale(const Polynomial& p) {
  double s = 0.0;
  for (const auto& c : p) s += std::abs(c);
  return s;
}

// |p(z)| relative to the size of its terms at z.
double relative_value(const Polynomial& p, cplx z) {
  double size = 0.0;
  double pw = 1.0;
  for (const auto& c : p) {
    size += std::abs(c) * pw;
    pw *= std::abs(z);
  }
  return size == 0.0 ? 0.0 : std::abs(poly_eval(p, z)) / size;
}

double max_scale(const std::vector<Polynomial>& ps) {
  double s = 0.0;
  for (const auto& p : ps) s = std::max(s, coeff_scale(p));
  return s;
}

} // namespace

void SubbundleSpec::validate(const BundleSpec& spec) const {
  const int r = spec.rank();
  if (r < 2) throw DomainError("subbundle: a line subbundle of a line bundle spans E (rank guard)");
  if (static_cast<int>(embedding.size()) != r)
    throw DomainError("subbundle: embedding needs " + std::to_string(r) + " components");
  const double scale = max_scale(embedding);
  if (scale == 0.0) throw DomainError("subbundle: embedding is identically zero");
  const double tol = kRelTol * scale;

  bool full_degree = false;
  int min_deg = -1;
  std::size_t min_idx = 0;
  for (int i = 0; i < r; ++i) {
    const int bound = spec.degrees[i] - degree;
    const int deg = poly_degree(embedding[i], tol);
    if (deg >= 0 && deg > bound)
      throw DomainError("subbundle: component " + std::to_string(i) + " has degree " + std::to_string(deg) +
                        " above the bound " + std::to_string(bound));
    if (deg >= 0 && deg == bound) full_degree = true;
    if (deg >= 0 && (min_deg < 0 || deg < min_deg)) {
      min_deg = deg;
      min_idx = static_cast<std::size_t>(i);
    }
  }
  if (!full_degree) throw DomainError("subbundle: embedding vanishes at z = infinity (not saturated)");
  if (min_deg <= 0) return;
  for (const cplx& root : poly_roots(embedding[min_idx], tol)) {
    bool common = true;
    for (int i = 0; i < r && common; ++i) {
      if (poly_is_zero(embedding[i], tol)) continue;
      if (relative_value(poly_trim(embedding[i], tol), root) > kRelTol) common = false;
    }
    if (common) throw DomainError("subbundle: embedding components share a zero (not saturated)");
  }
}

int SubbundleSpec::sections(int k) const { return std::max(0, degree + k + 1); }

CMatrix SubbundleSpec::section_matrix(const BundleSpec& spec, int k) const {
  const int n = basis_dimension(spec, k);
  const int h = sections(k);
  CMatrix out = CMatrix::Zero(n, h);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < spec.rank(); ++i) {
      const int off = summand_offset(spec, k, i);
      for (std::size_t c = 0; c < embedding[i].size(); ++c) {
        if (embedding[i][c] == 0.0) continue;
        const int pw = j + static_cast<int>(c);
        if (pw > spec.degrees[i] + k) throw DomainError("subbundle: section exceeds the summand degree");
        out(off + pw, j) = embedding[i][c];
      }
    }
  return out;
}

bool invariance_check(const SubbundleSpec& f, const HiggsSpec& phi, double tol) {
  f.validate(phi.bundle);
  const int r = phi.rank();
  std::vector<Polynomial> image(r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) image[i] = poly_add(image[i], poly_mul(phi.entries[i][j], f.embedding[j]));
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) {
      const Polynomial a = poly_mul(image[i], f.embedding[j]);
      const Polynomial b = poly_mul(image[j], f.embedding[i]);
      const double scale = std::max(coeff_scale(a), coeff_scale(b));
      if (scale == 0.0) continue;
      if (!poly_is_zero(poly_sub(a, b), tol * scale)) return false;
    }
  return true;
}

namespace {

struct Nu {
  int num = 0;
  int den = 1;
  double value = 0.0;
};

Nu make_nu(const SubbundleSpec& f, const BundleSpec& spec, int k) {
  const int n = basis_dimension(spec, k);
  const int h = f.sections(k);
  if (h <= 0) throw DomainError("weight: F (x) L^k has no sections, the one-parameter subgroup is trivial");
  if (h >= n) throw DomainError("weight: h0(F (x) L^k) >= N, degenerate one-parameter subgroup");
  const int g = std::gcd(h, n - h);
  return {h / g, (n - h) / g, double(h) / double(n - h)};
}

// Unitary-frame direction of F at a node.
CVector line_direction(const SubbundleSpec& f, const BundleSpec& spec, const GridNode& node) {
  CVector v(spec.rank());
  for (int i = 0; i < spec.rank(); ++i) {
    const Polynomial p = poly_trim(f.embedding[i]);
    v(i) = p.empty() ? cplx(0.0) : weighted_eval(p, spec.degrees[i] - f.degree, node.t, node.theta);
  }
  return v;
}

// |X|_h^2 = tr(X P^-1 X^H P).
double endo_norm_sq(const CMatrix& x, const CMatrix& p, const Eigen::LLT<CMatrix>& llt) {
  return (x * llt.solve(x.adjoint() * p)).trace().real();
}

} // namespace

WeightReport closed_form_weight(const SubbundleSpec& f, const HiggsSpec& phi, const QuantizationParams& params,
                                const MetricField& h, const QuadGrid& grid, const WeightOptions& opts) {
  const BundleSpec& spec = phi.bundle;
  f.validate(spec);
  phi.validate();
  params.validate(spec.rank());
  if (h.degrees != spec.degrees) throw DomainError("weight: metric does not match the bundle");
  const int r = spec.rank();
  const int n = basis_dimension(spec, params.k);
  const int hf = f.sections(params.k);
  const Nu nu = make_nu(f, spec, params.k);

  WeightReport rep;
  rep.nu_num = nu.num;
  rep.nu_den = nu.den;
  rep.nu = nu.value;
  rep.w_fs = (double(n) / r - double(hf)) * grid.volume() * r / double(n - hf);
  rep.invariant = invariance_check(f, phi);

  const double ab = params.alpha * params.beta;
  std::vector<double> upper(grid.size()), lower(grid.size()), weighted(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const GridNode& node = grid.nodes[j];
    const CMatrix p = unitary_metric(h, grid, j);
    const Eigen::LLT<CMatrix> llt(p);
    const CVector v = line_direction(f, spec, node);
    const cplx vpv = (v.adjoint() * p * v)(0, 0);
    const CMatrix pi = v * (v.adjoint() * p) / vpv;
    const CMatrix id = CMatrix::Identity(r, r);
    const CMatrix ph = higgs_unitary(phi, node);
    upper[j] = endo_norm_sq(pi * ph * (id - pi), p, llt);
    lower[j] = endo_norm_sq((id - pi) * ph * pi, p, llt);
    const double damp = ab / (1.0 + params.alpha * norm_sq_node(ph, p));
    weighted[j] = (opts.alpha_beta_inside ? ab * damp : damp) * upper[j];
  });
  double up = 0.0, lo = 0.0, w = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double wt = grid.nodes[j].weight;
    up += wt * upper[j];
    lo += wt * lower[j];
    w += wt * weighted[j];
  }
  rep.block_norms = {up, lo};
  rep.w_phi = -(1.0 + nu.value) * w;
  rep.total = rep.w_fs + rep.w_phi;
  return rep;
}

WeightReport closed_form_weight(const SubbundleSpec& f, const BalanceReport& balance, const QuadGrid& grid,
                                const WeightOptions& opts) {
  if (!balance.converged) throw DomainError("weight: balanced run did not converge");
  const MetricField h = fubini_study_from_basis(balance.basis, balance.final_gram, grid);
  return closed_form_weight(f, balance.phi, balance.params, h, grid, opts);
}

namespace {

// Columns: a G-orthonormal basis of the F-sections, then of their
// G-orthogonal complement.
CMatrix adapted_basis(const CMatrix& w, const GramMatrix& g) {
  const int n = static_cast<int>(g.rows());
  const int h = static_cast<int>(w.cols());
  const CMatrix gw = w.adjoint() * g * w;
  const Eigen::LLT<CMatrix> llt(0.5 * (gw + gw.adjoint()));
  if (llt.info() != Eigen::Success) throw NumericalError("weight: F-sections are linearly dependent");
  const CMatrix ru = llt.matrixU();
  const CMatrix bw = ru.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(w);
  // complement: project the coordinate vectors, then orthonormalize
  const CMatrix x = CMatrix::Identity(n, n) - bw * (bw.adjoint() * g);
  CMatrix m = x.adjoint() * g * x;
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const int q = n - h;
  const CMatrix vecs = es.eigenvectors().rightCols(q);
  const Eigen::VectorXd vals = es.eigenvalues().tail(q);
  if (!(vals.minCoeff() > 1e-12 * vals.maxCoeff())) throw NumericalError("weight: complement is degenerate");
  const CMatrix bq = x * vecs * vals.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal();
  CMatrix out(n, n);
  out << bw, bq;
  return out;
}

std::vector<double> default_t_list() {
  std::vector<double> t;
  for (int i = 0; i <= 32; ++i) t.push_back(0.25 * i);
  return t;
}

} // namespace

WeightCurve numeric_weight_curve(const SubbundleSpec& f, const HiggsSpec& phi, const QuantizationParams& params,
                                 const GramMatrix& g, const QuadGrid& grid, const WeightOptions& opts) {
  const BundleSpec& spec = phi.bundle;
  f.validate(spec);
  phi.validate();
  params.validate(spec.rank());
  check_gram(g);
  const int r = spec.rank();
  const int k = params.k;
  const int n = basis_dimension(spec, k);
  if (g.rows() != n) throw DomainError("weight: Gram matrix has the wrong size");
  const int hf = f.sections(k);
  const Nu nu = make_nu(f, spec, k);
  const double kappa = double(n) / (r * grid.volume());

  const CMatrix b = adapted_basis(f.section_matrix(spec, k), g);
  const BasisEvaluation ev = evaluate_basis(monomial_basis(spec, k), grid);

  // Per node: a unitary frame (F direction first), the sections in that frame,
  // and phi in that frame.
  struct NodeData {
    CMatrix w_first;  // 1 x hf, components along F
    CMatrix q_rows;   // r x (n - hf), complement sections
    CMatrix phi;      // r x r
  };
  std::vector<NodeData> data(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const GridNode& node = grid.nodes[j];
    const CVector v = line_direction(f, spec, node);
    Eigen::HouseholderQR<CMatrix> qr(v);
    const CMatrix u = qr.householderQ() * CMatrix::Identity(r, r);
    const CMatrix s = ev.weighted[j] * b;
    NodeData& d = data[j];
    d.w_first = u.col(0).adjoint() * s.leftCols(hf);
    d.q_rows = u.adjoint() * s.rightCols(n - hf);
    d.phi = u.adjoint() * higgs_unitary(phi, node) * u;
  });

  WeightCurve curve;
  const std::vector<double> ts = opts.t_list.empty() ? default_t_list() : opts.t_list;
  for (double t : ts) {
    const double eps = std::exp(-(1.0 + nu.value) * t);
    if (!(eps > 1e-150)) {
      curve.truncated = true;
      break;
    }
    // Rows 2..r of the frame are scaled by 1/eps, so the F-sections keep
    // weight 1 and the complement sections become [eps * first row; rest].
    Eigen::VectorXd scale = Eigen::VectorXd::Constant(r, 1.0 / eps);
    scale(0) = 1.0;
    std::vector<double> diag_w(grid.size()), diag_q(grid.size());
    std::vector<char> singular(grid.size(), 0);
    parallel_for(grid.size(), [&](std::size_t j) {
      const NodeData& d = data[j];
      CMatrix sw = CMatrix::Zero(r, hf);
      sw.row(0) = d.w_first;
      CMatrix sq = d.q_rows;
      sq.row(0) *= eps;
      CMatrix m = sw * sw.adjoint() + sq * sq.adjoint();
      m = 0.5 * (m + m.adjoint());
      Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
      const Eigen::VectorXd ev_m = es.eigenvalues();
      if (!(ev_m.minCoeff() > opts.singular_ratio * ev_m.maxCoeff())) {
        singular[j] = 1;
        return;
      }
      const CMatrix p = kappa * es.eigenvectors() * ev_m.cwiseInverse().cast<cplx>().asDiagonal() *
                        es.eigenvectors().adjoint();
      CMatrix ph = d.phi;
      for (int a = 0; a < r; ++a)
        for (int c = 0; c < r; ++c) ph(a, c) *= scale(a) / scale(c);
      const CMatrix cm = frak_c_node(ph, p, params);
      CMatrix hat = p * (CMatrix::Identity(r, r) - cm);
      hat = 0.5 * (hat + hat.adjoint());
      diag_w[j] = (sw.adjoint() * hat * sw).trace().real();
      diag_q[j] = (sq.adjoint() * hat * sq).trace().real();
    });
    if (std::any_of(singular.begin(), singular.end(), [](char c) { return c != 0; })) {
      curve.truncated = true;
      break;
    }
    double tw = 0.0, tq = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      tw += grid.nodes[j].weight * diag_w[j];
      tq += grid.nodes[j].weight * diag_q[j];
    }
    // tr(M xi) with M the moment matrix minus Id and xi = diag(1, -nu).
    const double pairing = (tw - hf) - nu.value * (tq - (n - hf));
    const double value = pairing * r * grid.volume() / n;
    if (!std::isfinite(value)) {
      curve.truncated = true;
      break;
    }
    curve.points.push_back({t, value});
  }
  const std::size_t m = curve.points.size();
  if (m == 0) throw NumericalError("weight: curve is empty");
  const std::size_t first = m >= 3 ? m - 3 : 0;
  double acc = 0.0, lo = curve.points[first].value, hi = lo;
  for (std::size_t i = first; i < m; ++i) {
    acc += curve.points[i].value;
    lo = std::min(lo, curve.points[i].value);
    hi = std::max(hi, curve.points[i].value);
  }
  curve.limit = acc / double(m - first);
  curve.converged = m >= 3 && (hi - lo) <= 1e-6 * std::max(1.0, std::abs(curve.limit));
  return curve;
}

WeightCurve numeric_weight_curve(const SubbundleSpec& f, const BalanceReport& balance, const QuadGrid& grid,
                                 const WeightOptions& opts) {
  if (!balance.converged) throw DomainError("weight: balanced run did not converge");
  return numeric_weight_curve(f, balance.phi, balance.params, balance.final_gram, grid, opts);
}

WeightReport weight_report(const SubbundleSpec& f, const HiggsSpec& phi, const QuantizationParams& params,
                           const GramMatrix& g, const MetricField& h, const QuadGrid& grid,
                           const WeightOptions& opts) {
  WeightReport rep = closed_form_weight(f, phi, params, h, grid, opts);
  rep.numeric_curve = numeric_weight_curve(f, phi, params, g, grid, opts);
  const double diff = std::abs(rep.numeric_curve.limit - rep.total);
  rep.agrees = diff <= opts.agreement * std::max(std::abs(rep.total), 1e-12);
  return rep;
}

std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::Stable:
    return "stable";
  case Verdict::Semistable:
    return "semistable";
  case Verdict::Unstable:
    return "unstable";
  }
  return "unknown";
}

namespace {

Verdict worse(Verdict a, Verdict b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

// Null space of (phi - lambda) acting on embeddings of O(l).
std::vector<SubbundleSpec> invariant_candidates(const HiggsSpec& phi, const Polynomial& lambda, int l) {
  const BundleSpec& spec = phi.bundle;
  const int r = spec.rank();
  const int m = spec.twist_m;
  std::vector<int> var_off(r + 1, 0), eq_off(r + 1, 0);
  for (int i = 0; i < r; ++i) {
    var_off[i + 1] = var_off[i] + std::max(0, spec.degrees[i] - l + 1);
    eq_off[i + 1] = eq_off[i] + std::max(0, spec.degrees[i] - l + m + 1);
  }
  const int nv = var_off[r];
  if (nv == 0) return {};
  CMatrix a = CMatrix::Zero(std::max(1, eq_off[r]), nv);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      Polynomial e = phi.entries[i][j];
      if (i == j) e = poly_sub(e, lambda);
      for (int c = 0; c < var_off[j + 1] - var_off[j]; ++c)
        for (std::size_t q = 0; q < e.size(); ++q) {
          if (e[q] == 0.0) continue;
          const int row = static_cast<int>(q) + c;
          if (row >= eq_off[i + 1] - eq_off[i]) throw DomainError("gieseker: Higgs entry exceeds its degree bound");
          a(eq_off[i] + row, var_off[j] + c) += e[q];
        }
    }
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * std::max(smax, 1.0)) ++rank;
  const CMatrix null = svd.matrixV().rightCols(nv - rank);
  if (null.cols() == 0) return {};

  auto to_spec = [&](const CVector& x) {
    SubbundleSpec f;
    f.degree = l;
    f.embedding.resize(r);
    for (int i = 0; i < r; ++i) {
      Polynomial p(var_off[i + 1] - var_off[i]);
      for (std::size_t c = 0; c < p.size(); ++c) {
        cplx val = x(var_off[i] + static_cast<int>(c));
        if (std::abs(val) < 1e-13) val = 0.0;
        p[c] = val;
      }
      f.embedding[i] = p;
    }
    return f;
  };
  std::vector<CVector> trials;
  for (int c = 0; c < null.cols(); ++c) trials.push_back(null.col(c));
  CVector mix = CVector::Zero(nv);
  for (int c = 0; c < null.cols(); ++c) mix += std::polar(1.0 + 0.37 * c, 0.91 * c) * null.col(c);
  trials.push_back(mix);
  for (const auto& x : trials) {
    // normalize the phase so the largest coefficient is real and positive
    Eigen::Index idx = 0;
    x.cwiseAbs().maxCoeff(&idx);
    const CVector y = x * (std::abs(x(idx)) / x(idx)) / x.norm();
    SubbundleSpec f = to_spec(y);
    try {
      f.validate(spec);
    } catch (const DomainError&) {
      continue;
    }
    return {f};
  }
  return {};
}

} // namespace

GiesekerReport gieseker_report(const HiggsSpec& phi, const std::vector<int>& k_range) {
  phi.validate();
  const BundleSpec& spec = phi.bundle;
  if (spec.rank() != 2) throw DomainError("gieseker: automated search supports rank 2 only");
  if (k_range.empty()) throw DomainError("gieseker: empty k range");
  const int r = 2;

  // Eigenvalues of phi as polynomials: (tr +- sqrt(disc)) / 2.
  const auto& e = phi.entries;
  const Polynomial tr = poly_add(e[0][0], e[1][1]);
  const Polynomial det = poly_sub(poly_mul(e[0][0], e[1][1]), poly_mul(e[0][1], e[1][0]));
  const Polynomial disc = poly_sub(poly_mul(tr, tr), poly_scale(det, 4.0));
  std::vector<Polynomial> lambdas;
  const double scale = std::max({1.0, coeff_scale(poly_mul(tr, tr)), coeff_scale(det)});
  if (poly_is_zero(disc, kRelTol * scale)) {
    lambdas.push_back(poly_scale(tr, 0.5));
  } else {
    Polynomial root;
    if (poly_sqrt(disc, root, 1e-9)) {
      lambdas.push_back(poly_scale(poly_add(tr, root), 0.5));
      lambdas.push_back(poly_scale(poly_sub(tr, root), 0.5));
    }
  }

  GiesekerReport rep;
  const int top = *std::max_element(spec.degrees.begin(), spec.degrees.end());
  const int bottom = static_cast<int>(std::floor(spec.slope()));
  for (int l = top; l >= bottom; --l) {
    for (const auto& lambda : lambdas) {
      const auto found = invariant_candidates(phi, lambda, l);
      if (found.empty()) continue;
      SubbundleCheck check;
      check.subbundle = found.front();
      check.verdict = Verdict::Stable;
      for (int k : k_range) {
        const double sub = double(l + k + 1);
        const double whole = double(spec.degree() + r * (k + 1)) / r;
        check.k_values.push_back(k);
        check.sub_ratio.push_back(sub);
        check.bundle_ratio.push_back(whole);
        if (sub > whole + 1e-12) check.verdict = Verdict::Unstable;
        else if (std::abs(sub - whole) <= 1e-12) check.verdict = worse(check.verdict, Verdict::Semistable);
      }
      rep.verdict = worse(rep.verdict, check.verdict);
      rep.invariant_subbundles.push_back(std::move(check));
      break;  // one representative per degree
    }
  }
  return rep;
}

} // namespace higgsbal
