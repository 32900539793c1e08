#include "slstep/sets.hpp"

#include <cmath>
#include <stdexcept>

namespace slstep {

BoxSet::BoxSet(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size())
    throw std::invalid_argument("BoxSet: bound dimensions differ");
  if (!lo_.allFinite() || !hi_.allFinite())
    throw std::invalid_argument("BoxSet: non-finite bound");
  if ((lo_.array() > hi_.array()).any())
    throw std::invalid_argument("BoxSet: lo > hi");
}

BoxSet::BoxSet(std::initializer_list<double> lo, std::initializer_list<double> hi)
    : BoxSet(Eigen::Map<const Eigen::VectorXd>(lo.begin(),
                                               static_cast<Eigen::Index>(lo.size())),
             Eigen::Map<const Eigen::VectorXd>(
                 hi.begin(), static_cast<Eigen::Index>(hi.size()))) {}

BoxSet BoxSet::interval(double lo, double hi) {
  Eigen::VectorXd l(1), h(1);
  l[0] = lo;
  h[0] = hi;
  return BoxSet(l, h);
}

BoxSet BoxSet::symmetric(const Eigen::VectorXd& radius) {
  if ((radius.array() < 0).any())
    throw std::invalid_argument("BoxSet::symmetric: negative radius");
  return BoxSet(-radius, radius);
}

BoxSet BoxSet::zero(int dim) {
  return BoxSet(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim));
}

bool BoxSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo_.size())
    throw std::invalid_argument("BoxSet::contains: dimension mismatch");
  return ((x.array() >= lo_.array() - tol) && (x.array() <= hi_.array() + tol)).all();
}

bool BoxSet::contains_box(const BoxSet& inner, double tol) const {
  if (inner.dim() != dim())
    throw std::invalid_argument("BoxSet::contains_box: dimension mismatch");
  return ((inner.lo_.array() >= lo_.array() - tol) &&
          (inner.hi_.array() <= hi_.array() + tol))
      .all();
}

BoxSet BoxSet::scaled(double s) const {
  if (s < 0) throw std::invalid_argument("BoxSet::scaled: negative factor");
  return BoxSet(s * lo_, s * hi_);
}

BoxSet minkowski_sum(const BoxSet& a, const BoxSet& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("minkowski_sum: dimension mismatch");
  return BoxSet(a.lo() + b.lo(), a.hi() + b.hi());
}

BoxSet shift(const BoxSet& s, const Eigen::VectorXd& c) {
  if (c.size() != s.lo().size())
    throw std::invalid_argument("shift: dimension mismatch");
  return BoxSet(s.lo() - c, s.hi() - c);
}

Polytope to_halfspaces(const BoxSet& s) {
  const int n = s.dim();
  Polytope p;
  p.G = Eigen::MatrixXd::Zero(2 * n, n);
  p.g = Eigen::VectorXd::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    p.G(2 * i, i) = 1.0;
    p.g(2 * i) = s.hi()[i];
    p.G(2 * i + 1, i) = -1.0;
    p.g(2 * i + 1) = -s.lo()[i];
  }
  return p;
}

bool contains(const BoxSet& s, const Eigen::VectorXd& x, double tol) {
  return s.contains(x, tol);
}

std::vector<Eigen::VectorXd> vertices(const BoxSet& s) {
  const int n = s.dim();
  if (n > 12) throw std::invalid_argument("vertices: dimension > 12");
  std::vector<Eigen::VectorXd> out;
  out.reserve(std::size_t{1} << n);
  for (std::size_t b = 0; b < (std::size_t{1} << n); ++b) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = (b >> i) & 1 ? s.hi()[i] : s.lo()[i];
    out.push_back(std::move(v));
  }
  return out;
}

BoxSet intersect(const BoxSet& a, const BoxSet& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("intersect: dimension mismatch");
  Eigen::VectorXd lo = a.lo().cwiseMax(b.lo());
  Eigen::VectorXd hi = a.hi().cwiseMin(b.hi());
  if ((lo.array() > hi.array()).any())
    throw std::invalid_argument("intersect: empty intersection");
  return BoxSet(lo, hi);
}

BoxSet mrpi_outer(const Eigen::MatrixXd& A, const BoxSet& W, int n_terms,
                  double inflation) {
  if (A.rows() != A.cols() || A.rows() != W.dim())
    throw std::invalid_argument("mrpi_outer: dimension mismatch");
  if (n_terms < 1) throw std::invalid_argument("mrpi_outer: n_terms < 1");
  if (inflation < 0) throw std::invalid_argument("mrpi_outer: negative inflation");

  const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
  if (!(rho < 1.0))
    throw std::invalid_argument("mrpi_outer: spectral radius >= 1");

  // Bounding box of A^i W accumulates as center A^i c, halfwidth |A^i| r.
  const Eigen::VectorXd c = W.center();
  const Eigen::VectorXd r = W.halfwidth();
  Eigen::MatrixXd Ai = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(W.dim());
  Eigen::VectorXd hi = Eigen::VectorXd::Zero(W.dim());
  for (int i = 0; i < n_terms; ++i) {
    Eigen::VectorXd ci = Ai * c;
    Eigen::VectorXd ri = Ai.cwiseAbs() * r;
    lo += ci - ri;
    hi += ci + ri;
    Ai = A * Ai;
  }
  return BoxSet(lo, hi).scaled(1.0 + inflation);
}

}  // namespace slstep
