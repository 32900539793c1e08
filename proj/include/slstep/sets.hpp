// Axis-aligned interval boxes and their halfspace form.
//
// All constraint and disturbance sets in this project are boxes; Polytope
// exists only as the H-representation consumed by the robust synthesis LP.
#pragma once

#include <vector>

#include <Eigen/Dense>

namespace slstep {

struct Polytope {
  Eigen::MatrixXd G;  // one row per face
  Eigen::VectorXd g;

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    return ((G * x - g).array() <= tol).all();
  }
};

class BoxSet {
 public:
  // Requires lo <= hi coordinate-wise and all entries finite.
  BoxSet(Eigen::VectorXd lo, Eigen::VectorXd hi);
  BoxSet(std::initializer_list<double> lo, std::initializer_list<double> hi);

  static BoxSet interval(double lo, double hi);
  // [-r, r] per coordinate, r >= 0.
  static BoxSet symmetric(const Eigen::VectorXd& radius);
  static BoxSet zero(int dim);

  int dim() const { return static_cast<int>(lo_.size()); }
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }
  Eigen::VectorXd center() const { return 0.5 * (lo_ + hi_); }
  Eigen::VectorXd halfwidth() const { return 0.5 * (hi_ - lo_); }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  bool contains_box(const BoxSet& inner, double tol = 0.0) const;

  // Scalar multiple {s*x : x in this}, s >= 0.
  BoxSet scaled(double s) const;

 private:
  Eigen::VectorXd lo_, hi_;
};

BoxSet minkowski_sum(const BoxSet& a, const BoxSet& b);

// The translated set S - c (e.g. X^e = X - x*).
BoxSet shift(const BoxSet& s, const Eigen::VectorXd& c);

// Rows are (+e_i, hi_i), (-e_i, -lo_i) per coordinate.
Polytope to_halfspaces(const BoxSet& s);

bool contains(const BoxSet& s, const Eigen::VectorXd& x, double tol = 0.0);

// All 2^n corners; corner b has coordinate i at hi iff bit i of b is set.
std::vector<Eigen::VectorXd> vertices(const BoxSet& s);

// Largest box inside both; throws if the intersection is empty.
BoxSet intersect(const BoxSet& a, const BoxSet& b);

// Box outer bound of the truncated sum  W (+) AW (+) ... (+) A^{n-1}W,
// scaled by (1 + inflation). Requires spectral_radius(A) < 1. Used only to
// propose the re-entry set S0.
BoxSet mrpi_outer(const Eigen::MatrixXd& A, const BoxSet& W, int n_terms,
                  double inflation);

}  // namespace slstep
