// Dense linear-program solver: two-phase primal simplex.
//
// Sized for the problems in this project (tens to a few hundred variables);
// everything is dense and deterministic. The interface is narrow so a vetted
// external solver could replace the implementation without touching callers.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace slstep {

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

struct LpProblem {
  Eigen::VectorXd c;     // minimize c'x
  Eigen::MatrixXd A_ub;  // A_ub x <= b_ub
  Eigen::VectorXd b_ub;
  Eigen::MatrixXd A_eq;  // A_eq x = b_eq
  Eigen::VectorXd b_eq;
  // Per-variable (lo, hi); +-kLpInf allowed. Empty means all free.
  std::vector<std::pair<double, double>> bounds;

  // Optional row labels used in infeasibility diagnostics.
  std::vector<std::string> ub_names;
  std::vector<std::string> eq_names;

  int num_vars() const { return static_cast<int>(c.size()); }
  void validate() const;  // dimensions consistent, no NaN
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  // First structurally violated row label when infeasible (may be empty).
  std::string infeasible_row;
  long pivots = 0;
};

// Two-phase dense simplex. Pricing is most-negative reduced cost with
// lowest-index tie breaking; after a run of degenerate pivots it switches to
// Bland's rule until progress resumes, which guarantees termination.
// Tolerances: 1e-9 on reduced costs and pivots. Throws std::runtime_error
// if the pivot cap (1e6) is exceeded.
LpSolution lp_solve(const LpProblem& p);

// Fixed-format full-precision dump (one row per constraint) for external
// cross-checking.
std::string lp_dump(const LpProblem& p);
void lp_dump_to_file(const LpProblem& p, const std::string& path);

}  // namespace slstep
