#include "slstep/lp.hpp"

#include <cmath>
#include <stdexcept>

#include "slstep/textio.hpp"

namespace slstep {

namespace {

constexpr double kTol = 1e-9;        // reduced-cost / pivot tolerance
constexpr double kFeasTol = 1e-7;    // phase-1 feasibility tolerance
constexpr long kMaxPivots = 1000000;

// How each original variable maps onto the nonnegative internal ones.
struct VarMap {
  enum Kind { kShift, kNegShift, kSplit } kind = kSplit;
  double offset = 0.0;  // lo for kShift, hi for kNegShift
  int col = 0;          // first internal column
};

struct Tableau {
  Eigen::MatrixXd A;  // m x n, kept in canonical (basis = identity) form
  Eigen::VectorXd b;  // m, nonnegative throughout
  std::vector<int> basis;
  int n_struct = 0;      // structural + slack columns (artificials follow)
  int n_total = 0;
  long pivots = 0;

  void pivot(int row, int col) {
    const double piv = A(row, col);
    A.row(row) /= piv;
    b(row) /= piv;
    for (int i = 0; i < A.rows(); ++i) {
      if (i == row) continue;
      const double f = A(i, col);
      if (f == 0.0) continue;
      A.row(i) -= f * A.row(row);
      b(i) -= f * b(row);
      A(i, col) = 0.0;
      if (b(i) < 0.0 && b(i) > -1e-11) b(i) = 0.0;
    }
    A(row, col) = 1.0;
    basis[row] = col;
    ++pivots;
  }
};

// Runs simplex on the tableau for the given cost vector over columns
// [0, n_cols). Columns with allow[j] == false never enter. Returns false if
// unbounded.
bool run_simplex(Tableau& t, const Eigen::VectorXd& cost, int n_cols,
                 const std::vector<char>& allow) {
  const int m = static_cast<int>(t.A.rows());

  // Reduced costs for the current basis; recomputed from scratch every so
  // often because the incremental updates drift over long degenerate runs.
  Eigen::VectorXd r;
  auto refresh = [&] {
    r = cost;
    for (int i = 0; i < m; ++i) {
      const double cb = cost[t.basis[i]];
      if (cb == 0.0) continue;
      r -= cb * t.A.row(i).head(n_cols).transpose();
    }
    for (int i = 0; i < m; ++i) r[t.basis[i]] = 0.0;
  };
  refresh();

  int degenerate_streak = 0;
  int since_refresh = 0;
  bool bland = false;
  while (true) {
    if (t.pivots > kMaxPivots)
      throw std::runtime_error("lp_solve: pivot cap exceeded");
    if (++since_refresh >= 256) {
      refresh();
      since_refresh = 0;
    }

    // Entering column: Bland's lowest-index rule when anti-cycling is
    // engaged, otherwise most-negative reduced cost (lowest index on ties).
    int enter = -1;
    if (bland) {
      for (int j = 0; j < n_cols; ++j)
        if (allow[j] && r[j] < -kTol) {
          enter = j;
          break;
        }
    } else {
      double best = -kTol;
      for (int j = 0; j < n_cols; ++j)
        if (allow[j] && r[j] < best) {
          best = r[j];
          enter = j;
        }
    }
    if (enter < 0) {
      // Confirm optimality on exact reduced costs before returning.
      if (since_refresh > 0) {
        refresh();
        since_refresh = 0;
        bool any = false;
        for (int j = 0; j < n_cols && !any; ++j) any = allow[j] && r[j] < -kTol;
        if (!any) return true;
        continue;
      }
      return true;
    }

    // Ratio test; ties broken by the smallest basis variable index.
    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      const double a = t.A(i, enter);
      if (a > kTol) {
        const double ratio = t.b(i) / a;
        if (leave < 0 || ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && t.basis[i] < t.basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) {
      // A drifted reduced cost can flag a column that is not actually
      // improving; re-check exactly before declaring the problem unbounded.
      if (since_refresh > 0) {
        refresh();
        since_refresh = 0;
        if (r[enter] >= -kTol) continue;
      }
      return false;  // unbounded
    }

    t.pivot(leave, enter);
    const double re = r[enter];
    r -= re * t.A.row(leave).head(n_cols).transpose();
    r[enter] = 0.0;

    if (best_ratio <= 1e-12) {
      if (++degenerate_streak > 64) bland = true;
    } else {
      degenerate_streak = 0;
      bland = false;
    }
  }
}

}  // namespace

void LpProblem::validate() const {
  const int n = num_vars();
  auto check = [&](const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                   const char* what) {
    if (A.size() > 0 || b.size() > 0) {
      if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
        throw std::invalid_argument(std::string("LpProblem: bad ") + what +
                                    " dimensions");
      if (!A.allFinite() || !b.allFinite())
        throw std::invalid_argument(std::string("LpProblem: NaN in ") + what);
    }
  };
  check(A_ub, b_ub, "A_ub");
  check(A_eq, b_eq, "A_eq");
  if (!c.allFinite()) throw std::invalid_argument("LpProblem: NaN in c");
  if (!bounds.empty() && static_cast<int>(bounds.size()) != n)
    throw std::invalid_argument("LpProblem: bounds size mismatch");
  for (const auto& [lo, hi] : bounds) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi)
      throw std::invalid_argument("LpProblem: bad variable bound");
  }
}

LpSolution lp_solve(const LpProblem& p) {
  p.validate();
  const int n = p.num_vars();
  const int m_ub0 = static_cast<int>(p.A_ub.rows());
  const int m_eq = static_cast<int>(p.A_eq.rows());

  // Map every variable onto nonnegative internal ones.
  std::vector<VarMap> vmap(n);
  int n_vars = 0;
  std::vector<std::pair<int, double>> upper_rows;  // (var, hi - lo)
  for (int j = 0; j < n; ++j) {
    double lo = -kLpInf, hi = kLpInf;
    if (!p.bounds.empty()) {
      lo = p.bounds[j].first;
      hi = p.bounds[j].second;
    }
    VarMap& vm = vmap[j];
    vm.col = n_vars;
    if (std::isfinite(lo)) {
      vm.kind = VarMap::kShift;
      vm.offset = lo;
      if (std::isfinite(hi)) upper_rows.push_back({j, hi - lo});
      n_vars += 1;
    } else if (std::isfinite(hi)) {
      vm.kind = VarMap::kNegShift;
      vm.offset = hi;
      n_vars += 1;
    } else {
      vm.kind = VarMap::kSplit;
      n_vars += 2;
    }
  }

  const int m_ub = m_ub0 + static_cast<int>(upper_rows.size());
  const int m = m_ub + m_eq;
  const int n_slack = m_ub;

  Tableau t;
  t.n_struct = n_vars + n_slack;
  t.n_total = t.n_struct + m;  // room for one artificial per row
  t.A = Eigen::MatrixXd::Zero(m, t.n_total);
  t.b = Eigen::VectorXd::Zero(m);
  t.basis.assign(m, -1);

  // Writes original-variable coefficient a for var j into tableau row.
  auto put = [&](int row, int j, double a, double* rhs) {
    const VarMap& vm = vmap[j];
    switch (vm.kind) {
      case VarMap::kShift:
        t.A(row, vm.col) += a;
        *rhs -= a * vm.offset;
        break;
      case VarMap::kNegShift:
        t.A(row, vm.col) -= a;
        *rhs -= a * vm.offset;
        break;
      case VarMap::kSplit:
        t.A(row, vm.col) += a;
        t.A(row, vm.col + 1) -= a;
        break;
    }
  };

  std::vector<std::string> row_names(m);
  int row = 0;
  for (int i = 0; i < m_ub0; ++i, ++row) {
    double rhs = p.b_ub(i);
    for (int j = 0; j < n; ++j)
      if (p.A_ub(i, j) != 0.0) put(row, j, p.A_ub(i, j), &rhs);
    t.A(row, n_vars + row) = 1.0;  // slack
    t.b(row) = rhs;
    row_names[row] = i < static_cast<int>(p.ub_names.size())
                         ? p.ub_names[i]
                         : ("ub[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < upper_rows.size(); ++i, ++row) {
    const auto [j, width] = upper_rows[i];
    double rhs = width;
    t.A(row, vmap[j].col) = 1.0;
    t.A(row, n_vars + row) = 1.0;
    t.b(row) = rhs;
    row_names[row] = "bound[" + std::to_string(j) + "]";
  }
  for (int i = 0; i < m_eq; ++i, ++row) {
    double rhs = p.b_eq(i);
    for (int j = 0; j < n; ++j)
      if (p.A_eq(i, j) != 0.0) put(row, j, p.A_eq(i, j), &rhs);
    t.b(row) = rhs;
    row_names[row] = i < static_cast<int>(p.eq_names.size())
                         ? p.eq_names[i]
                         : ("eq[" + std::to_string(i) + "]");
  }

  // Normalize signs, pick the initial basis, add artificials where needed.
  int n_art = 0;
  std::vector<int> art_row_of_col;
  for (int i = 0; i < m; ++i) {
    if (t.b(i) < 0.0) {
      t.A.row(i) = -t.A.row(i);
      t.b(i) = -t.b(i);
    }
    const bool slack_usable =
        i < m_ub && t.A(i, n_vars + i) == 1.0;
    if (slack_usable) {
      t.basis[i] = n_vars + i;
    } else {
      const int col = t.n_struct + n_art;
      t.A(i, col) = 1.0;
      t.basis[i] = col;
      art_row_of_col.push_back(i);
      ++n_art;
    }
  }
  const int n_cols1 = t.n_struct + n_art;

  LpSolution sol;

  // Phase 1: minimize the artificial sum.
  if (n_art > 0) {
    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(n_cols1);
    for (int a = 0; a < n_art; ++a) cost1[t.n_struct + a] = 1.0;
    std::vector<char> allow(n_cols1, 1);
    if (!run_simplex(t, cost1, n_cols1, allow))
      throw std::runtime_error("lp_solve: phase 1 unbounded");

    double infeas = 0.0;
    for (int i = 0; i < m; ++i)
      if (t.basis[i] >= t.n_struct) infeas += t.b(i);
    if (infeas > kFeasTol) {
      sol.status = LpStatus::kInfeasible;
      sol.pivots = t.pivots;
      // Report the row carrying the largest residual artificial.
      int worst = -1;
      for (int i = 0; i < m; ++i)
        if (t.basis[i] >= t.n_struct && t.b(i) > kFeasTol &&
            (worst < 0 || t.b(i) > t.b(worst)))
          worst = i;
      if (worst >= 0) sol.infeasible_row = row_names[worst];
      return sol;
    }

    // Drive residual artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (t.basis[i] < t.n_struct) continue;
      int col = -1;
      for (int j = 0; j < t.n_struct; ++j)
        if (std::abs(t.A(i, j)) > kTol) {
          col = j;
          break;
        }
      if (col >= 0) t.pivot(i, col);
      // Otherwise the row is redundant; its artificial stays basic at zero
      // and is simply never allowed to grow (banned from entering).
    }
  }

  // Phase 2 cost over structural columns.
  Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(n_cols1);
  for (int j = 0; j < n; ++j) {
    const VarMap& vm = vmap[j];
    const double cj = p.c(j);
    if (cj == 0.0) continue;
    switch (vm.kind) {
      case VarMap::kShift:
        cost2[vm.col] += cj;
        break;
      case VarMap::kNegShift:
        cost2[vm.col] -= cj;
        break;
      case VarMap::kSplit:
        cost2[vm.col] += cj;
        cost2[vm.col + 1] -= cj;
        break;
    }
  }
  std::vector<char> allow2(n_cols1, 1);
  for (int a = 0; a < n_art; ++a) allow2[t.n_struct + a] = 0;
  if (!run_simplex(t, cost2, n_cols1, allow2)) {
    sol.status = LpStatus::kUnbounded;
    sol.pivots = t.pivots;
    return sol;
  }

  // Recover the original variables.
  Eigen::VectorXd y = Eigen::VectorXd::Zero(t.n_struct + n_art);
  for (int i = 0; i < m; ++i) y[t.basis[i]] = t.b(i);
  sol.x = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const VarMap& vm = vmap[j];
    switch (vm.kind) {
      case VarMap::kShift:
        sol.x[j] = vm.offset + y[vm.col];
        break;
      case VarMap::kNegShift:
        sol.x[j] = vm.offset - y[vm.col];
        break;
      case VarMap::kSplit:
        sol.x[j] = y[vm.col] - y[vm.col + 1];
        break;
    }
  }
  sol.status = LpStatus::kOptimal;
  sol.objective = p.c.dot(sol.x);
  sol.pivots = t.pivots;
  return sol;
}

std::string lp_dump(const LpProblem& p) {
  std::string out = "lp " + std::to_string(p.num_vars()) + " vars\n";
  out += "minimize";
  for (int j = 0; j < p.num_vars(); ++j) out += " " + format_double(p.c[j]);
  out += "\n";
  for (int i = 0; i < p.A_ub.rows(); ++i) {
    out += "ub";
    for (int j = 0; j < p.num_vars(); ++j) out += " " + format_double(p.A_ub(i, j));
    out += " <= " + format_double(p.b_ub(i)) + "\n";
  }
  for (int i = 0; i < p.A_eq.rows(); ++i) {
    out += "eq";
    for (int j = 0; j < p.num_vars(); ++j) out += " " + format_double(p.A_eq(i, j));
    out += " == " + format_double(p.b_eq(i)) + "\n";
  }
  for (std::size_t j = 0; j < p.bounds.size(); ++j)
    out += "bound " + format_double(p.bounds[j].first) + " " +
           format_double(p.bounds[j].second) + "\n";
  return out;
}

void lp_dump_to_file(const LpProblem& p, const std::string& path) {
  atomic_write(path, lp_dump(p));
}

}  // namespace slstep
