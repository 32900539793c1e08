#include "slstep/hlip.hpp"

#include <cmath>
#include <stdexcept>

namespace slstep {

double HlipParams::lambda() const { return std::sqrt(g / z0); }

void HlipParams::validate() const {
  if (!(z0 > 0) || !(T > 0) || !(g > 0) || !(m > 0))
    throw std::invalid_argument("HlipParams: z0, T, g, m must be positive");
  if (!std::isfinite(lambda()))
    throw std::invalid_argument("HlipParams: lambda not finite");
}

Mat2 ssp_flow_matrix(double lambda, double t) {
  const double ch = std::cosh(lambda * t);
  const double sh = std::sinh(lambda * t);
  Mat2 M;
  M << ch, sh / lambda, lambda * sh, ch;
  return M;
}

DiscreteState ssp_flow(const DiscreteState& x0, double t, const HlipParams& params) {
  params.validate();
  if (t < 0) throw std::invalid_argument("ssp_flow: negative time");
  return DiscreteState::from_vec(ssp_flow_matrix(params.lambda(), t) * x0.vec());
}

std::pair<Mat2, Vec2> s2s_matrices(const HlipParams& params) {
  params.validate();
  const Mat2 A = ssp_flow_matrix(params.lambda(), params.T);
  const Vec2 B = -A.col(0);
  return {A, B};
}

double orbital_slope_sigma1(const HlipParams& params) {
  params.validate();
  const double lam = params.lambda();
  return lam / std::tanh(0.5 * params.T * lam);
}

Vec2 push_to_disturbance(double F_ext, const HlipParams& params) {
  params.validate();
  const double lam = params.lambda();
  const double scale = F_ext * std::sinh(params.T * lam) / (params.m * lam);
  return Vec2(scale / orbital_slope_sigma1(params), scale);
}

DiscreteState pushed_flow(const DiscreteState& x0, double F_ext, double t,
                          const HlipParams& params) {
  params.validate();
  if (t < 0) throw std::invalid_argument("pushed_flow: negative time");
  const double lam = params.lambda();
  // Equilibrium of the forced flow: A_c x_eq = -[0; F/m].
  const Vec2 x_eq(-F_ext / (params.m * lam * lam), 0.0);
  const Mat2 E = ssp_flow_matrix(lam, t);
  return DiscreteState::from_vec(E * (x0.vec() - x_eq) + x_eq);
}

Eigen::MatrixXd deadbeat_gain_general(const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& B) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || B.cols() != 1)
    throw std::invalid_argument("deadbeat_gain: expected n x n A and n x 1 B");

  Eigen::MatrixXd C(n, n);  // controllability matrix [B, AB, ...]
  Eigen::VectorXd col = B.col(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    C.col(i) = col;
    col = A * col;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (!lu.isInvertible())
    throw std::invalid_argument("deadbeat_gain: (A, B) not controllable");

  // Ackermann with desired characteristic polynomial z^n: K = -e_n' C^{-1} A^n.
  Eigen::MatrixXd An = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) An = A * An;
  Eigen::RowVectorXd en = Eigen::RowVectorXd::Zero(n);
  en[n - 1] = 1.0;
  return -(en * lu.inverse()) * An;
}

GainMatrix deadbeat_gain(const Mat2& A, const Vec2& B) {
  GainMatrix K;
  K.K = deadbeat_gain_general(A, B);
  return K;
}

GainMatrix dlqr_gain(const Mat2& A, const Vec2& B, const Mat2& Q, double R) {
  if (!(R > 0)) throw std::invalid_argument("dlqr_gain: R must be positive");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("dlqr_gain: Q not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat2> es(Q);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("dlqr_gain: Q not positive semidefinite");

  Mat2 P = Q;
  const int max_iters = 100000;
  for (int it = 0; it < max_iters; ++it) {
    const double denom = R + B.dot(P * B);
    const RowVec2 BtPA = B.transpose() * P * A;
    const Mat2 P_next = A.transpose() * P * A - BtPA.transpose() * BtPA / denom + Q;
    const double delta = (P_next - P).cwiseAbs().maxCoeff();
    P = P_next;
    if (delta <= 1e-13 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      const double residual =
          (P - (A.transpose() * P * A -
                (A.transpose() * P * B) * (B.transpose() * P * A) /
                    (R + B.dot(P * B)) +
                Q))
              .cwiseAbs()
              .maxCoeff();
      if (residual > 1e-10)
        throw std::runtime_error("dlqr_gain: Riccati residual above tolerance");
      GainMatrix K;
      K.K = -(B.transpose() * P * A) / (R + B.dot(P * B));
      return K;
    }
  }
  throw std::runtime_error("dlqr_gain: Riccati iteration did not converge");
}

double hlip_stepping(const DiscreteState& x, const DiscreteState& x_ref,
                     double u_ref, const GainMatrix& K) {
  return u_ref + K.K * (x.vec() - x_ref.vec());
}

DiscreteState hlip_p1_state(const HlipParams& params, double u_star) {
  const auto [A, B] = s2s_matrices(params);
  const Mat2 M = Mat2::Identity() - A;
  return DiscreteState::from_vec(M.fullPivLu().solve(B * u_star));
}

}  // namespace slstep
