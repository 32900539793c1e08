// Hybrid linear inverted pendulum: closed-form single-support flow,
// step-to-step matrices, orbital slope, the constant-push disturbance map,
// and the deadbeat / LQR baseline stepping gains.
#pragma once

#include <utility>

#include <Eigen/Dense>

namespace slstep {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using RowVec2 = Eigen::RowVector2d;

// Pre-impact horizontal COM state: position relative to the stance foot and
// velocity.
struct DiscreteState {
  double p = 0.0;
  double v = 0.0;

  Vec2 vec() const { return Vec2(p, v); }
  static DiscreteState from_vec(const Vec2& x) { return {x[0], x[1]}; }
};

struct HlipParams {
  double z0;        // COM height [m]
  double T;         // step duration [s]
  double g = 9.81;  // gravity [m/s^2]
  double m;         // mass [kg]

  // Pendulum rate sqrt(g/z0).
  double lambda() const;
  void validate() const;  // throws std::invalid_argument
};

struct GainMatrix {
  RowVec2 K = RowVec2::Zero();
};

// exp(A_c t) for A_c = [[0,1],[lambda^2,0]], in cosh/sinh closed form.
Mat2 ssp_flow_matrix(double lambda, double t);

// Homogeneous SSP flow from x0 over time t >= 0.
DiscreteState ssp_flow(const DiscreteState& x0, double t, const HlipParams& params);

// Step-to-step matrices: x_{k+1} = A x_k + B u_k with the step reset
// p+ = p- - u propagated through one SSP. A = exp(A_c T), B = -A [1;0].
std::pair<Mat2, Vec2> s2s_matrices(const HlipParams& params);

// sigma_1 = lambda * coth(lambda T / 2).
double orbital_slope_sigma1(const HlipParams& params);

// State shift caused by a constant horizontal force applied over one whole
// SSP: w_ext = F * sinh(lambda T)/(m lambda) * [1/sigma_1, 1]^T.
Vec2 push_to_disturbance(double F_ext, const HlipParams& params);

// Closed-form solution of xdot = A_c x + [0; F/m] at time t >= 0.
DiscreteState pushed_flow(const DiscreteState& x0, double F_ext, double t,
                          const HlipParams& params);

// Gain placing every closed-loop eigenvalue of (A + B K) at zero, via
// Ackermann's formula. Throws std::invalid_argument if (A, B) is not
// controllable. Works for any state dimension.
Eigen::MatrixXd deadbeat_gain_general(const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& B);
GainMatrix deadbeat_gain(const Mat2& A, const Vec2& B);

// Discrete LQR gain K = -(R + B'PB)^{-1} B'PA with P from fixed-point
// iteration of the Riccati equation to residual <= 1e-10.
GainMatrix dlqr_gain(const Mat2& A, const Vec2& B, const Mat2& Q, double R);

// Stepping law u = u_ref + K (x - x_ref).
double hlip_stepping(const DiscreteState& x, const DiscreteState& x_ref,
                     double u_ref, const GainMatrix& K);

// Fixed point (I - A)^{-1} B u* of the H-LIP step map; the period-1 orbit
// state used by the baseline data-collection controller.
DiscreteState hlip_p1_state(const HlipParams& params, double u_star);

}  // namespace slstep
