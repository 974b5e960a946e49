#pragma once

#include <Eigen/Dense>
#include <vector>

// Vehicle motion model and horizon-lifted motion prediction.
//
// The plant is a kinematic bicycle with state x = [vx, phi, X, Y] and
// control u = [ax, delta_f]. For prediction the model is linearized about
// the current operating point, discretized with an exact zero-order hold,
// augmented with the previous control (so that control increments become
// the decision variables), and lifted over the prediction horizon:
//
//   Y(k) = C_bar * xi(k) + D_bar * dU(k)
//
// with xi = [x, u(k-1)], dU the stacked control-increment sequence over
// the control horizon, and Y the stacked predicted outputs over the
// prediction horizon. The linearization is frozen for the whole horizon.

namespace cavsim {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;
using Mat46 = Eigen::Matrix<double, 4, 6>;

struct VehicleState {
  double vx = 0.0;   // longitudinal velocity, m/s (>= 0)
  double phi = 0.0;  // yaw angle, rad, normalized to (-pi, pi]
  double x = 0.0;    // global position, m
  double y = 0.0;    // global position, m
};

struct ControlInput {
  double ax = 0.0;       // longitudinal acceleration, m/s^2
  double delta_f = 0.0;  // front-wheel steering angle, rad
};

struct ControlDelta {
  double d_ax = 0.0;       // acceleration increment per step, m/s^2
  double d_delta_f = 0.0;  // steering increment per step, rad
};

struct VehicleParameters {
  double lf = 1.5;  // front wheelbase, m
  double lr = 1.5;  // rear wheelbase, m
  double lv = 4.5;  // vehicle-length safety coefficient, m
};

struct HorizonConfig {
  double dt = 0.1;  // sampling time, s
  int np = 10;      // prediction horizon, steps
  int nc = 2;       // control horizon, steps; np > nc >= 1
};

// Throws std::invalid_argument if dt <= 0 or np <= nc or nc < 1.
void validate_horizon(const HorizonConfig& h);

struct PredictionMatrices {
  Mat4 a_k;   // discrete state matrix
  Mat42 b_k;  // discrete input matrix
  Mat6 a_hat;
  Mat62 b_hat;
  Mat46 c_hat;            // output selector [I4 0]
  Eigen::MatrixXd c_bar;  // (4*np) x 6 free-response lift
  Eigen::MatrixXd d_bar;  // (4*np) x (2*nc) forced-response lift, block lower-triangular
  int np = 0;
  int nc = 0;
};

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// Sideslip angle beta = arctan(lr / (lf + lr) * tan(delta_f)).
// Throws std::domain_error when |delta_f| is at or beyond pi/2.
double sideslip_angle(double delta_f, const VehicleParameters& p);

// Continuous-time state derivative [vx_dot, phi_dot, X_dot, Y_dot].
// Throws std::invalid_argument on non-finite inputs.
Vec4 dynamics_rhs(const VehicleState& x, const ControlInput& u, const VehicleParameters& p);

// Analytic Jacobians of dynamics_rhs with respect to state and control.
void linearize(const VehicleState& x, const ControlInput& u, const VehicleParameters& p,
               Mat4& a_t, Mat42& b_t);

// Exact zero-order-hold discretization: a_k = exp(a_t*dt),
// b_k = integral_0^dt exp(a_t*tau) dtau * b_t, via the exponential of the
// augmented matrix [[a_t, b_t], [0, 0]] * dt.
void discretize(const Mat4& a_t, const Mat42& b_t, double dt, Mat4& a_k, Mat42& b_k);

// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m);

// Control-increment augmentation: a_hat = [[a_k, b_k], [0, I2]],
// b_hat = [[b_k], [I2]], c_hat = [I4 0].
void augment(const Mat4& a_k, const Mat42& b_k, Mat6& a_hat, Mat62& b_hat, Mat46& c_hat);

// Horizon lift with the frozen-matrix assumption. Row block p (1-based) of
// c_bar is c_hat*a_hat^p; block (p, q) of d_bar is c_hat*a_hat^(p-q)*b_hat
// for q <= min(p, nc) and zero otherwise.
PredictionMatrices build_prediction(const Mat6& a_hat, const Mat62& b_hat, const Mat46& c_hat,
                                    const HorizonConfig& horizon);

// Convenience: linearize + discretize + augment + lift about (x, u).
PredictionMatrices build_prediction(const VehicleState& x, const ControlInput& u,
                                    const VehicleParameters& p, const HorizonConfig& horizon);

Vec6 make_augmented_state(const VehicleState& x, const ControlInput& prev_u);

// Stacked predicted outputs (4*np). du_seq must have length nc; increments
// beyond the control horizon are held at zero.
Eigen::VectorXd predict_outputs(const Vec6& xi0, const std::vector<ControlDelta>& du_seq,
                                const PredictionMatrices& mats);

// Predicted output sequence as vehicle states (length np).
std::vector<VehicleState> predict_trajectory(const Vec6& xi0,
                                             const std::vector<ControlDelta>& du_seq,
                                             const PredictionMatrices& mats);

// Advances the nonlinear model one step with fixed-step RK4 (4 substeps).
// Yaw is renormalized to (-pi, pi] and vx is clamped at 0 from below.
VehicleState integrate_plant(const VehicleState& x, const ControlInput& u,
                             const VehicleParameters& p, double dt);

}  // namespace cavsim
