#include "cavsim/kinematics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cavsim {

namespace {

constexpr double kSteeringDomainMargin = 1e-9;

bool all_finite(const VehicleState& x) {
  return std::isfinite(x.vx) && std::isfinite(x.phi) && std::isfinite(x.x) && std::isfinite(x.y);
}

bool all_finite(const ControlInput& u) {
  return std::isfinite(u.ax) && std::isfinite(u.delta_f);
}

}  // namespace

void validate_horizon(const HorizonConfig& h) {
  if (!(h.dt > 0.0) || !std::isfinite(h.dt)) {
    throw std::invalid_argument("horizon: dt must be positive");
  }
  if (h.nc < 1 || h.np <= h.nc) {
    std::ostringstream msg;
    msg << "horizon: need np > nc >= 1, got np=" << h.np << " nc=" << h.nc;
    throw std::invalid_argument(msg.str());
  }
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

double sideslip_angle(double delta_f, const VehicleParameters& p) {
  if (std::abs(delta_f) >= M_PI / 2.0 - kSteeringDomainMargin) {
    std::ostringstream msg;
    msg << "steering angle " << delta_f << " rad outside the model domain (|delta_f| < pi/2)";
    throw std::domain_error(msg.str());
  }
  return std::atan(p.lr / (p.lf + p.lr) * std::tan(delta_f));
}

Vec4 dynamics_rhs(const VehicleState& x, const ControlInput& u, const VehicleParameters& p) {
  if (!all_finite(x) || !all_finite(u)) {
    throw std::invalid_argument("dynamics_rhs: non-finite state or control");
  }
  const double beta = sideslip_angle(u.delta_f, p);
  const double cb = std::cos(beta);
  Vec4 f;
  f(0) = u.ax;
  f(1) = x.vx * std::tan(beta) / p.lr;
  f(2) = x.vx * std::cos(x.phi + beta) / cb;
  f(3) = x.vx * std::sin(x.phi + beta) / cb;
  return f;
}

void linearize(const VehicleState& x, const ControlInput& u, const VehicleParameters& p,
               Mat4& a_t, Mat42& b_t) {
  if (!all_finite(x) || !all_finite(u)) {
    throw std::invalid_argument("linearize: non-finite state or control");
  }
  const double beta = sideslip_angle(u.delta_f, p);
  const double cb = std::cos(beta);
  const double tb = std::tan(beta);
  const double cpb = std::cos(x.phi + beta);
  const double spb = std::sin(x.phi + beta);

  a_t.setZero();
  a_t(1, 0) = tb / p.lr;
  a_t(2, 0) = cpb / cb;
  a_t(2, 1) = -x.vx * spb / cb;
  a_t(3, 0) = spb / cb;
  a_t(3, 1) = x.vx * cpb / cb;

  // d(beta)/d(delta_f) through beta = atan(kr * tan(delta_f)).
  const double kr = p.lr / (p.lf + p.lr);
  const double td = std::tan(u.delta_f);
  const double sec2d = 1.0 + td * td;
  const double dbeta = kr * sec2d / (1.0 + kr * kr * td * td);
  const double sec2b = 1.0 / (cb * cb);

  b_t.setZero();
  b_t(0, 0) = 1.0;
  b_t(1, 1) = x.vx * sec2b / p.lr * dbeta;
  b_t(2, 1) = -x.vx * std::sin(x.phi) * sec2b * dbeta;
  b_t(3, 1) = x.vx * std::cos(x.phi) * sec2b * dbeta;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("matrix_exponential: non-finite input");
  }
  const Eigen::Index n = m.rows();
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  }
  const Eigen::MatrixXd scaled = m / std::ldexp(1.0, squarings);

  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 16; ++k) {
    term = (term * scaled / static_cast<double>(k)).eval();
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) {
    result = (result * result).eval();
  }
  return result;
}

void discretize(const Mat4& a_t, const Mat42& b_t, double dt, Mat4& a_k, Mat42& b_k) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("discretize: dt must be positive");
  }
  if (!a_t.allFinite() || !b_t.allFinite()) {
    throw std::invalid_argument("discretize: non-finite matrices");
  }
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(6, 6);
  block.topLeftCorner<4, 4>() = a_t;
  block.topRightCorner<4, 2>() = b_t;
  const Eigen::MatrixXd e = matrix_exponential(block * dt);
  a_k = e.topLeftCorner<4, 4>();
  b_k = e.topRightCorner<4, 2>();
}

void augment(const Mat4& a_k, const Mat42& b_k, Mat6& a_hat, Mat62& b_hat, Mat46& c_hat) {
  if (!a_k.allFinite() || !b_k.allFinite()) {
    throw std::invalid_argument("augment: non-finite matrices");
  }
  a_hat.setZero();
  a_hat.topLeftCorner<4, 4>() = a_k;
  a_hat.topRightCorner<4, 2>() = b_k;
  a_hat.bottomRightCorner<2, 2>().setIdentity();
  b_hat.topRows<4>() = b_k;
  b_hat.bottomRows<2>().setIdentity();
  c_hat.setZero();
  c_hat.leftCols<4>().setIdentity();
}

PredictionMatrices build_prediction(const Mat6& a_hat, const Mat62& b_hat, const Mat46& c_hat,
                                    const HorizonConfig& horizon) {
  validate_horizon(horizon);
  PredictionMatrices mats;
  mats.np = horizon.np;
  mats.nc = horizon.nc;
  mats.a_hat = a_hat;
  mats.b_hat = b_hat;
  mats.c_hat = c_hat;
  mats.a_k = a_hat.topLeftCorner<4, 4>();
  mats.b_k = a_hat.topRightCorner<4, 2>();

  mats.c_bar.resize(4 * horizon.np, 6);
  mats.d_bar = Eigen::MatrixXd::Zero(4 * horizon.np, 2 * horizon.nc);

  // Powers of a_hat accumulated once; block (p, q) of d_bar needs a_hat^(p-q).
  std::vector<Mat6> powers(horizon.np + 1);
  powers[0].setIdentity();
  for (int p = 1; p <= horizon.np; ++p) {
    powers[p] = powers[p - 1] * a_hat;
  }
  for (int p = 1; p <= horizon.np; ++p) {
    mats.c_bar.middleRows<4>(4 * (p - 1)) = c_hat * powers[p];
    const int qmax = std::min(p, horizon.nc);
    for (int q = 1; q <= qmax; ++q) {
      mats.d_bar.block<4, 2>(4 * (p - 1), 2 * (q - 1)) = c_hat * powers[p - q] * b_hat;
    }
  }
  return mats;
}

PredictionMatrices build_prediction(const VehicleState& x, const ControlInput& u,
                                    const VehicleParameters& p, const HorizonConfig& horizon) {
  Mat4 a_t;
  Mat42 b_t;
  linearize(x, u, p, a_t, b_t);
  Mat4 a_k;
  Mat42 b_k;
  discretize(a_t, b_t, horizon.dt, a_k, b_k);
  Mat6 a_hat;
  Mat62 b_hat;
  Mat46 c_hat;
  augment(a_k, b_k, a_hat, b_hat, c_hat);
  return build_prediction(a_hat, b_hat, c_hat, horizon);
}

Vec6 make_augmented_state(const VehicleState& x, const ControlInput& prev_u) {
  Vec6 xi;
  xi << x.vx, x.phi, x.x, x.y, prev_u.ax, prev_u.delta_f;
  return xi;
}

Eigen::VectorXd predict_outputs(const Vec6& xi0, const std::vector<ControlDelta>& du_seq,
                                const PredictionMatrices& mats) {
  if (static_cast<int>(du_seq.size()) != mats.nc) {
    std::ostringstream msg;
    msg << "predict_outputs: increment sequence length " << du_seq.size()
        << " does not match control horizon " << mats.nc;
    throw std::invalid_argument(msg.str());
  }
  Eigen::VectorXd du(2 * mats.nc);
  for (int q = 0; q < mats.nc; ++q) {
    du(2 * q) = du_seq[q].d_ax;
    du(2 * q + 1) = du_seq[q].d_delta_f;
  }
  return mats.c_bar * xi0 + mats.d_bar * du;
}

std::vector<VehicleState> predict_trajectory(const Vec6& xi0,
                                             const std::vector<ControlDelta>& du_seq,
                                             const PredictionMatrices& mats) {
  const Eigen::VectorXd upsilon = predict_outputs(xi0, du_seq, mats);
  std::vector<VehicleState> states(mats.np);
  for (int p = 0; p < mats.np; ++p) {
    states[p] = VehicleState{upsilon(4 * p), upsilon(4 * p + 1), upsilon(4 * p + 2),
                             upsilon(4 * p + 3)};
  }
  return states;
}

VehicleState integrate_plant(const VehicleState& x, const ControlInput& u,
                             const VehicleParameters& p, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("integrate_plant: dt must be positive");
  }
  constexpr int kSubsteps = 4;
  const double h = dt / kSubsteps;
  Vec4 state(x.vx, x.phi, x.x, x.y);
  auto rhs = [&](const Vec4& s) {
    return dynamics_rhs(VehicleState{s(0), s(1), s(2), s(3)}, u, p);
  };
  for (int i = 0; i < kSubsteps; ++i) {
    const Vec4 k1 = rhs(state);
    const Vec4 k2 = rhs(state + 0.5 * h * k1);
    const Vec4 k3 = rhs(state + 0.5 * h * k2);
    const Vec4 k4 = rhs(state + h * k3);
    state += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  VehicleState out{state(0), wrap_angle(state(1)), state(2), state(3)};
  if (out.vx < 0.0) out.vx = 0.0;
  return out;
}

}  // namespace cavsim
