#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cavsim/kinematics.hpp"

using namespace cavsim;

namespace {

// Step-by-step iteration of the discrete augmented system; the independent
// oracle for the horizon lift.
Eigen::VectorXd iterate_outputs(const Mat6& a_hat, const Mat62& b_hat, const Mat46& c_hat,
                                const Vec6& xi0, const std::vector<ControlDelta>& du_seq,
                                int np) {
  Eigen::VectorXd out(4 * np);
  Vec6 xi = xi0;
  for (int p = 0; p < np; ++p) {
    Eigen::Vector2d du = Eigen::Vector2d::Zero();
    if (p < static_cast<int>(du_seq.size())) {
      du << du_seq[p].d_ax, du_seq[p].d_delta_f;
    }
    xi = a_hat * xi + b_hat * du;
    out.segment<4>(4 * p) = c_hat * xi;
  }
  return out;
}

// Central finite differences of dynamics_rhs.
void fd_jacobians(const VehicleState& x, const ControlInput& u, const VehicleParameters& p,
                  Mat4& a_fd, Mat42& b_fd) {
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j) {
    VehicleState xp = x, xm = x;
    double* fields_p[4] = {&xp.vx, &xp.phi, &xp.x, &xp.y};
    double* fields_m[4] = {&xm.vx, &xm.phi, &xm.x, &xm.y};
    *fields_p[j] += h;
    *fields_m[j] -= h;
    a_fd.col(j) = (dynamics_rhs(xp, u, p) - dynamics_rhs(xm, u, p)) / (2.0 * h);
  }
  for (int j = 0; j < 2; ++j) {
    ControlInput up = u, um = u;
    double* fields_p[2] = {&up.ax, &up.delta_f};
    double* fields_m[2] = {&um.ax, &um.delta_f};
    *fields_p[j] += h;
    *fields_m[j] -= h;
    b_fd.col(j) = (dynamics_rhs(x, up, p) - dynamics_rhs(x, um, p)) / (2.0 * h);
  }
}

// RK4 integration of M_dot = a_t * M from the identity; oracle for the
// state-transition part of discretize.
Mat4 transition_by_ode(const Mat4& a_t, double dt, int steps) {
  Mat4 m = Mat4::Identity();
  const double h = dt / steps;
  auto rhs = [&](const Mat4& s) { return (a_t * s).eval(); };
  for (int i = 0; i < steps; ++i) {
    const Mat4 k1 = rhs(m);
    const Mat4 k2 = rhs(m + 0.5 * h * k1);
    const Mat4 k3 = rhs(m + 0.5 * h * k2);
    const Mat4 k4 = rhs(m + h * k3);
    m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return m;
}

}  // namespace

TEST_CASE("dynamics_rhs: zero steering is pure longitudinal motion") {
  VehicleParameters p;
  const Vec4 f = dynamics_rhs({5.0, 0.0, 0.0, 0.0}, {0.0, 0.0}, p);
  CHECK(f(0) == 0.0);
  CHECK(f(1) == 0.0);
  CHECK(f(2) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(f(3) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("dynamics_rhs: zero velocity zeroes all motion terms") {
  VehicleParameters p;
  const Vec4 f = dynamics_rhs({0.0, 1.0, 3.0, 4.0}, {2.0, 0.1}, p);
  CHECK(f(0) == 2.0);
  CHECK(f(1) == 0.0);
  CHECK(f(2) == 0.0);
  CHECK(f(3) == 0.0);
}

TEST_CASE("dynamics_rhs: matches the scalar formula at a steered point") {
  VehicleParameters p{1.5, 1.5, 4.5};
  const double beta = std::atan(0.5 * std::tan(0.2));
  const Vec4 f = dynamics_rhs({5.0, 0.0, 0.0, 0.0}, {0.0, 0.2}, p);
  CHECK(f(0) == doctest::Approx(0.0));
  CHECK(f(1) == doctest::Approx(5.0 * std::tan(beta) / 1.5).epsilon(1e-12));
  CHECK(f(2) == doctest::Approx(5.0 * std::cos(beta) / std::cos(beta)).epsilon(1e-12));
  CHECK(f(3) == doctest::Approx(5.0 * std::sin(beta) / std::cos(beta)).epsilon(1e-12));
}

TEST_CASE("dynamics_rhs: rejects non-finite input and near-quarter-turn steering") {
  VehicleParameters p;
  CHECK_THROWS_AS(dynamics_rhs({std::nan(""), 0, 0, 0}, {0, 0}, p), std::invalid_argument);
  CHECK_THROWS_AS(dynamics_rhs({5, 0, 0, 0}, {0, M_PI / 2}, p), std::domain_error);
}

TEST_CASE("linearize: known entries at straight driving") {
  VehicleParameters p;
  Mat4 a;
  Mat42 b;
  linearize({5.0, 0.0, 1.0, 2.0}, {0.0, 0.0}, p, a, b);
  CHECK(a(2, 0) == doctest::Approx(1.0));  // dXdot/dvx = cos(0)
  CHECK(a(2, 1) == doctest::Approx(0.0));  // dXdot/dphi = -vx sin(0)
  CHECK(a(3, 1) == doctest::Approx(5.0));
}

TEST_CASE("linearize: steering column vanishes at zero velocity") {
  VehicleParameters p;
  Mat4 a;
  Mat42 b;
  linearize({0.0, 0.7, 1.0, 2.0}, {1.0, 0.2}, p, a, b);
  for (int r = 1; r < 4; ++r) CHECK(b(r, 1) == doctest::Approx(0.0));
}

TEST_CASE("linearize: matches central finite differences on 1000 random points") {
  std::mt19937 rng(20240811);
  std::uniform_real_distribution<double> vx(0.1, 30.0);
  std::uniform_real_distribution<double> phi(-M_PI, M_PI);
  std::uniform_real_distribution<double> pos(-50.0, 50.0);
  std::uniform_real_distribution<double> ax(-8.0, 8.0);
  std::uniform_real_distribution<double> delta(-0.5, 0.5);
  VehicleParameters p;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    VehicleState x{vx(rng), phi(rng), pos(rng), pos(rng)};
    ControlInput u{ax(rng), delta(rng)};
    Mat4 a, a_fd;
    Mat42 b, b_fd;
    linearize(x, u, p, a, b);
    fd_jacobians(x, u, p, a_fd, b_fd);
    worst = std::max(worst, (a - a_fd).cwiseAbs().maxCoeff());
    worst = std::max(worst, (b - b_fd).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("discretize: zero dynamics matrix gives identity transition") {
  Mat4 a_t = Mat4::Zero();
  Mat42 b_t;
  b_t << 1, 2, 3, 4, 5, 6, 7, 8;
  Mat4 a_k;
  Mat42 b_k;
  discretize(a_t, b_t, 0.25, a_k, b_k);
  CHECK((a_k - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((b_k - b_t * 0.25).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("discretize: nilpotent Jacobian matches the closed-form polynomial") {
  // The kinematic Jacobian at phi = 0, delta_f = 0 squares to zero, so the
  // series terminates: exp(A dt) = I + A dt, B_k = B dt + A B dt^2 / 2.
  VehicleParameters p;
  Mat4 a_t;
  Mat42 b_t;
  linearize({7.0, 0.0, 0.0, 0.0}, {0.0, 0.0}, p, a_t, b_t);
  CHECK((a_t * a_t).cwiseAbs().maxCoeff() == 0.0);
  const double dt = 0.1;
  Mat4 a_k;
  Mat42 b_k;
  discretize(a_t, b_t, dt, a_k, b_k);
  CHECK((a_k - (Mat4::Identity() + a_t * dt)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((b_k - (b_t * dt + a_t * b_t * dt * dt / 2.0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("discretize: matches high-resolution ODE integration on random matrices") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    Mat4 a_t;
    Mat42 b_t;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a_t(i, j) = entry(rng);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) b_t(i, j) = entry(rng);
    const double dt = 0.1;
    Mat4 a_k;
    Mat42 b_k;
    discretize(a_t, b_t, dt, a_k, b_k);
    CHECK((a_k - transition_by_ode(a_t, dt, 4000)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("discretize: transition over 2dt composes from two dt transitions") {
  VehicleParameters p;
  Mat4 a_t;
  Mat42 b_t;
  linearize({12.0, 0.5, 0.0, 0.0}, {1.0, 0.15}, p, a_t, b_t);
  Mat4 a1, a2;
  Mat42 b1, b2;
  discretize(a_t, b_t, 0.1, a1, b1);
  discretize(a_t, b_t, 0.2, a2, b2);
  CHECK((a2 - a1 * a1).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("augment: block structure and selector") {
  Mat4 a_k = Mat4::Identity();
  Mat42 b_k = Mat42::Zero();
  Mat6 a_hat;
  Mat62 b_hat;
  Mat46 c_hat;
  augment(a_k, b_k, a_hat, b_hat, c_hat);
  CHECK((a_hat - Mat6::Identity()).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> entry(-3.0, 3.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a_k(i, j) = entry(rng);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) b_k(i, j) = entry(rng);
  augment(a_k, b_k, a_hat, b_hat, c_hat);

  Vec4 x;
  x << 1.0, -2.0, 0.5, 3.0;
  Eigen::Vector2d u(0.4, -0.1);
  Vec6 xi;
  xi << x, u;
  const Vec6 mapped = a_hat * xi;
  CHECK((mapped.head<4>() - (a_k * x + b_k * u)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((mapped.tail<2>() - u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c_hat * xi - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_prediction: single-step lift degenerates to one product") {
  VehicleParameters p;
  HorizonConfig h{0.1, 2, 1};
  const PredictionMatrices m = build_prediction({6.0, 0.2, 0.0, 0.0}, {0.5, 0.05}, p, h);
  CHECK((m.c_bar.topRows<4>() - m.c_hat * m.a_hat).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m.d_bar.topRows<4>() - m.c_hat * m.b_hat).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("build_prediction: rejects a horizon violating np > nc >= 1") {
  VehicleParameters p;
  CHECK_THROWS_AS(build_prediction({5, 0, 0, 0}, {0, 0}, p, HorizonConfig{0.1, 2, 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_prediction({5, 0, 0, 0}, {0, 0}, p, HorizonConfig{0.1, 2, 0}),
                  std::invalid_argument);
}

TEST_CASE("build_prediction: d_bar is block lower-triangular") {
  VehicleParameters p;
  HorizonConfig h{0.1, 6, 3};
  const PredictionMatrices m = build_prediction({6.0, 0.2, 0.0, 0.0}, {0.5, 0.05}, p, h);
  for (int pp = 1; pp <= h.np; ++pp) {
    for (int q = pp + 1; q <= h.nc; ++q) {
      CHECK(m.d_bar.block<4, 2>(4 * (pp - 1), 2 * (q - 1)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("lift equivalence: lifted outputs equal the step-iterated outputs") {
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> vx(0.1, 30.0);
  std::uniform_real_distribution<double> phi(-M_PI, M_PI);
  std::uniform_real_distribution<double> pos(-50.0, 50.0);
  std::uniform_real_distribution<double> delta(-0.4, 0.4);
  std::uniform_real_distribution<double> ax(-4.0, 4.0);
  std::uniform_real_distribution<double> dax(-0.1, 0.1);
  std::uniform_real_distribution<double> ddelta(-0.006, 0.006);
  std::uniform_int_distribution<int> np_dist(2, 20);
  VehicleParameters p;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int np = np_dist(rng);
    std::uniform_int_distribution<int> nc_dist(1, std::min(5, np - 1));
    const int nc = nc_dist(rng);
    HorizonConfig h{0.1, np, nc};
    VehicleState x{vx(rng), phi(rng), pos(rng), pos(rng)};
    ControlInput u{ax(rng), delta(rng)};
    const PredictionMatrices m = build_prediction(x, u, p, h);
    std::vector<ControlDelta> du(nc);
    for (auto& d : du) d = {dax(rng), ddelta(rng)};
    const Vec6 xi0 = make_augmented_state(x, u);
    const Eigen::VectorXd lifted = predict_outputs(xi0, du, m);
    const Eigen::VectorXd iterated = iterate_outputs(m.a_hat, m.b_hat, m.c_hat, xi0, du, np);
    worst = std::max(worst, (lifted - iterated).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("predict_trajectory: free response of uniform motion is a straight line") {
  VehicleParameters p;
  HorizonConfig h{0.1, 10, 2};
  VehicleState x{5.0, 0.0, 0.0, 0.0};
  ControlInput u{0.0, 0.0};
  const PredictionMatrices m = build_prediction(x, u, p, h);
  const auto traj =
      predict_trajectory(make_augmented_state(x, u), std::vector<ControlDelta>(2), m);
  REQUIRE(traj.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(traj[i].vx == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(traj[i].y == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(traj[9].x == doctest::Approx(5.0 * 0.1 * 10).epsilon(1e-10));
}

TEST_CASE("predict_trajectory: free response equals powers of a_hat") {
  VehicleParameters p;
  HorizonConfig h{0.1, 8, 3};
  VehicleState x{9.0, -0.8, 4.0, -2.0};
  ControlInput u{1.0, 0.1};
  const PredictionMatrices m = build_prediction(x, u, p, h);
  const Vec6 xi0 = make_augmented_state(x, u);
  const Eigen::VectorXd out = predict_outputs(xi0, std::vector<ControlDelta>(3), m);
  Vec6 xi = xi0;
  for (int pp = 0; pp < h.np; ++pp) {
    xi = m.a_hat * xi;
    CHECK((out.segment<4>(4 * pp) - m.c_hat * xi).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("predict_trajectory: rejects a wrong-length increment sequence") {
  VehicleParameters p;
  HorizonConfig h{0.1, 6, 2};
  VehicleState x{5.0, 0.0, 0.0, 0.0};
  ControlInput u{0.0, 0.0};
  const PredictionMatrices m = build_prediction(x, u, p, h);
  CHECK_THROWS_AS(
      predict_outputs(make_augmented_state(x, u), std::vector<ControlDelta>(3), m),
      std::invalid_argument);
}

TEST_CASE("integrate_plant: straight motion is exact") {
  VehicleParameters p;
  VehicleState x{5.0, 0.7, 1.0, 2.0};
  const VehicleState next = integrate_plant(x, {0.0, 0.0}, p, 0.1);
  CHECK(next.x == doctest::Approx(1.0 + 0.5 * std::cos(0.7)).epsilon(1e-12));
  CHECK(next.y == doctest::Approx(2.0 + 0.5 * std::sin(0.7)).epsilon(1e-12));
  CHECK(next.vx == doctest::Approx(5.0));
  CHECK(next.phi == doctest::Approx(0.7));
}

TEST_CASE("integrate_plant: constant steering traces a circle") {
  VehicleParameters p;
  const double delta = 0.12;
  const double beta = sideslip_angle(delta, p);
  const double radius = p.lr / std::sin(beta);
  VehicleState x{6.0, 0.0, 0.0, 0.0};
  const double course = x.phi + beta;
  const double cx = x.x - radius * std::sin(course);
  const double cy = x.y + radius * std::cos(course);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    x = integrate_plant(x, {0.0, delta}, p, 0.01);
    const double r = std::hypot(x.x - cx, x.y - cy);
    worst = std::max(worst, std::abs(r - radius));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("integrate_plant: fourth-order step-size convergence") {
  VehicleParameters p;
  ControlInput u{0.5, 0.35};
  auto roll = [&](double dt, int steps) {
    VehicleState x{6.0, 0.3, 0.0, 0.0};
    for (int i = 0; i < steps; ++i) x = integrate_plant(x, u, p, dt);
    return x;
  };
  const VehicleState ref = roll(0.0004, 8000);
  const VehicleState coarse = roll(0.4, 8);
  const VehicleState fine = roll(0.2, 16);
  auto err = [&](const VehicleState& s) {
    return std::abs(s.x - ref.x) + std::abs(s.y - ref.y) + std::abs(s.phi - ref.phi);
  };
  const double ratio = err(coarse) / err(fine);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("integrate_plant: positive acceleration strictly increases velocity") {
  VehicleParameters p;
  VehicleState x{2.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 50; ++i) {
    const VehicleState next = integrate_plant(x, {0.8, 0.0}, p, 0.1);
    CHECK(next.vx > x.vx);
    x = next;
  }
}

TEST_CASE("integrate_plant: zero velocity with steering does not move the vehicle") {
  VehicleParameters p;
  const VehicleState next = integrate_plant({0.0, 1.2, 5.0, -3.0}, {0.0, 0.4}, p, 0.1);
  CHECK(next.x == 5.0);
  CHECK(next.y == -3.0);
  CHECK(next.vx == 0.0);
}

TEST_CASE("integrate_plant: velocity clamps at zero under braking") {
  VehicleParameters p;
  VehicleState x{0.3, 0.0, 0.0, 0.0};
  for (int i = 0; i < 20; ++i) x = integrate_plant(x, {-2.0, 0.0}, p, 0.1);
  CHECK(x.vx == 0.0);
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(0.5) == doctest::Approx(0.5));
  CHECK(wrap_angle(2.0 * M_PI + 0.25) == doctest::Approx(0.25));
}
