#include "rloc/lqr.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rloc/angles.hpp"

namespace rloc {

CostWeights CostWeights::arm() {
  CostWeights c;
  c.w = Eigen::Vector4d(30.0, 30.0, 0.0, 0.0).asDiagonal();
  c.z = Eigen::Vector2d(1.0, 1.0).asDiagonal();
  return c;
}

CostWeights CostWeights::cart_pole() {
  CostWeights c;
  c.w = Eigen::Vector4d(30.0, 3.0, 2000.0, 200.0).asDiagonal();
  c.z = Eigen::MatrixXd::Identity(1, 1);
  return c;
}

void CostWeights::validate() const {
  if (w.rows() != w.cols() || z.rows() != z.cols()) {
    throw std::invalid_argument("CostWeights: W and Z must be square");
  }
  if (!w.isApprox(w.transpose()) || !z.isApprox(z.transpose())) {
    throw std::invalid_argument("CostWeights: W and Z must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ew(w);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ez(z);
  if (ew.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("CostWeights: W not PSD");
  if (ez.eigenvalues().minCoeff() <= 0.0) throw std::invalid_argument("CostWeights: Z not PD");
}

RiccatiResult riccati_iterate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const CostWeights& weights, const RiccatiOptions& options) {
  const auto l = a.rows();
  if (a.cols() != l || b.rows() != l || weights.w.rows() != l || weights.z.rows() != b.cols()) {
    throw std::invalid_argument("riccati_iterate: dimension mismatch");
  }
  if (!(options.tol > 0.0)) throw std::invalid_argument("riccati_iterate: tol must be positive");

  const Eigen::MatrixXd at = a.transpose();
  const Eigen::MatrixXd bt = b.transpose();
  auto gain_from = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
    const Eigen::MatrixXd s = weights.z + bt * v * b;
    return s.ldlt().solve(bt * v * a);
  };

  RiccatiResult result;
  Eigen::MatrixXd v = weights.w;
  for (int it = 1; it <= options.max_iter; ++it) {
    // Joseph form W + L'ZL + (A - BL)'V(A - BL): a sum of PSD terms, so no
    // cancellation when A is strongly unstable.
    const Eigen::MatrixXd l = gain_from(v);
    const Eigen::MatrixXd cl = a - b * l;
    Eigen::MatrixXd next = weights.w + l.transpose() * weights.z * l + cl.transpose() * v * cl;
    next = 0.5 * (next + next.transpose());
    result.iterations = it;
    if (!next.allFinite()) {
      result.diagnostic = fmt::format("value matrix diverged after {} iterations", it);
      break;
    }
    const double delta = (next - v).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
    v = std::move(next);
    if (delta < options.tol * scale) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged && result.diagnostic.empty()) {
    result.diagnostic = fmt::format("no convergence within {} iterations", options.max_iter);
  }
  result.value = v;
  result.gain = gain_from(v);
  if (!result.gain.allFinite()) result.gain = Eigen::MatrixXd::Zero(b.cols(), l);
  return result;
}

double closed_loop_spectral_radius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const Eigen::MatrixXd& gain) {
  const Eigen::MatrixXd cl = a - b * gain;
  return Eigen::EigenSolver<Eigen::MatrixXd>(cl, false).eigenvalues().cwiseAbs().maxCoeff();
}

Controller riccati_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const CostWeights& weights, const RiccatiOptions& options) {
  if (a.rows() != kStateDim || b.cols() > kMaxControlDim) {
    throw std::invalid_argument("riccati_gain: plant controllers are 4-state, <= 2-input");
  }
  const RiccatiResult r = riccati_iterate(a, b, weights, options);
  Controller c;
  c.gain = r.gain;
  c.iterations = r.iterations;
  c.diagnostic = r.diagnostic;
  c.converged = r.converged && closed_loop_spectral_radius(a, b, r.gain) < 1.0;
  if (r.converged && !c.converged) c.diagnostic = "closed loop not stable";
  return c;
}

Control lqr_control(const Controller& c, const State& x) {
  return -(c.gain * state_error(x, c.target, c.periodic));
}

double stage_cost(const State& x, const Control& u, const CostWeights& weights,
                  const State& target, const PeriodicMask& periodic) {
  const State e = state_error(x, target, periodic);
  return 0.5 * (e.dot(weights.w * e) + u.dot(weights.z * u));
}

std::vector<Controller> build_controller_bank(const std::vector<LinearModel>& models,
                                              const CostWeights& weights, const State& target,
                                              const PeriodicMask& periodic,
                                              const RiccatiOptions& options) {
  if (models.empty()) throw std::invalid_argument("build_controller_bank: no models");
  std::vector<Controller> bank;
  bank.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    Controller c = riccati_gain(models[i].a, models[i].b, weights, options);
    c.model_id = static_cast<int>(i);
    c.centre = models[i].centre;
    c.target = target;
    c.periodic = periodic;
    bank.push_back(std::move(c));
  }
  return bank;
}

}  // namespace rloc
