#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rloc/sysid.hpp"
#include "rloc/types.hpp"

namespace rloc {

/// Quadratic stage weights: W (state, PSD) and Z (control, PD). Terminal
/// weights equal stage weights.
struct CostWeights {
  Eigen::MatrixXd w;
  Eigen::MatrixXd z;

  static CostWeights arm();
  static CostWeights cart_pole();
  /// Throws std::invalid_argument unless W is symmetric PSD and Z symmetric PD.
  void validate() const;
};

struct RiccatiOptions {
  int max_iter = 10000;
  double tol = 1e-10;
};

/// Infinite-horizon feedback gain plus provenance.
struct Controller {
  Gain gain;
  int model_id = -1;
  State centre = State::Zero();
  State target = State::Zero();
  PeriodicMask periodic{};
  bool converged = false;
  int iterations = 0;
  std::string diagnostic;
};

struct RiccatiResult {
  Eigen::MatrixXd value;  // V
  Eigen::MatrixXd gain;   // L
  bool converged = false;
  int iterations = 0;
  std::string diagnostic;
};

/// Backward Riccati recursion from V = W until successive iterates differ by
/// less than tol * max(1, |V|_inf) in the max-abs norm, then
/// L = (Z + B'VB)^-1 B'VA.
RiccatiResult riccati_iterate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const CostWeights& weights, const RiccatiOptions& options = {});

Controller riccati_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const CostWeights& weights, const RiccatiOptions& options = {});

/// u = -L (x - x*), periodic error dims wrapped. Not saturated.
Control lqr_control(const Controller& c, const State& x);

/// 0.5 (x~' W x~ + u' Z u) with x~ = x - x* (periodic dims wrapped).
double stage_cost(const State& x, const Control& u, const CostWeights& weights,
                  const State& target, const PeriodicMask& periodic);

/// One controller per model, in model order.
std::vector<Controller> build_controller_bank(const std::vector<LinearModel>& models,
                                              const CostWeights& weights, const State& target,
                                              const PeriodicMask& periodic,
                                              const RiccatiOptions& options = {});

/// Spectral radius of A - B L.
double closed_loop_spectral_radius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const Eigen::MatrixXd& gain);

}  // namespace rloc
