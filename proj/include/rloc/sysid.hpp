#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "rloc/plant.hpp"

namespace rloc {

/// Harmonically decaying "motor babbling" controls. Sequence j holds, for
/// each control dimension i, d(i,j) * b * u_max / (b + k - 1), k = 1..n_K-1,
/// with d drawn from {0, 1, -1}.
struct NaiveControlTensor {
  std::vector<Eigen::MatrixXd> sequences;  // each m x (n_K - 1)
  Eigen::MatrixXi signs;                   // m x c, entries of {0, 1, -1}
  double decay = 10.0;
  double u_max = 0.0;
};

NaiveControlTensor build_naive_controls(int m, double u_max, double decay, int n_steps);

/// Equally spaced naive start states over the plant's two discretised
/// dimensions. The count is factored as (a, b) with a >= b and a * b ==
/// n_starts, as close to square as possible; the larger factor goes on the
/// first axis. Non-periodic axes include both end points, periodic axes are
/// sampled at half-spacing offsets so no state is duplicated.
std::vector<State> naive_start_grid(const PlantParams& p, int n_starts);

/// Paired (state, control) naive experience. states[r] has n_K entries;
/// controls[r][k] produced states[r][k + 1].
struct Experience {
  std::vector<std::vector<State>> states;
  std::vector<std::vector<Control>> controls;
  int dropped = 0;  // records lost to integration divergence

  std::size_t size() const { return states.size(); }
};

Experience collect_experience(const PlantParams& p, const std::vector<State>& starts,
                              const NaiveControlTensor& controls, Rng& rng);

/// A contiguous stretch of one experience record: h states and h - 1
/// controls.
struct Segment {
  std::vector<State> states;
  std::vector<Control> controls;
  std::size_t record = 0;
  std::size_t offset = 0;
};

struct SubTrajectorySet {
  std::vector<Segment> segments;
  State centre = State::Zero();
  double angle_tol = 0.0;
  double velocity_tol = 0.0;
};

/// True if x lies in the box around centre: angle dims within angle_tol
/// (shortest angular distance for periodic dims), angular velocity dims
/// within velocity_tol. Cart position and velocity are unconstrained.
bool in_centre_box(const State& x, const State& centre, const PlantParams& p, double angle_tol,
                   double velocity_tol);

/// Scans every record for maximal in-box windows and cuts them greedily, left
/// to right, into non-overlapping segments of h states. Returns at most
/// max_segments segments; when more exist, an evenly strided subset across the
/// scan order is kept.
SubTrajectorySet sample_subtrajectories(const Experience& y, const State& centre,
                                        const PlantParams& p, double angle_tol,
                                        double velocity_tol, int h, int max_segments);

enum class LdsiInit {
  kIdentity,      // A = I, B = 0, unit noise variances
  kLeastSquares,  // A, B regressed on the observed states; noise from the residuals
};

struct LdsiOptions {
  LdsiInit init = LdsiInit::kLeastSquares;
  int max_cycles = 100;
  double tolerance = 1e-7;
  double ridge = 1e-8;
  double variance_floor = 1e-12;
};

/// Local linear model fitted around a linearisation centre.
struct LinearModel {
  State centre = State::Zero();
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd state_noise;        // diagonal of Sigma_w
  Eigen::VectorXd observation_noise;  // diagonal of Sigma_v
  std::vector<double> log_likelihood;
  int segments_used = 0;
  bool regularised = false;
};

/// Sequence data for LDSi: T states and T - 1 inputs per sequence.
struct LdsiSequence {
  Eigen::MatrixXd states;  // l x T
  Eigen::MatrixXd inputs;  // m x (T - 1)
};

/// Expectation-maximisation for a linear dynamical system with inputs and an
/// identity observation matrix:
///   z[k+1] = A z[k] + B u[k] + w,  x[k] = z[k] + v,
/// with diagonal noise covariances. The E-step is a Kalman filter plus RTS
/// smoother; the M-step updates A, B, Sigma_w, Sigma_v in closed form.
/// Each sequence's initial hidden state has prior N(x[1], I).
/// Stops after max_cycles or once the log-likelihood gain falls below
/// tolerance times the total gain since cycle 2.
LinearModel ldsi_fit(const std::vector<LdsiSequence>& sequences, const LdsiOptions& options = {});

/// Fits segments expressed in target-shifted coordinates (x - x*), with
/// periodic dims unwrapped continuously around the centre.
LinearModel fit_local_model(const SubTrajectorySet& set, const PlantParams& p,
                            const LdsiOptions& options = {});

/// Centre 0 is the target; later centres draw the plant's centre dims
/// uniformly over their discretised range with all other dims zero.
/// Existing centres are kept (and truncated to n_centres if longer).
std::vector<State> place_centres(const PlantParams& p, int n_centres,
                                 const std::vector<State>& previous, Rng& rng);

}  // namespace rloc
