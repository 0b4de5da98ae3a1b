#include "rloc/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "rloc/angles.hpp"

namespace rloc {

NaiveControlTensor build_naive_controls(int m, double u_max, double decay, int n_steps) {
  if (m < 1) throw std::invalid_argument("build_naive_controls: m must be >= 1");
  if (!(decay > 0.0)) throw std::invalid_argument("build_naive_controls: decay must be > 0");
  if (n_steps < 2) throw std::invalid_argument("build_naive_controls: n_K must be >= 2");

  static constexpr int kSamplePoints[3] = {0, 1, -1};
  int c = 1;
  for (int i = 0; i < m; ++i) c *= 3;

  NaiveControlTensor out;
  out.decay = decay;
  out.u_max = u_max;
  out.signs.resize(m, c);
  out.sequences.reserve(c);
  for (int j = 0; j < c; ++j) {
    // Base-3 digits of j enumerate all permutations with replacement.
    int code = j;
    for (int i = 0; i < m; ++i) {
      out.signs(i, j) = kSamplePoints[code % 3];
      code /= 3;
    }
    Eigen::MatrixXd seq(m, n_steps - 1);
    for (int k = 1; k <= n_steps - 1; ++k) {
      for (int i = 0; i < m; ++i) {
        seq(i, k - 1) = out.signs(i, j) * decay * u_max / (decay + k - 1);
      }
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

namespace {

std::pair<int, int> near_square_factors(int n) {
  int best = 1;
  for (int b = 1; b * b <= n; ++b) {
    if (n % b == 0) best = b;
  }
  return {n / best, best};
}

std::vector<double> axis_points(const Axis& axis, int count) {
  std::vector<double> pts(count);
  const double span = axis.hi - axis.lo;
  for (int i = 0; i < count; ++i) {
    if (axis.periodic || count == 1) {
      pts[i] = axis.lo + (i + 0.5) * span / count;
    } else {
      pts[i] = axis.lo + i * span / (count - 1);
    }
  }
  return pts;
}

}  // namespace

std::vector<State> naive_start_grid(const PlantParams& p, int n_starts) {
  if (n_starts < 1) throw std::invalid_argument("naive_start_grid: need at least one start");
  const auto [na, nb] = near_square_factors(n_starts);
  const auto axes = p.discretised_axes();
  const auto first = axis_points(axes[0], na);
  const auto second = axis_points(axes[1], nb);
  std::vector<State> starts;
  starts.reserve(n_starts);
  for (double a : first) {
    for (double b : second) {
      State x = State::Zero();
      x[axes[0].dim] = a;
      x[axes[1].dim] = b;
      starts.push_back(normalise_state(x, p));
    }
  }
  return starts;
}

Experience collect_experience(const PlantParams& p, const std::vector<State>& starts,
                              const NaiveControlTensor& controls, Rng& rng) {
  if (starts.empty() || controls.sequences.empty()) {
    throw std::invalid_argument("collect_experience: need starts and control sequences");
  }
  Experience y;
  y.states.reserve(starts.size() * controls.sequences.size());
  y.controls.reserve(starts.size() * controls.sequences.size());
  for (const State& start : starts) {
    for (const Eigen::MatrixXd& seq : controls.sequences) {
      const int n_steps = static_cast<int>(seq.cols()) + 1;
      int k = 0;
      ControlSource open_loop = [&seq, k](const State&) mutable -> Control {
        Control u = seq.col(k);
        ++k;
        return u;
      };
      try {
        Trajectory traj = simulate(p, start, open_loop, n_steps, p.noise_std, rng);
        y.states.push_back(std::move(traj.states));
        y.controls.push_back(std::move(traj.controls));
      } catch (const IntegrationDiverged&) {
        ++y.dropped;
      }
    }
  }
  return y;
}

bool in_centre_box(const State& x, const State& centre, const PlantParams& p, double angle_tol,
                   double velocity_tol) {
  const PeriodicMask periodic = p.periodic();
  for (int d : p.angle_dims()) {
    const double diff = periodic[d] ? angle_difference(x[d], centre[d]) : x[d] - centre[d];
    if (std::abs(diff) > angle_tol) return false;
  }
  for (int d : p.angular_velocity_dims()) {
    if (std::abs(x[d] - centre[d]) > velocity_tol) return false;
  }
  return true;
}

SubTrajectorySet sample_subtrajectories(const Experience& y, const State& centre,
                                        const PlantParams& p, double angle_tol,
                                        double velocity_tol, int h, int max_segments) {
  if (h < 2) throw std::invalid_argument("sample_subtrajectories: h must be >= 2");
  SubTrajectorySet set;
  set.centre = centre;
  set.angle_tol = angle_tol;
  set.velocity_tol = velocity_tol;

  std::vector<Segment> found;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const auto& states = y.states[r];
    const auto& controls = y.controls[r];
    std::size_t k = 0;
    while (k < states.size()) {
      if (!in_centre_box(states[k], centre, p, angle_tol, velocity_tol)) {
        ++k;
        continue;
      }
      std::size_t end = k;
      while (end < states.size() && in_centre_box(states[end], centre, p, angle_tol, velocity_tol)) {
        ++end;
      }
      for (std::size_t s = k; s + h <= end; s += h) {
        Segment seg;
        seg.record = r;
        seg.offset = s;
        seg.states.assign(states.begin() + s, states.begin() + s + h);
        seg.controls.assign(controls.begin() + s, controls.begin() + s + h - 1);
        found.push_back(std::move(seg));
      }
      k = end;
    }
  }

  if (max_segments < 0 || found.size() <= static_cast<std::size_t>(max_segments)) {
    set.segments = std::move(found);
    return set;
  }
  set.segments.reserve(max_segments);
  for (int i = 0; i < max_segments; ++i) {
    const std::size_t idx = static_cast<std::size_t>(i) * found.size() / max_segments;
    set.segments.push_back(std::move(found[idx]));
  }
  return set;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Solves G * M = R for G with M symmetric PSD; adds a ridge when M is
// numerically singular.
Eigen::MatrixXd solve_normal_equations(const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& moments,
                                       double ridge, bool& regularised) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(moments);
  const Eigen::VectorXd pivots = ldlt.vectorD();
  const double largest = pivots.cwiseAbs().maxCoeff();
  const bool ok = ldlt.info() == Eigen::Success && largest > 0.0 &&
                  pivots.minCoeff() > 1e-13 * largest && ldlt.rcond() > 1e-13;
  if (ok) return ldlt.solve(rhs.transpose()).transpose();
  regularised = true;
  const double scale = std::max(1.0, moments.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd reg = moments;
  reg.diagonal().array() += ridge * scale;
  return Eigen::LDLT<Eigen::MatrixXd>(reg).solve(rhs.transpose()).transpose();
}

struct SmootherStats {
  Eigen::MatrixXd zz_prev;   // sum E[z_t z_t^T], t < T
  Eigen::MatrixXd z1z;       // sum E[z_{t+1} z_t^T]
  Eigen::MatrixXd z1z1;      // sum E[z_{t+1} z_{t+1}^T]
  Eigen::MatrixXd zu;        // sum E[z_t] u_t^T
  Eigen::MatrixXd z1u;       // sum E[z_{t+1}] u_t^T
  Eigen::MatrixXd uu;        // sum u_t u_t^T
  Eigen::VectorXd obs_resid; // diag sum E[(x_t - z_t)(x_t - z_t)^T]
  double log_likelihood = 0.0;
  long transitions = 0;
  long observations = 0;

  SmootherStats(int l, int m)
      : zz_prev(Eigen::MatrixXd::Zero(l, l)),
        z1z(Eigen::MatrixXd::Zero(l, l)),
        z1z1(Eigen::MatrixXd::Zero(l, l)),
        zu(Eigen::MatrixXd::Zero(l, m)),
        z1u(Eigen::MatrixXd::Zero(l, m)),
        uu(Eigen::MatrixXd::Zero(m, m)),
        obs_resid(Eigen::VectorXd::Zero(l)) {}
};

void e_step(const LdsiSequence& seq, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
            const Eigen::VectorXd& sw, const Eigen::VectorXd& sv, SmootherStats& stats) {
  const int l = static_cast<int>(seq.states.rows());
  const int n = static_cast<int>(seq.states.cols());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(l, l);

  std::vector<Eigen::VectorXd> mu_pred(n), mu_filt(n), mu_s(n);
  std::vector<Eigen::MatrixXd> v_pred(n), v_filt(n), v_s(n), gain(n);

  Eigen::VectorXd mp = seq.states.col(0);
  Eigen::MatrixXd vp = eye;
  for (int t = 0; t < n; ++t) {
    mu_pred[t] = mp;
    v_pred[t] = vp;
    Eigen::MatrixXd s = vp;
    s.diagonal() += sv;
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    const Eigen::VectorXd innovation = seq.states.col(t) - mp;
    const Eigen::VectorXd whitened = llt.matrixL().solve(innovation);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    stats.log_likelihood += -0.5 * (l * kLog2Pi + log_det + whitened.squaredNorm());

    // K = Vp S^-1 (S symmetric)
    const Eigen::MatrixXd k = llt.solve(vp).transpose();
    mu_filt[t] = mp + k * innovation;
    v_filt[t] = (eye - k) * vp;
    v_filt[t] = 0.5 * (v_filt[t] + v_filt[t].transpose());

    if (t + 1 < n) {
      mp = a * mu_filt[t] + b * seq.inputs.col(t);
      vp = a * v_filt[t] * a.transpose();
      vp.diagonal() += sw;
    }
  }

  mu_s[n - 1] = mu_filt[n - 1];
  v_s[n - 1] = v_filt[n - 1];
  for (int t = n - 2; t >= 0; --t) {
    // J = Vf A^T Vp(t+1)^-1
    const Eigen::LLT<Eigen::MatrixXd> llt(v_pred[t + 1]);
    gain[t] = llt.solve(a * v_filt[t]).transpose();
    mu_s[t] = mu_filt[t] + gain[t] * (mu_s[t + 1] - mu_pred[t + 1]);
    v_s[t] = v_filt[t] + gain[t] * (v_s[t + 1] - v_pred[t + 1]) * gain[t].transpose();
    v_s[t] = 0.5 * (v_s[t] + v_s[t].transpose());
  }

  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd r = seq.states.col(t) - mu_s[t];
    stats.obs_resid += r.cwiseProduct(r) + v_s[t].diagonal();
  }
  stats.observations += n;
  for (int t = 0; t + 1 < n; ++t) {
    const Eigen::VectorXd u = seq.inputs.col(t);
    stats.zz_prev += v_s[t] + mu_s[t] * mu_s[t].transpose();
    stats.z1z += v_s[t + 1] * gain[t].transpose() + mu_s[t + 1] * mu_s[t].transpose();
    stats.z1z1 += v_s[t + 1] + mu_s[t + 1] * mu_s[t + 1].transpose();
    stats.zu += mu_s[t] * u.transpose();
    stats.z1u += mu_s[t + 1] * u.transpose();
    stats.uu += u * u.transpose();
  }
  stats.transitions += n - 1;
}

// Ordinary least squares of x_{t+1} on (x_t, u_t); the residual variance is
// split evenly between state and observation noise.
void least_squares_start(const std::vector<LdsiSequence>& sequences, const LdsiOptions& options,
                         LinearModel& model) {
  const int l = static_cast<int>(model.a.rows());
  const int m = static_cast<int>(model.b.cols());
  Eigen::MatrixXd yy = Eigen::MatrixXd::Zero(l + m, l + m);
  Eigen::MatrixXd zy = Eigen::MatrixXd::Zero(l, l + m);
  long n = 0;
  for (const auto& seq : sequences) {
    for (Eigen::Index t = 0; t + 1 < seq.states.cols(); ++t) {
      Eigen::VectorXd y(l + m);
      y << seq.states.col(t), seq.inputs.col(t);
      yy += y * y.transpose();
      zy += seq.states.col(t + 1) * y.transpose();
      ++n;
    }
  }
  const Eigen::MatrixXd g = solve_normal_equations(zy, yy, options.ridge, model.regularised);
  Eigen::VectorXd resid = Eigen::VectorXd::Zero(l);
  for (const auto& seq : sequences) {
    for (Eigen::Index t = 0; t + 1 < seq.states.cols(); ++t) {
      Eigen::VectorXd y(l + m);
      y << seq.states.col(t), seq.inputs.col(t);
      resid += (seq.states.col(t + 1) - g * y).cwiseAbs2();
    }
  }
  resid = (0.5 * resid / static_cast<double>(n)).cwiseMax(options.variance_floor);
  model.a = g.leftCols(l);
  model.b = g.rightCols(m);
  model.state_noise = resid;
  model.observation_noise = resid;
}

}  // namespace

LinearModel ldsi_fit(const std::vector<LdsiSequence>& sequences, const LdsiOptions& options) {
  if (sequences.empty()) throw std::invalid_argument("ldsi_fit: no sequences");
  const int l = static_cast<int>(sequences.front().states.rows());
  const int m = static_cast<int>(sequences.front().inputs.rows());
  if (l < 1 || m < 1) throw std::invalid_argument("ldsi_fit: empty state or input dimension");
  for (const auto& seq : sequences) {
    if (seq.states.rows() != l || seq.inputs.rows() != m) {
      throw std::invalid_argument("ldsi_fit: dimension mismatch between sequences");
    }
    if (seq.states.cols() < 2 || seq.inputs.cols() != seq.states.cols() - 1) {
      throw std::invalid_argument("ldsi_fit: each sequence needs T >= 2 states and T - 1 inputs");
    }
  }

  LinearModel model;
  model.a = Eigen::MatrixXd::Identity(l, l);
  model.b = Eigen::MatrixXd::Zero(l, m);
  model.state_noise = Eigen::VectorXd::Ones(l);
  model.observation_noise = Eigen::VectorXd::Ones(l);
  model.segments_used = static_cast<int>(sequences.size());
  if (options.init == LdsiInit::kLeastSquares) least_squares_start(sequences, options, model);

  double base = 0.0;
  double previous = -std::numeric_limits<double>::infinity();
  for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
    SmootherStats stats(l, m);
    for (const auto& seq : sequences) {
      e_step(seq, model.a, model.b, model.state_noise, model.observation_noise, stats);
    }
    const double ll = stats.log_likelihood;
    if (!std::isfinite(ll)) break;
    model.log_likelihood.push_back(ll);
    if (cycle <= 2) {
      base = ll;
    } else if (ll - base <= (1.0 + options.tolerance) * (previous - base)) {
      break;
    }
    previous = ll;

    // M-step on the joint regressor y = (z_t, u_t).
    Eigen::MatrixXd yy(l + m, l + m);
    yy << stats.zz_prev, stats.zu, stats.zu.transpose(), stats.uu;
    Eigen::MatrixXd zy(l, l + m);
    zy << stats.z1z, stats.z1u;
    const Eigen::MatrixXd g = solve_normal_equations(zy, yy, options.ridge, model.regularised);
    const Eigen::MatrixXd resid =
        stats.z1z1 - g * zy.transpose() - zy * g.transpose() + g * yy * g.transpose();

    model.a = g.leftCols(l);
    model.b = g.rightCols(m);
    model.state_noise = (resid.diagonal() / static_cast<double>(stats.transitions))
                            .cwiseMax(options.variance_floor);
    model.observation_noise = (stats.obs_resid / static_cast<double>(stats.observations))
                                  .cwiseMax(options.variance_floor);
  }
  return model;
}

LinearModel fit_local_model(const SubTrajectorySet& set, const PlantParams& p,
                            const LdsiOptions& options) {
  if (set.segments.empty()) throw std::invalid_argument("fit_local_model: no segments");
  const PeriodicMask periodic = p.periodic();
  const int m = p.control_dim();
  const State centre_shifted = state_error(set.centre, p.target, periodic);

  std::vector<LdsiSequence> sequences;
  sequences.reserve(set.segments.size());
  for (const Segment& seg : set.segments) {
    LdsiSequence seq;
    const int n = static_cast<int>(seg.states.size());
    seq.states.resize(kStateDim, n);
    seq.inputs.resize(m, n - 1);
    for (int t = 0; t < n; ++t) {
      State x = seg.states[t] - p.target;
      for (int d = 0; d < kStateDim; ++d) {
        if (periodic[d]) x[d] = centre_shifted[d] + angle_difference(seg.states[t][d], set.centre[d]);
      }
      seq.states.col(t) = x;
    }
    for (int t = 0; t + 1 < n; ++t) seq.inputs.col(t) = seg.controls[t];
    sequences.push_back(std::move(seq));
  }
  LinearModel model = ldsi_fit(sequences, options);
  model.centre = set.centre;
  return model;
}

std::vector<State> place_centres(const PlantParams& p, int n_centres,
                                 const std::vector<State>& previous, Rng& rng) {
  if (n_centres < 1) throw std::invalid_argument("place_centres: need at least one centre");
  std::vector<State> centres(previous.begin(),
                             previous.begin() + std::min<std::size_t>(previous.size(), n_centres));
  if (centres.empty()) centres.push_back(p.target);

  const auto axes = p.discretised_axes();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centres.size()) < n_centres) {
    State c = State::Zero();
    for (int d : p.centre_dims()) {
      const auto it = std::find_if(axes.begin(), axes.end(), [d](const Axis& a) { return a.dim == d; });
      const double lo = it != axes.end() ? it->lo : -kPi;
      const double hi = it != axes.end() ? it->hi : kPi;
      c[d] = lo + unit(rng) * (hi - lo);
    }
    centres.push_back(normalise_state(c, p));
  }
  return centres;
}

}  // namespace rloc
