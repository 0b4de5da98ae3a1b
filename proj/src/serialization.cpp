#include "rloc/serialization.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace rloc {

namespace fs = std::filesystem;

std::string format_double(double v) { return fmt::format("{}", v); }

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
      throw std::runtime_error(
          fmt::format("cannot create directory '{}': {}", target.parent_path().string(), ec.message()));
    }
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", tmp.string()));
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    throw std::runtime_error(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path,
                                         ec.message()));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(fmt::format("cannot parse '{}': {}", path, e.what()));
  }
}

void write_json(const std::string& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::invalid_argument("matrix JSON: data length does not match rows * cols");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c].get<double>();
  }
  return m;
}

Json state_to_json(const State& x) { return Json{x[0], x[1], x[2], x[3]}; }

State state_from_json(const Json& j) {
  if (!j.is_array() || j.size() != kStateDim) {
    throw std::invalid_argument("state JSON must be an array of 4 numbers");
  }
  State x;
  for (int i = 0; i < kStateDim; ++i) x[i] = j[i].get<double>();
  return x;
}

Json plant_to_json(const PlantParams& p) {
  Json j;
  j["plant"] = std::string(to_string(p.kind));
  if (p.kind == PlantKind::kArm) {
    const auto& a = std::get<ArmPhysics>(p.physics);
    j["physics"] = Json{{"l1", a.l1}, {"l2", a.l2}, {"m1", a.m1}, {"m2", a.m2},
                        {"C1", a.c1}, {"C2", a.c2}, {"i1", a.i1}, {"i2", a.i2},
                        {"B", matrix_to_json(a.joint_friction)}};
  } else {
    const auto& c = std::get<CartPolePhysics>(p.physics);
    j["physics"] = Json{{"l", c.length},        {"m_p", c.pole_mass},
                        {"m_c", c.cart_mass},   {"g", c.gravity},
                        {"B_p", c.pole_friction}, {"B_c", c.cart_friction}};
  }
  j["u_min"] = p.u_min;
  j["u_max"] = p.u_max;
  j["dt"] = p.dt;
  j["n_K"] = p.n_steps;
  j["target"] = state_to_json(p.target);
  j["noise_std"] = p.noise_std;
  return j;
}

namespace {

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PlantParams plant_from_json(const Json& j) {
  const PlantKind kind = plant_kind_from_string(j.at("plant").get<std::string>());
  PlantParams p = kind == PlantKind::kArm ? PlantParams::arm() : PlantParams::cart_pole();
  if (j.contains("physics")) {
    const Json& ph = j.at("physics");
    if (kind == PlantKind::kArm) {
      auto& a = std::get<ArmPhysics>(p.physics);
      maybe(ph, "l1", a.l1);
      maybe(ph, "l2", a.l2);
      maybe(ph, "m1", a.m1);
      maybe(ph, "m2", a.m2);
      maybe(ph, "C1", a.c1);
      maybe(ph, "C2", a.c2);
      maybe(ph, "i1", a.i1);
      maybe(ph, "i2", a.i2);
      if (ph.contains("B")) a.joint_friction = matrix_from_json(ph.at("B"));
    } else {
      auto& c = std::get<CartPolePhysics>(p.physics);
      maybe(ph, "l", c.length);
      maybe(ph, "m_p", c.pole_mass);
      maybe(ph, "m_c", c.cart_mass);
      maybe(ph, "g", c.gravity);
      maybe(ph, "B_p", c.pole_friction);
      maybe(ph, "B_c", c.cart_friction);
    }
  }
  maybe(j, "u_min", p.u_min);
  maybe(j, "u_max", p.u_max);
  maybe(j, "dt", p.dt);
  maybe(j, "n_K", p.n_steps);
  if (j.contains("target")) p.target = state_from_json(j.at("target"));
  maybe(j, "noise_std", p.noise_std);
  p.validate();
  return p;
}

Json weights_to_json(const CostWeights& w) {
  return Json{{"W", matrix_to_json(w.w)}, {"Z", matrix_to_json(w.z)}};
}

CostWeights weights_from_json(const Json& j, const CostWeights& defaults) {
  CostWeights w = defaults;
  if (j.contains("W")) w.w = matrix_from_json(j.at("W"));
  if (j.contains("Z")) w.z = matrix_from_json(j.at("Z"));
  w.validate();
  return w;
}

Json learn_params_to_json(const LearnParams& l) {
  return Json{{"epsilon", l.epsilon},       {"nu", l.epsilon_decay},
              {"gamma", l.gamma},           {"alpha", l.alpha},
              {"mu", l.alpha_decay},        {"n_epochs", l.n_epochs},
              {"curve_interval", l.curve_interval}, {"noise_std", l.noise_std}};
}

LearnParams learn_params_from_json(const Json& j, const LearnParams& defaults) {
  LearnParams l = defaults;
  maybe(j, "epsilon", l.epsilon);
  maybe(j, "nu", l.epsilon_decay);
  maybe(j, "gamma", l.gamma);
  maybe(j, "alpha", l.alpha);
  maybe(j, "mu", l.alpha_decay);
  maybe(j, "n_epochs", l.n_epochs);
  maybe(j, "curve_interval", l.curve_interval);
  maybe(j, "noise_std", l.noise_std);
  l.validate();
  return l;
}

Json model_to_json(const LinearModel& m) {
  return Json{{"centre", state_to_json(m.centre)},
              {"A", matrix_to_json(m.a)},
              {"B", matrix_to_json(m.b)},
              {"state_noise", std::vector<double>(m.state_noise.data(),
                                                  m.state_noise.data() + m.state_noise.size())},
              {"observation_noise",
               std::vector<double>(m.observation_noise.data(),
                                   m.observation_noise.data() + m.observation_noise.size())},
              {"log_likelihood", m.log_likelihood},
              {"segments_used", m.segments_used},
              {"regularised", m.regularised}};
}

LinearModel model_from_json(const Json& j) {
  LinearModel m;
  m.centre = state_from_json(j.at("centre"));
  m.a = matrix_from_json(j.at("A"));
  m.b = matrix_from_json(j.at("B"));
  const auto w = j.at("state_noise").get<std::vector<double>>();
  const auto v = j.at("observation_noise").get<std::vector<double>>();
  m.state_noise = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.observation_noise =
      Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  maybe(j, "log_likelihood", m.log_likelihood);
  maybe(j, "segments_used", m.segments_used);
  maybe(j, "regularised", m.regularised);
  return m;
}

Json controller_to_json(const Controller& c) {
  return Json{{"model_id", c.model_id},
              {"gain", matrix_to_json(c.gain)},
              {"centre", state_to_json(c.centre)},
              {"target", state_to_json(c.target)},
              {"periodic", std::vector<bool>(c.periodic.begin(), c.periodic.end())},
              {"converged", c.converged},
              {"iterations", c.iterations},
              {"diagnostic", c.diagnostic}};
}

Controller controller_from_json(const Json& j) {
  Controller c;
  const Eigen::MatrixXd gain = matrix_from_json(j.at("gain"));
  if (gain.cols() != kStateDim || gain.rows() < 1 || gain.rows() > kMaxControlDim) {
    throw std::invalid_argument("controller JSON: gain must be m x 4 with m in {1, 2}");
  }
  c.gain = gain;
  c.model_id = j.at("model_id").get<int>();
  c.centre = state_from_json(j.at("centre"));
  c.target = state_from_json(j.at("target"));
  const auto periodic = j.at("periodic").get<std::vector<bool>>();
  if (periodic.size() != kStateDim) throw std::invalid_argument("controller JSON: periodic mask");
  for (int i = 0; i < kStateDim; ++i) c.periodic[i] = periodic[i];
  maybe(j, "converged", c.converged);
  maybe(j, "iterations", c.iterations);
  maybe(j, "diagnostic", c.diagnostic);
  return c;
}

void write_experience_csv(const Experience& y, const std::string& path) {
  int m = 0;
  for (const auto& rec : y.controls) {
    if (!rec.empty()) {
      m = static_cast<int>(rec.front().size());
      break;
    }
  }
  std::string out = "record,k";
  for (int i = 0; i < kStateDim; ++i) out += fmt::format(",x{}", i);
  for (int i = 0; i < m; ++i) out += fmt::format(",u{}", i);
  out += '\n';
  for (std::size_t r = 0; r < y.size(); ++r) {
    for (std::size_t k = 0; k < y.states[r].size(); ++k) {
      out += fmt::format("{},{}", r, k);
      for (int i = 0; i < kStateDim; ++i) out += "," + format_double(y.states[r][k][i]);
      for (int i = 0; i < m; ++i) {
        out += ',';
        if (k < y.controls[r].size()) out += format_double(y.controls[r][k][i]);
      }
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

}  // namespace rloc
