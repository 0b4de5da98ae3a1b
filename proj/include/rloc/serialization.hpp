#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rloc/lqr.hpp"
#include "rloc/plant.hpp"
#include "rloc/symbolic_rl.hpp"
#include "rloc/sysid.hpp"

namespace rloc {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal representation; identical bits give identical text.
std::string format_double(double v);

/// Writes content to a temporary sibling and renames it over path, creating
/// parent directories as needed. Throws std::runtime_error naming the path.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

/// Matrices are {"rows", "cols", "data"} with data row-major.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json state_to_json(const State& x);
State state_from_json(const Json& j);

Json plant_to_json(const PlantParams& p);
/// Missing keys keep the defaults of the plant named by "plant".
PlantParams plant_from_json(const Json& j);

Json weights_to_json(const CostWeights& w);
CostWeights weights_from_json(const Json& j, const CostWeights& defaults);

Json learn_params_to_json(const LearnParams& l);
LearnParams learn_params_from_json(const Json& j, const LearnParams& defaults = {});

Json model_to_json(const LinearModel& m);
LinearModel model_from_json(const Json& j);

Json controller_to_json(const Controller& c);
Controller controller_from_json(const Json& j);

/// One row per state: record,k,x0..x3,u0.. (the last state of a record has
/// empty control cells).
void write_experience_csv(const Experience& y, const std::string& path);

}  // namespace rloc
