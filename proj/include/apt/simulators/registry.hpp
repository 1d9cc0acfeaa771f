#pragma once

#include <functional>
#include <map>

#include "apt/simulators/distractors.hpp"
#include "apt/simulators/glm.hpp"
#include "apt/simulators/linear_gaussian.hpp"
#include "apt/simulators/lotka_volterra.hpp"
#include "apt/simulators/mg1.hpp"
#include "apt/simulators/two_moons.hpp"

namespace apt {

using SimulatorFactory = std::function<SimulatorPtr(const nlohmann::json&)>;

inline const std::map<std::string, SimulatorFactory>& simulator_registry() {
  static const std::map<std::string, SimulatorFactory> r = {
      {"linear_gaussian", [](const nlohmann::json& o) { return std::make_shared<LinearGaussian>(o); }},
      {"two_moons", [](const nlohmann::json& o) { return std::make_shared<TwoMoons>(o); }},
      {"slcp", [](const nlohmann::json& o) { return std::make_shared<Slcp>(o); }},
      {"slcp_distractors", [](const nlohmann::json& o) { return std::make_shared<SlcpDistractors>(o); }},
      {"lotka_volterra", [](const nlohmann::json& o) { return std::make_shared<LotkaVolterra>(o); }},
      {"mg1", [](const nlohmann::json& o) { return std::make_shared<MG1>(o); }},
      {"glm", [](const nlohmann::json& o) { return std::make_shared<Glm>(o); }},
  };
  return r;
}

inline SimulatorPtr make_simulator(const std::string& name, const nlohmann::json& options = nlohmann::json::object()) {
  const auto& r = simulator_registry();
  const auto it = r.find(name);
  if (it == r.end()) throw ConfigError("unknown simulator '" + name + "'");
  return it->second(options);
}

}  // namespace apt
