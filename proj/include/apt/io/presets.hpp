#pragma once

// Experiment presets. A preset file describes one benchmark:
//   {
//     "figure": "two-moons",
//     "description": "...",
//     "base": { <config fields shared by every algorithm> },
//     "algorithms": [ {"algorithm": "apt-atomic", ...overrides}, ... ],
//     "quick": { <merge patch applied to every algorithm with --quick> }
//   }
// Overrides are JSON merge patches applied in the order base, algorithm,
// quick (and "quick_overrides" inside an algorithm entry, if present).

#include <filesystem>
#include <string>
#include <vector>

#include "apt/engine/config.hpp"
#include "apt/io/config_file.hpp"

namespace apt {

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"two-moons", "slcp", "slcp-distractors", "lv", "mg1", "glm"};
  return ids;
}

struct FigurePreset {
  std::string figure;
  std::string description;
  std::vector<ExperimentConfig> configs;  // one per algorithm, in file order
};

inline FigurePreset expand_preset(const nlohmann::json& doc, bool quick) {
  if (!doc.is_object() || !doc.contains("base") || !doc.contains("algorithms"))
    throw ConfigError("preset needs 'base' and 'algorithms'");
  FigurePreset p;
  p.figure = doc.value("figure", "");
  p.description = doc.value("description", "");
  for (const auto& entry : doc.at("algorithms")) {
    nlohmann::json j = doc.at("base");
    nlohmann::json over = entry;
    const nlohmann::json quick_over = over.value("quick_overrides", nlohmann::json::object());
    over.erase("quick_overrides");
    j.merge_patch(over);
    if (quick) {
      if (doc.contains("quick")) j.merge_patch(doc.at("quick"));
      j.merge_patch(quick_over);
    }
    if (!j.contains("name")) j["name"] = p.figure + "-" + j.value("algorithm", "");
    p.configs.push_back(parse_config(j));
  }
  return p;
}

inline FigurePreset load_preset(const std::filesystem::path& dir, const std::string& figure, bool quick) {
  const auto path = dir / (figure + ".json");
  if (!std::filesystem::exists(path)) throw ConfigError("no preset for figure '" + figure + "' in " + dir.string());
  return expand_preset(read_json_file(path.string()), quick);
}

}  // namespace apt
