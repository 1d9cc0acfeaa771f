#pragma once

// Parameter snapshots: a flat little-endian float64 array (<stem>.bin) plus a
// JSON layout manifest (<stem>.json).

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "apt/diffcore/params.hpp"

namespace apt {

inline nlohmann::json layout_to_json(const ParamVector& p) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : p.layout())
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  return {{"format", "float64-le"}, {"size", p.size()}, {"segments", segs}};
}

inline void save_params(const ParamVector& p, const std::filesystem::path& stem, const nlohmann::json& extra = {}) {
  static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");
  {
    std::ofstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin) throw ConfigError("cannot write " + stem.string() + ".bin");
    bin.write(reinterpret_cast<const char*>(p.values().data()),
              static_cast<std::streamsize>(p.size() * static_cast<Eigen::Index>(sizeof(double))));
  }
  nlohmann::json manifest = layout_to_json(p);
  if (!extra.is_null()) manifest["architecture"] = extra;
  std::ofstream js(stem.string() + ".json");
  js << manifest.dump(2) << '\n';
}

inline ParamVector load_params(const std::filesystem::path& stem) {
  std::ifstream js(stem.string() + ".json");
  if (!js) throw ConfigError("cannot read " + stem.string() + ".json");
  const auto manifest = nlohmann::json::parse(js);
  ParamVector p;
  for (const auto& s : manifest.at("segments")) p.add_segment(s.at("name"), s.at("rows"), s.at("cols"));
  if (p.size() != manifest.at("size").get<Eigen::Index>()) throw ConfigError("snapshot manifest is inconsistent");
  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw ConfigError("cannot read " + stem.string() + ".bin");
  bin.read(reinterpret_cast<char*>(p.values().data()),
           static_cast<std::streamsize>(p.size() * static_cast<Eigen::Index>(sizeof(double))));
  if (bin.gcount() != static_cast<std::streamsize>(p.size() * static_cast<Eigen::Index>(sizeof(double))))
    throw ConfigError("snapshot " + stem.string() + ".bin is truncated");
  return p;
}

}  // namespace apt
