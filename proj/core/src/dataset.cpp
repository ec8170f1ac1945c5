#include "stylefool/dataset.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "stylefool/error.hpp"
#include "stylefool/video_io.hpp"

namespace stylefool {

void save_dataset(const std::vector<LabeledVideo>& videos, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.jsonl", std::ios::binary | std::ios::trunc);
  if (!index) throw IoError("cannot write dataset index in '" + dir.string() + "'");
  for (const auto& v : videos) {
    const std::string file = v.id + ".vtf";
    write_vtf(v.video, dir / file);
    nlohmann::ordered_json j;
    j["id"] = v.id;
    j["label"] = v.label;
    j["file"] = file;
    index << j.dump() << '\n';
  }
  if (!index) throw IoError("write to dataset index in '" + dir.string() + "' failed");
}

std::vector<LabeledVideo> load_dataset(const std::filesystem::path& dir) {
  std::ifstream index(dir / "index.jsonl", std::ios::binary);
  if (!index) throw IoError("no dataset index in '" + dir.string() + "'");
  std::vector<LabeledVideo> out;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("label").get<int>(),
                     read_vtf(dir / j.at("file").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dataset index in '" + dir.string() + "': " + e.what());
    }
  }
  return out;
}

}  // namespace stylefool
