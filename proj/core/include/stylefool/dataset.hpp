#pragma once

#include <filesystem>
#include <vector>

#include "stylefool/classifier.hpp"

namespace stylefool {

/// Directory with index.jsonl ({"id","label","file"} per line) and one VTF per clip.
void save_dataset(const std::vector<LabeledVideo>& videos, const std::filesystem::path& dir);
std::vector<LabeledVideo> load_dataset(const std::filesystem::path& dir);

}  // namespace stylefool
