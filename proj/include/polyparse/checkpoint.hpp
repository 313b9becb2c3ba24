#pragma once

#include <string>

#include <json.hpp>

#include "polyparse/autodiff.hpp"
#include "polyparse/corpus.hpp"

namespace polyparse {

// Self-describing binary container: magic, a JSON header (format name,
// version, free-form metadata, tensor index) and raw little-endian doubles.
struct Checkpoint {
  std::string format;
  int version = 0;
  nlohmann::json meta;
  ad::ParameterSet params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Reads the file and checks its format tag and version.
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_format, int expected_version);

// Loads `values` into `into` by parameter name; shapes must match exactly.
void assign_params(ad::ParameterSet& into, const ad::ParameterSet& values);

nlohmann::json vocab_to_json(const Vocabulary& v);
Vocabulary vocab_from_json(const nlohmann::json& j);

}  // namespace polyparse
