#pragma once

// Internal JSON helpers shared by the loaders and the cache writer.

#include <json.hpp>

#include <string>

#include "consortium/backends.hpp"
#include "consortium/errors.hpp"

namespace consortium::detail {

using json = nlohmann::json;

template <typename T>
T field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("missing field '") + name + "'", line);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + name + "' has the wrong type", line);
  }
}

json to_json(const SamplingParams& params);
SamplingParams params_from_json(const json& j);

json to_json(const ResponseSample& sample);
ResponseSample sample_from_json(const json& j, std::size_t line);

}  // namespace consortium::detail
