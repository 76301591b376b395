// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "sdcd/decoder.hpp"
#include "sdcd/model.hpp"
#include "sdcd/negatives.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd {

using json = nlohmann::json;

/// Schema or invariant violation in a JSON document. `field()` is the dotted path of
/// the offending value, e.g. "decode.beta".
class SchemaError : public InvalidArgument {
 public:
  SchemaError(std::string field, const std::string& message)
      : InvalidArgument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Typed accessors raising SchemaError with the given path.
double json_number(const json& v, const std::string& path);
std::uint64_t json_uint(const json& v, const std::string& path);
std::string json_string(const json& v, const std::string& path);
bool json_bool(const json& v, const std::string& path);
const json& json_object(const json& v, const std::string& path);
const json& json_array(const json& v, const std::string& path);
/// Rejects any key of `obj` not listed in `allowed`.
void json_require_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& path);
std::string join_path(const std::string& parent, std::string_view child);
std::string join_path(const std::string& parent, std::size_t index);

json to_json(const ToyModelConfig& cfg);
ToyModelConfig toy_config_from_json(const json& j, const std::string& path);

json to_json(const ProbeSpec& spec);
ProbeSpec probe_spec_from_json(const json& j, const std::string& path);

json to_json(const HomogenizationConfig& cfg);
json to_json(const NegativeStrategy& strategy);
NegativeStrategy negative_strategy_from_json(const json& j, const std::string& path);

/// Canonical JSON form of a decode config. Every field is written, so two configs
/// are equal iff their JSON is equal.
json to_json(const DecodeConfig& cfg);
/// Overlays the fields present in `j` on `base`. Values are range-checked here; checks
/// that need the model (layer indices) happen in DecodeConfig::validate.
DecodeConfig decode_config_from_json(const json& j, const std::string& path, DecodeConfig base = {});

/// 16 hex digits of FNV-1a 64 over the compact dump of `j` (keys are sorted).
std::string stable_digest(const json& j);
std::string config_digest(const DecodeConfig& cfg);

}  // namespace sdcd
