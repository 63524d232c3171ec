#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "gapscan/core/tensor.hpp"

// HTTP/1.1 + JSON hard-label protocol, version 1 (docs/wire_protocol.md).
//
//   GET  /meta            -> {"v":1,"num_labels":K,"shape":[H,W,C],"queries_served":n}
//   POST /classify        {"shape":[H,W,C],"data":[...]}            -> {"label":l}
//   POST /classify_batch  {"inputs":[{"shape":..,"data":..}, ...]}   -> {"labels":[...]}
//
// Errors carry {"error": code, "message": text}: 400 "bad_request", 429 "over_budget".
namespace gapscan::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kStatusOverBudget = 429;

inline nlohmann::json shape_json(const Shape& s) { return nlohmann::json::array({s.height, s.width, s.channels}); }

inline nlohmann::json tensor_json(const Tensor& x) { return {{"shape", shape_json(x.shape())}, {"data", x.vec()}}; }

// Strict decoding; every failure is a ProtocolError.
inline Shape parse_shape(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ProtocolError("\"shape\" must be an array of 3 positive integers");
  Shape s{};
  std::size_t* dims[3] = {&s.height, &s.width, &s.channels};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number_unsigned() || j[i].get<std::size_t>() == 0) {
      throw ProtocolError("\"shape\" must be an array of 3 positive integers");
    }
    *dims[i] = j[i].get<std::size_t>();
  }
  return s;
}

inline Tensor parse_tensor(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw ProtocolError("input must be an object with \"shape\" and \"data\"");
  }
  const Shape s = parse_shape(j.at("shape"));
  const nlohmann::json& data = j.at("data");
  if (!data.is_array()) throw ProtocolError("\"data\" must be an array of numbers");
  if (data.size() != s.size()) {
    throw ProtocolError("\"data\" has " + std::to_string(data.size()) + " values, shape needs " +
                        std::to_string(s.size()));
  }
  std::vector<double> v;
  v.reserve(data.size());
  for (const auto& e : data) {
    if (!e.is_number()) throw ProtocolError("\"data\" must contain only numbers");
    v.push_back(e.get<double>());
    if (!std::isfinite(v.back())) throw ProtocolError("\"data\" must be finite");
  }
  return Tensor(s, std::move(v));
}

inline std::string error_body(const std::string& code, const std::string& message) {
  return nlohmann::json{{"error", code}, {"message", message}}.dump();
}

}  // namespace gapscan::wire
