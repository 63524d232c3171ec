#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <thread>

#include "httplib.h"

#include "gapscan/core/oracle.hpp"
#include "gapscan/wire/protocol.hpp"

namespace gapscan::wire {

struct RemoteOptions {
  int retries = 3;  // extra attempts after a transport failure
  std::chrono::milliseconds backoff{50};  // doubled on every retry
  std::chrono::seconds timeout{30};
  std::optional<Shape> expected_shape;  // checked against /meta when set
  std::optional<std::uint64_t> query_budget;  // client-side cap, on top of any server cap
};

// Splits "http://host:port" (scheme optional) into host and port.
inline std::pair<std::string, int> split_endpoint(const std::string& endpoint) {
  std::string rest = endpoint;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
    throw ConfigError("endpoint must look like http://host:port, got \"" + endpoint + "\"");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(rest.substr(colon + 1), &used);
    if (used != rest.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("bad port in endpoint \"" + endpoint + "\"");
  }
  if (port <= 0 || port > 65535) throw ConfigError("bad port in endpoint \"" + endpoint + "\"");
  return {rest.substr(0, colon), port};
}

// A remote hard-label endpoint seen through the local oracle interface.
class RemoteOracle final : public HardLabelOracle {
 public:
  explicit RemoteOracle(std::string endpoint, RemoteOptions opts = {})
      : HardLabelOracle(opts.query_budget), endpoint_(std::move(endpoint)), opts_(opts) {
    std::tie(host_, port_) = split_endpoint(endpoint_);
    const nlohmann::json meta = call([](httplib::Client& c) { return c.Get("/meta"); });
    try {
      if (meta.contains("v") && meta.at("v").get<int>() != kProtocolVersion) {
        throw ConfigError(endpoint_ + " speaks protocol v" + meta.at("v").dump() + ", expected v" +
                          std::to_string(kProtocolVersion));
      }
      shape_ = parse_shape(meta.at("shape"));
      labels_ = meta.at("num_labels").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(endpoint_ + ": malformed /meta reply: " + e.what());
    }
    if (opts_.expected_shape && *opts_.expected_shape != shape_) {
      throw ConfigError(endpoint_ + " serves shape " + to_string(shape_) + ", expected " +
                        to_string(*opts_.expected_shape));
    }
  }

  std::size_t num_labels() const override { return labels_; }
  Shape input_shape() const override { return shape_; }
  const std::string& endpoint() const noexcept { return endpoint_; }

  // Server-side counter, read from /meta.
  std::uint64_t remote_queries_served() {
    const nlohmann::json meta = call([](httplib::Client& c) { return c.Get("/meta"); });
    return meta.at("queries_served").get<std::uint64_t>();
  }

 protected:
  Label classify_one(const Tensor& x) override {
    const std::string body = tensor_json(x).dump();
    const nlohmann::json reply =
        call([&](httplib::Client& c) { return c.Post("/classify", body, "application/json"); });
    return read_label(reply.at("label"));
  }

  std::vector<Label> classify_many(std::span<const Tensor> xs) override {
    nlohmann::json inputs = nlohmann::json::array();
    for (const Tensor& x : xs) inputs.push_back(tensor_json(x));
    const std::string body = nlohmann::json{{"inputs", std::move(inputs)}}.dump();
    const nlohmann::json reply =
        call([&](httplib::Client& c) { return c.Post("/classify_batch", body, "application/json"); });
    const nlohmann::json& labels = reply.at("labels");
    if (!labels.is_array() || labels.size() != xs.size()) {
      throw ProtocolError(endpoint_ + ": batch reply has the wrong number of labels");
    }
    std::vector<Label> out;
    out.reserve(xs.size());
    for (const auto& l : labels) out.push_back(read_label(l));
    return out;
  }

  void validate(const Tensor& x) const override {
    if (x.shape() != shape_) {
      throw ConfigError("input shape " + to_string(x.shape()) + " does not match " + endpoint_ + " shape " +
                        to_string(shape_));
    }
    if (!all_finite(x.values())) throw InvalidInput("oracle inputs must be finite");
  }

 private:
  Label read_label(const nlohmann::json& j) const {
    if (!j.is_number_unsigned() || j.get<std::size_t>() >= labels_) {
      throw ProtocolError(endpoint_ + ": label out of range: " + j.dump());
    }
    return j.get<Label>();
  }

  std::unique_ptr<httplib::Client> acquire() {
    {
      std::lock_guard lock(pool_mutex_);
      if (!pool_.empty()) {
        auto c = std::move(pool_.back());
        pool_.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(host_, port_);
    c->set_keep_alive(true);
    c->set_tcp_nodelay(true);
    c->set_connection_timeout(opts_.timeout);
    c->set_read_timeout(opts_.timeout);
    c->set_write_timeout(opts_.timeout);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(pool_mutex_);
    pool_.push_back(std::move(c));
  }

  // Transport failures are retried with exponential backoff; HTTP error replies are not.
  template <class Fn>
  nlohmann::json call(Fn&& send) {
    std::chrono::milliseconds wait = opts_.backoff;
    std::string last;
    for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(wait);
        wait *= 2;
      }
      auto client = acquire();
      httplib::Result res = send(*client);
      if (!res) {
        last = httplib::to_string(res.error());
        continue;  // drop the client; its connection may be broken
      }
      release(std::move(client));
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception&) {
        throw ProtocolError(endpoint_ + ": reply is not JSON (HTTP " + std::to_string(res->status) + ")");
      }
      const std::string msg = body.is_object() && body.contains("message") ? body.at("message").dump() : res->body;
      if (res->status == kStatusOverBudget) throw BudgetExhausted(endpoint_ + ": " + msg);
      if (res->status != 200) {
        throw ProtocolError(endpoint_ + ": HTTP " + std::to_string(res->status) + ": " + msg);
      }
      return body;
    }
    throw TransportError(endpoint_ + " unreachable after " + std::to_string(opts_.retries + 1) +
                         " attempts: " + last);
  }

  std::string endpoint_;
  RemoteOptions opts_;
  std::string host_;
  int port_ = 0;
  Shape shape_{};
  std::size_t labels_ = 0;
  std::mutex pool_mutex_;
  std::vector<std::unique_ptr<httplib::Client>> pool_;
};

}  // namespace gapscan::wire
