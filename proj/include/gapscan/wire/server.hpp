#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "gapscan/core/oracle.hpp"
#include "gapscan/wire/protocol.hpp"

namespace gapscan::wire {

struct WireConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0: any free port
  std::optional<std::uint64_t> query_budget;
  std::string log_path;  // empty: no access log

  void validate() const {
    if (query_budget && *query_budget == 0) throw ConfigError("server query budget, when set, must be >= 1");
    if (port < 0 || port > 65535) throw ConfigError("port out of range");
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

// Serves a model behind the hard-label protocol on a background thread. Requests are
// validated before they are counted; the budget check and the increment are one atomic
// step. Out-of-range input values are clipped to [0,1] and the clipping is logged.
class WireServer {
 public:
  WireServer(std::shared_ptr<HardLabelOracle> model, WireConfig cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!model_) throw ConfigError("WireServer needs a model");
    if (!cfg_.log_path.empty()) {
      log_.open(cfg_.log_path, std::ios::app);
      if (!log_) throw ConfigError("cannot open access log " + cfg_.log_path);
    }
    server_.set_tcp_nodelay(true);
    routes();
    port_ = cfg_.port == 0 ? server_.bind_to_any_port(cfg_.host) : (server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
    if (port_ <= 0) throw ConfigError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  WireServer(const WireServer&) = delete;
  WireServer& operator=(const WireServer&) = delete;

  ~WireServer() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  // Blocks until stop() is called from elsewhere.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string endpoint() const { return "http://" + cfg_.host + ":" + std::to_string(port_); }
  std::uint64_t queries_served() const noexcept { return served_.load(); }

 private:
  void routes() {
    server_.Get("/meta", [this](const httplib::Request& req, httplib::Response& res) {
      const Shape s = model_->input_shape();
      nlohmann::json body{{"v", kProtocolVersion},
                          {"num_labels", model_->num_labels()},
                          {"shape", shape_json(s)},
                          {"queries_served", served_.load()}};
      res.set_content(body.dump(), "application/json");
      log(req, 200, "ok");
    });

    server_.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& body) {
        std::vector<Tensor> xs{parse_tensor(body)};
        const std::size_t clipped = admit(xs);
        const Label label = model_->classify(xs.front());
        return std::pair{nlohmann::json{{"label", label}}, clipped};
      });
    });

    server_.Post("/classify_batch", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& body) {
        if (!body.is_object() || !body.contains("inputs") || !body.at("inputs").is_array()) {
          throw ProtocolError("batch body must be an object with an \"inputs\" array");
        }
        std::vector<Tensor> xs;
        for (const auto& item : body.at("inputs")) xs.push_back(parse_tensor(item));
        if (xs.empty()) throw ProtocolError("\"inputs\" is empty");
        const std::size_t clipped = admit(xs);
        return std::pair{nlohmann::json{{"labels", model_->classify_batch(xs)}}, clipped};
      });
    });
  }

  template <class Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    try {
      const nlohmann::json body = nlohmann::json::parse(req.body);
      auto [reply, clipped] = fn(body);
      res.set_content(reply.dump(), "application/json");
      log(req, 200, clipped ? "ok clipped=" + std::to_string(clipped) : "ok");
    } catch (const nlohmann::json::exception& e) {
      reply_error(req, res, 400, "bad_request", std::string("malformed JSON: ") + e.what());
    } catch (const BudgetExhausted& e) {
      reply_error(req, res, kStatusOverBudget, "over_budget", e.what());
    } catch (const Error& e) {
      reply_error(req, res, 400, "bad_request", e.what());
    }
  }

  void reply_error(const httplib::Request& req, httplib::Response& res, int status, const std::string& code,
                   const std::string& message) {
    res.status = status;
    res.set_content(error_body(code, message), "application/json");
    log(req, status, code);
  }

  // Shape-checks and clips every input, then reserves one query per input (all or none).
  std::size_t admit(std::vector<Tensor>& xs) {
    const Shape want = model_->input_shape();
    std::size_t clipped = 0;
    for (Tensor& x : xs) {
      if (x.shape() != want) {
        throw ProtocolError("input shape " + to_string(x.shape()) + " does not match model shape " + to_string(want));
      }
      for (double& v : x.values()) {
        if (v < 0.0 || v > 1.0) {
          v = std::clamp(v, 0.0, 1.0);
          ++clipped;
        }
      }
    }
    std::uint64_t cur = served_.load();
    do {
      if (cfg_.query_budget && cur + xs.size() > *cfg_.query_budget) {
        throw BudgetExhausted("server query budget of " + std::to_string(*cfg_.query_budget) + " exhausted");
      }
    } while (!served_.compare_exchange_weak(cur, cur + xs.size()));
    return clipped;
  }

  void log(const httplib::Request& req, int status, const std::string& outcome) {
    if (!log_.is_open()) return;
    std::lock_guard lock(log_mutex_);
    log_ << utc_timestamp() << ' ' << req.method << ' ' << req.path << ' ' << status << ' ' << outcome << '\n';
    log_.flush();
  }

  std::shared_ptr<HardLabelOracle> model_;
  WireConfig cfg_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<std::uint64_t> served_{0};
  std::mutex log_mutex_;
  std::ofstream log_;
};

}  // namespace gapscan::wire
