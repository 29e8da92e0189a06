#pragma once

// HTTP gateway in front of the dispatcher.
//
//   POST /v1/embed    {"id": "...", "text": "..."} or {"id": "...", "token_length": n}
//   GET  /v1/metrics  SimMetrics-shaped counters
//   GET  /healthz     503 until the queue plan is resolved
//
// Busy requests get 429 with a Retry-After hint and no latency.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "backend.hpp"
#include "hetadmit/dispatch.hpp"
#include "hetadmit/domain.hpp"
#include "hetadmit/serialize.hpp"

namespace httplib {
class Server;
}

namespace hetadmit::gateway {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  std::vector<DeviceProfile> devices;
  Slo slo{1.0};
  /// Empty means "auto": estimated from the device models at startup.
  std::optional<QueuePlan> plan;
  bool heterogeneous = true;
  /// "simulated" or "command".
  std::string backend = "simulated";
  std::string command;
  /// Real seconds slept per modeled second by the simulated backend.
  double time_scale = 1.0;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> request_log;
  double metrics_flush_interval = 10.0;
  std::string log_level = "info";
};

/// Reads [gateway], [plan], [slo], the devices and the seed of a config and
/// applies HETADMIT_LISTEN ("host:port") and HETADMIT_LOG_LEVEL.
/// Throws Error(ConfigError).
GatewayConfig gateway_config_from(const Config& config);

/// "host:port" or ":port". Throws Error(ConfigError).
void apply_listen(GatewayConfig& config, std::string_view listen);

std::unique_ptr<WorkerBackend> make_backend(const GatewayConfig& config);

struct EmbedRequest {
  std::string id;
  std::uint32_t token_length = 1;
};

struct EmbedResponse {
  std::string id;
  Placement placement = Placement::Busy;
  /// Modeled end-to-end seconds; empty for busy.
  std::optional<double> latency;
  /// Modeled service time of the batch the request ran in; empty for busy.
  std::optional<double> service_latency;
  /// Seconds the client should wait before retrying a busy request.
  std::optional<std::uint64_t> retry_after;
  std::uint64_t batch_size = 0;

  bool busy() const noexcept { return placement == Placement::Busy; }
};

nlohmann::json to_json(const EmbedResponse& response);
/// Parses a request body; token_length defaults to the whitespace token count
/// of `text`. Throws Error(ParseError).
EmbedRequest parse_embed_request(std::string_view body, std::uint64_t fallback_id);

class Gateway {
 public:
  Gateway(GatewayConfig config, std::unique_ptr<WorkerBackend> backend);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Builds the queues and worker pools; until then the gateway is not ready.
  void resolve_plan();
  bool ready() const noexcept { return ready_.load(std::memory_order_acquire); }
  const QueuePlan& plan() const { return plan_; }

  /// Admission plus execution, blocking until the batch finishes.
  EmbedResponse submit(const EmbedRequest& request);

  SimMetrics metrics() const;

  /// Binds and serves on a background thread. Throws Error(BindFailure).
  void start();
  void stop();
  int port() const noexcept { return bound_port_; }

 private:
  struct Pending {
    EmbedRequest request;
    std::chrono::steady_clock::time_point admitted;
    std::promise<EmbedResponse> done;
  };

  struct WorkerStats {
    mutable std::mutex mutex;
    std::vector<double> latencies;
    std::uint64_t accepted = 0;
    std::uint64_t violations = 0;
  };

  struct Pool {
    DeviceProfile profile;
    Placement placement = Placement::Busy;
    DeviceQueue* queue = nullptr;
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::unique_ptr<Pending>> pending;
    std::vector<std::unique_ptr<WorkerStats>> stats;
    std::vector<std::thread> workers;
    std::atomic<std::uint64_t> max_length{0};
  };

  void worker_loop(Pool& pool, WorkerStats& stats);
  Pool* pool_for(Placement placement);
  std::uint64_t retry_after_hint();
  void log_request(const EmbedResponse& response);
  void flush_loop();

  GatewayConfig config_;
  std::unique_ptr<WorkerBackend> backend_;
  QueuePlan plan_;
  std::unique_ptr<Dispatcher> dispatcher_;
  std::vector<std::unique_ptr<Pool>> pools_;
  std::atomic<bool> ready_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> rejected_{0};
  std::atomic<std::uint64_t> next_id_{0};
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();

  std::mutex log_mutex_;
  std::ofstream request_log_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::thread flush_thread_;
  std::mutex flush_mutex_;
  std::condition_variable flush_cv_;
  int bound_port_ = 0;
};

}  // namespace hetadmit::gateway
