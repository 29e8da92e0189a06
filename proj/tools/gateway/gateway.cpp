#include "gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hetadmit/calibration.hpp"

namespace hetadmit::gateway {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <typename T>
T get_or(const nlohmann::json& table, const char* key, T fallback) {
  if (!table.is_object() || !table.contains(key)) return fallback;
  return table.at(key).get<T>();
}

std::uint32_t count_tokens(std::string_view text) {
  std::uint32_t n = 0;
  bool in_token = false;
  for (char ch : text) {
    const bool space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r';
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return std::max<std::uint32_t>(n, 1);
}

}  // namespace

void apply_listen(GatewayConfig& config, std::string_view listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(Errc::ConfigError, "listen address must be host:port");
  }
  const auto host = listen.substr(0, colon);
  const std::string port_text(listen.substr(colon + 1));
  char* end = nullptr;
  const long port = std::strtol(port_text.c_str(), &end, 10);
  if (port_text.empty() || *end != '\0' || port < 0 || port > 65535) {
    throw Error(Errc::ConfigError, "invalid port in listen address '" + std::string(listen) + "'");
  }
  if (!host.empty()) config.host = std::string(host);
  config.port = static_cast<int>(port);
}

GatewayConfig gateway_config_from(const Config& config) {
  GatewayConfig out;
  out.devices = config.devices;
  if (!config.slo) throw Error(Errc::ConfigError, "[slo] max_latency_s is required");
  out.slo = *config.slo;
  out.plan = config.plan;
  out.seed = config.seed;
  out.heterogeneous = config.plan ? config.plan->heterogeneous_enabled : true;

  const auto gw = config.tree.contains("gateway") ? config.tree.at("gateway")
                                                   : nlohmann::json::object();
  try {
    if (gw.contains("listen")) apply_listen(out, gw.at("listen").get<std::string>());
    out.backend = get_or<std::string>(gw, "backend", out.backend);
    out.command = get_or<std::string>(gw, "command", out.command);
    out.time_scale = get_or<double>(gw, "time_scale", out.time_scale);
    out.heterogeneous = get_or<bool>(gw, "heterogeneous", out.heterogeneous);
    out.metrics_flush_interval =
        get_or<double>(gw, "metrics_flush_interval_s", out.metrics_flush_interval);
    out.log_level = get_or<std::string>(gw, "log_level", out.log_level);
    if (gw.contains("request_log")) out.request_log = gw.at("request_log").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("[gateway]: ") + e.what());
  }

  if (const char* listen = std::getenv("HETADMIT_LISTEN"); listen && *listen) {
    apply_listen(out, listen);
  }
  if (const char* level = std::getenv("HETADMIT_LOG_LEVEL"); level && *level) {
    out.log_level = level;
  }

  if (!(out.time_scale >= 0.0)) throw Error(Errc::ConfigError, "time_scale must be >= 0");
  if (out.backend == "simulated") {
    if (!out.seed) {
      throw Error(Errc::ConfigError, "the simulated backend needs an explicit seed");
    }
  } else if (out.backend == "command") {
    if (out.command.empty()) throw Error(Errc::ConfigError, "command backend needs a command");
  } else {
    throw Error(Errc::ConfigError, "unknown backend '" + out.backend + "'");
  }
  return out;
}

std::unique_ptr<WorkerBackend> make_backend(const GatewayConfig& config) {
  if (config.backend == "command") {
    return std::make_unique<CommandBackend>(config.command, config.time_scale);
  }
  if (!config.seed) throw Error(Errc::ConfigError, "the simulated backend needs an explicit seed");
  return std::make_unique<SimulatedBackend>(*config.seed, config.time_scale);
}

nlohmann::json to_json(const EmbedResponse& r) {
  nlohmann::json j{{"id", r.id},
                   {"placement", to_string(r.placement)},
                   {"status", r.busy() ? "busy" : "ok"}};
  if (r.latency) j["latency_s"] = *r.latency;
  if (r.service_latency) j["service_s"] = *r.service_latency;
  if (r.retry_after) j["retry_after_s"] = *r.retry_after;
  if (!r.busy()) j["batch_size"] = r.batch_size;
  return j;
}

EmbedRequest parse_embed_request(std::string_view body, std::uint64_t fallback_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("request body: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ParseError, "request body must be a JSON object");

  EmbedRequest req;
  if (j.contains("id")) {
    const auto& id = j.at("id");
    req.id = id.is_string() ? id.get<std::string>() : id.dump();
  } else {
    req.id = std::to_string(fallback_id);
  }
  if (j.contains("token_length")) {
    const auto& len = j.at("token_length");
    if (!len.is_number_integer() || len.get<std::int64_t>() < 1) {
      throw Error(Errc::ParseError, "token_length must be a positive integer");
    }
    req.token_length = len.get<std::uint32_t>();
  } else if (j.contains("text") && j.at("text").is_string()) {
    req.token_length = count_tokens(j.at("text").get<std::string>());
  } else {
    throw Error(Errc::ParseError, "request needs 'text' or 'token_length'");
  }
  return req;
}

Gateway::Gateway(GatewayConfig config, std::unique_ptr<WorkerBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
  spdlog::set_level(spdlog::level::from_str(config_.log_level));
  if (config_.request_log) {
    request_log_.open(*config_.request_log, std::ios::app);
    if (!request_log_) {
      throw Error(Errc::ConfigError, "cannot open request log " + config_.request_log->string());
    }
  }
}

Gateway::~Gateway() { stop(); }

void Gateway::resolve_plan() {
  if (ready()) return;
  const auto fleet = validate_fleet(config_.devices);
  plan_ = config_.plan ? *config_.plan : estimate_plan(fleet, config_.slo, config_.heterogeneous);
  const bool requested = config_.heterogeneous && plan_.heterogeneous_enabled;
  const auto layout = detect_and_plan(fleet, plan_, requested);
  dispatcher_ = std::make_unique<Dispatcher>(layout);

  auto add_pool = [&](const DeviceProfile& profile, Placement placement) {
    auto pool = std::make_unique<Pool>();
    pool->profile = profile;
    pool->placement = placement;
    pool->queue = dispatcher_->queues().queue_for(placement);
    for (std::uint32_t w = 0; w < profile.worker_count; ++w) {
      pool->stats.push_back(std::make_unique<WorkerStats>());
    }
    pools_.push_back(std::move(pool));
  };
  if (dispatcher_->queues().accelerator() != nullptr) {
    add_pool(*fleet.primary_accelerator(), Placement::Accelerator);
  }
  if (dispatcher_->queues().cpu() != nullptr) {
    add_pool(*fleet.offload_cpu(), Placement::Cpu);
  }
  for (auto& pool : pools_) {
    for (auto& stats : pool->stats) {
      pool->workers.emplace_back([this, p = pool.get(), s = stats.get()] { worker_loop(*p, *s); });
    }
  }
  spdlog::info("queue plan: accelerator {} cpu {} heterogeneous {}",
               layout.accelerator_depth.value_or(0), layout.cpu_depth.value_or(0),
               layout.heterogeneous_enabled);
  ready_.store(true, std::memory_order_release);
}

Gateway::Pool* Gateway::pool_for(Placement placement) {
  for (auto& pool : pools_) {
    if (pool->placement == placement) return pool.get();
  }
  return nullptr;
}

std::uint64_t Gateway::retry_after_hint() {
  const auto& pool = *pools_.front();
  const double drain = pool.profile.latency.alpha() *
                       static_cast<double>(pool.queue->length()) * config_.time_scale;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(drain)));
}

EmbedResponse Gateway::submit(const EmbedRequest& request) {
  if (!ready()) throw Error(Errc::ConfigError, "gateway plan is not resolved");
  const Query query{next_id_.fetch_add(1), request.token_length, 0.0};
  const auto placement = dispatcher_->dispatch(query);
  if (placement == Placement::Busy) {
    rejected_.fetch_add(1, std::memory_order_relaxed);
    EmbedResponse busy;
    busy.id = request.id;
    busy.retry_after = retry_after_hint();
    log_request(busy);
    return busy;
  }

  Pool& pool = *pool_for(placement);
  const auto length = pool.queue->length();
  auto seen = pool.max_length.load(std::memory_order_relaxed);
  while (length > seen && !pool.max_length.compare_exchange_weak(seen, length)) {
  }

  auto pending = std::make_unique<Pending>();
  pending->request = request;
  pending->admitted = Clock::now();
  auto result = pending->done.get_future();
  {
    std::lock_guard lock(pool.mutex);
    pool.pending.push_back(std::move(pending));
  }
  pool.ready.notify_one();
  auto response = result.get();
  log_request(response);
  return response;
}

void Gateway::worker_loop(Pool& pool, WorkerStats& stats) {
  while (true) {
    std::vector<std::unique_ptr<Pending>> batch;
    {
      std::unique_lock lock(pool.mutex);
      pool.ready.wait(lock, [&] { return stopping_.load() || !pool.pending.empty(); });
      if (pool.pending.empty()) return;
      for (auto& p : pool.pending) batch.push_back(std::move(p));
      pool.pending.clear();
    }

    const auto start = Clock::now();
    const auto concurrency = pool.queue->length();
    double service = 0.0;
    std::exception_ptr failure;
    try {
      service = backend_->run_batch(pool.profile, batch.size(), concurrency);
    } catch (...) {
      failure = std::current_exception();
    }

    std::vector<EmbedResponse> responses;
    responses.reserve(batch.size());
    {
      std::lock_guard lock(stats.mutex);
      for (auto& p : batch) {
        EmbedResponse r;
        r.id = p->request.id;
        r.placement = pool.placement;
        r.batch_size = batch.size();
        r.service_latency = service;
        const double wait =
            config_.time_scale > 0.0 ? seconds_between(p->admitted, start) / config_.time_scale
                                     : 0.0;
        r.latency = wait + service;
        if (!failure) {
          ++stats.accepted;
          stats.latencies.push_back(*r.latency);
          if (!config_.slo.met_by(*r.latency)) ++stats.violations;
        }
        responses.push_back(std::move(r));
      }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      pool.queue->release();
      if (failure) {
        batch[i]->done.set_exception(failure);
      } else {
        batch[i]->done.set_value(std::move(responses[i]));
      }
    }
  }
}

SimMetrics Gateway::metrics() const {
  SimMetrics m;
  m.rejected_busy = rejected_.load(std::memory_order_relaxed);
  std::vector<double> latencies;
  for (const auto& pool : pools_) {
    std::uint64_t accepted = 0;
    for (const auto& stats : pool->stats) {
      std::lock_guard lock(stats->mutex);
      accepted += stats->accepted;
      m.slo_violations += stats->violations;
      latencies.insert(latencies.end(), stats->latencies.begin(), stats->latencies.end());
    }
    (pool->placement == Placement::Accelerator ? m.accepted_accelerator : m.accepted_cpu) +=
        accepted;
    m.max_observed_concurrency[pool->profile.name] = pool->max_length.load();
  }
  m.accepted = m.accepted_accelerator + m.accepted_cpu;
  m.latency_p50 = percentile(latencies, 0.50);
  m.latency_p99 = percentile(latencies, 0.99);
  m.latency_max = latencies.empty() ? 0.0 : *std::max_element(latencies.begin(), latencies.end());
  m.duration = seconds_between(started_, Clock::now());
  m.throughput = m.duration > 0.0 ? static_cast<double>(m.accepted) / m.duration : 0.0;
  return m;
}

void Gateway::log_request(const EmbedResponse& response) {
  if (!request_log_.is_open()) return;
  auto j = to_json(response);
  j["t"] = seconds_between(started_, Clock::now());
  std::lock_guard lock(log_mutex_);
  request_log_ << j.dump() << '\n';
}

void Gateway::flush_loop() {
  const auto interval = std::chrono::duration<double>(
      config_.metrics_flush_interval > 0.0 ? config_.metrics_flush_interval : 10.0);
  std::unique_lock lock(flush_mutex_);
  while (!flush_cv_.wait_for(lock, interval, [&] { return stopping_.load(); })) {
    if (ready()) {
      const auto m = metrics();
      spdlog::info("accepted {} busy {} violations {} p99 {:.3f}s", m.accepted, m.rejected_busy,
                   m.slo_violations, m.latency_p99);
    }
    std::lock_guard log_lock(log_mutex_);
    if (request_log_.is_open()) request_log_.flush();
  }
}

void Gateway::start() {
  server_ = std::make_unique<httplib::Server>();
  const std::size_t threads =
      ready() ? std::clamp<std::size_t>(plan_.accelerator_depth + plan_.cpu_depth + 8, 8, 512)
              : 64;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // No SO_REUSEPORT: a second gateway on the same port must fail to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });

  server_->Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready()) {
      res.status = 503;
      res.set_content(R"({"status":"not_ready"})", "application/json");
      return;
    }
    res.set_content(nlohmann::json{{"status", "ok"}, {"plan", plan_}}.dump(), "application/json");
  });

  server_->Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
    nlohmann::json j = ready() ? nlohmann::json(metrics()) : nlohmann::json::object();
    j["ready"] = ready();
    res.set_content(j.dump(), "application/json");
  });

  server_->Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
    if (!ready()) {
      res.status = 503;
      res.set_content(R"({"status":"not_ready"})", "application/json");
      return;
    }
    try {
      const auto request = parse_embed_request(req.body, next_id_.load());
      const auto response = submit(request);
      if (response.busy()) {
        res.status = 429;
        res.set_header("Retry-After", std::to_string(*response.retry_after));
      }
      res.set_content(to_json(response).dump(), "application/json");
    } catch (const Error& e) {
      res.status = e.code() == Errc::ParseError ? 400 : 500;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  if (config_.port == 0) {
    bound_port_ = server_->bind_to_any_port(config_.host);
    if (bound_port_ <= 0) bound_port_ = 0;
  } else if (server_->bind_to_port(config_.host, config_.port)) {
    bound_port_ = config_.port;
  }
  if (bound_port_ == 0) {
    throw Error(Errc::BindFailure,
                "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  flush_thread_ = std::thread([this] { flush_loop(); });
  spdlog::info("listening on {}:{}", config_.host, bound_port_);
}

void Gateway::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  stopping_ = true;
  {
    std::lock_guard lock(flush_mutex_);
  }
  flush_cv_.notify_all();
  if (flush_thread_.joinable()) flush_thread_.join();
  for (auto& pool : pools_) {
    {
      std::lock_guard lock(pool->mutex);
    }
    pool->ready.notify_all();
    for (auto& w : pool->workers) {
      if (w.joinable()) w.join();
    }
  }
  std::lock_guard lock(log_mutex_);
  if (request_log_.is_open()) request_log_.flush();
}

}  // namespace hetadmit::gateway
