#include "backend.hpp"

#include <chrono>
#include <cstdio>
#include <thread>

namespace hetadmit::gateway {

SimulatedBackend::SimulatedBackend(std::uint64_t seed, double time_scale)
    : seed_(seed), time_scale_(time_scale) {}

double SimulatedBackend::run_batch(const DeviceProfile& device, std::uint64_t /*batch_size*/,
                                   std::uint64_t concurrency) {
  double latency = 0.0;
  {
    std::lock_guard lock(mutex_);
    auto& slot = devices_[device.name];
    if (!slot) {
      const auto stream = device.kind == DeviceKind::Accelerator ? 0u : 1u;
      slot = std::make_unique<SimulatedDevice>(device, derive_seed(seed_, stream));
    }
    latency = slot->sample_batch_latency(concurrency);
  }
  std::this_thread::sleep_for(std::chrono::duration<double>(latency * time_scale_));
  return latency;
}

CommandBackend::CommandBackend(std::string command, double time_scale)
    : command_(std::move(command)), time_scale_(time_scale) {}

double CommandBackend::run_batch(const DeviceProfile& device, std::uint64_t batch_size,
                                 std::uint64_t concurrency) {
  const std::string cmd = command_ + " '" + device.name + "' " + std::to_string(batch_size) +
                          " " + std::to_string(concurrency);
  const auto start = std::chrono::steady_clock::now();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw Error(Errc::ConfigError, "cannot run worker command");
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) {
  }
  const int status = ::pclose(pipe);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  if (status != 0) {
    throw Error(Errc::ConfigError,
                "worker command exited with status " + std::to_string(status));
  }
  return time_scale_ > 0.0 ? elapsed.count() / time_scale_ : elapsed.count();
}

}  // namespace hetadmit::gateway
