#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "hetadmit/simulation.hpp"

namespace hetadmit::gateway {

/// Executes one batch on a device and returns its service time in modeled
/// seconds. Called concurrently from every worker thread.
class WorkerBackend {
 public:
  virtual ~WorkerBackend() = default;
  virtual double run_batch(const DeviceProfile& device, std::uint64_t batch_size,
                           std::uint64_t concurrency) = 0;
};

/// Samples the device line (plus configured noise) and sleeps
/// latency * time_scale real seconds.
class SimulatedBackend final : public WorkerBackend {
 public:
  SimulatedBackend(std::uint64_t seed, double time_scale);

  double run_batch(const DeviceProfile& device, std::uint64_t batch_size,
                   std::uint64_t concurrency) override;

 private:
  std::uint64_t seed_;
  double time_scale_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<SimulatedDevice>> devices_;
};

/// Runs `<command> <device> <batch_size> <concurrency>` through the shell per
/// batch and reports the wall time divided by time_scale. A nonzero exit
/// status throws.
class CommandBackend final : public WorkerBackend {
 public:
  CommandBackend(std::string command, double time_scale);

  double run_batch(const DeviceProfile& device, std::uint64_t batch_size,
                   std::uint64_t concurrency) override;

 private:
  std::string command_;
  double time_scale_;
};

}  // namespace hetadmit::gateway
