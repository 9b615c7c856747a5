#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>

#include "odc/trainer.hpp"

namespace odc {

// Buffers records from the trainer and hands them to `consumer` on a
// separate logger thread, in push order.
class ChannelSink final : public MetricSink {
 public:
  explicit ChannelSink(std::function<void(const IterationRecord&)> consumer);
  ~ChannelSink() override;

  ChannelSink(const ChannelSink&) = delete;
  ChannelSink& operator=(const ChannelSink&) = delete;

  void push(const IterationRecord& rec) override;
  // Drains every pending record and stops the logger thread. Idempotent.
  void close();

 private:
  void drain();

  std::function<void(const IterationRecord&)> consumer_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<IterationRecord> queue_;
  bool closed_ = false;
  std::thread worker_;
};

}  // namespace odc
