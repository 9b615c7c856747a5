#include "odc/sink.hpp"

namespace odc {

ChannelSink::ChannelSink(std::function<void(const IterationRecord&)> consumer)
    : consumer_(std::move(consumer)), worker_([this] { drain(); }) {}

ChannelSink::~ChannelSink() { close(); }

void ChannelSink::push(const IterationRecord& rec) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(rec);
  }
  cv_.notify_one();
}

void ChannelSink::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_one();
  if (worker_.joinable()) worker_.join();
}

void ChannelSink::drain() {
  std::unique_lock lock(mu_);
  while (true) {
    cv_.wait(lock, [this] { return closed_ || !queue_.empty(); });
    while (!queue_.empty()) {
      IterationRecord rec = queue_.front();
      queue_.pop_front();
      lock.unlock();
      consumer_(rec);
      lock.lock();
    }
    if (closed_) return;
  }
}

}  // namespace odc
