#pragma once

#include <chrono>
#include <string>
#include <thread>

#include "augagent/errors.hpp"

namespace augagent {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{200};
  double multiplier = 2.0;
};

// Calls fn until it returns without a TransportError, sleeping with
// exponential backoff in between. Other exceptions propagate immediately.
// Gives up with a BackendError naming the attempt count.
template <typename F>
auto with_retries(const RetryPolicy& policy, const std::string& what, F&& fn)
    -> decltype(fn()) {
  auto delay = policy.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError& e) {
      if (attempt >= policy.max_attempts) {
        throw BackendError(what + " failed after " + std::to_string(attempt) +
                           " attempts: " + e.what());
      }
    }
    std::this_thread::sleep_for(delay);
    delay = std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
  }
}

}  // namespace augagent
