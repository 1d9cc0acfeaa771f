#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

namespace apt {

/// Sink for non-fatal diagnostics raised inside the library. The default
/// writes to stderr; applications can redirect it (the CLI routes it into
/// its log file).
using WarningHandler = std::function<void(std::string_view)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

inline void set_warning_handler(WarningHandler h) { warning_handler() = std::move(h); }

/// Installs a handler for the lifetime of the guard.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler h) : previous_(std::exchange(warning_handler(), std::move(h))) {}
  ~ScopedWarningHandler() { warning_handler() = std::move(previous_); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler previous_;
};

inline void warn(std::string_view msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (warning_handler()) warning_handler()(msg);
}

}  // namespace apt
