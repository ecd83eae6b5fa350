#include "homwave/error.hpp"

#include <atomic>
#include <iostream>

namespace homwave {

namespace {

void stderr_sink(const std::string& message) { std::cerr << "homwave: warning: " << message << '\n'; }

std::atomic<void (*)(const std::string&)> g_sink{&stderr_sink};

}  // namespace

void set_warning_sink(void (*sink)(const std::string&)) { g_sink.store(sink); }

void warn(const std::string& message) {
  if (auto* sink = g_sink.load()) sink(message);
}

}  // namespace homwave
