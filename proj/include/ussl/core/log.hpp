#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace ussl {

using LogSink = std::function<void(const std::string& level, const std::string& msg)>;

namespace detail {
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
inline LogSink& log_sink() {
  static LogSink sink = [](const std::string& level, const std::string& msg) {
    std::cerr << "[" << level << "] " << msg << '\n';
  };
  return sink;
}
}  // namespace detail

/// Replace the process-wide sink; returns the previous one.
inline LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(detail::log_mutex());
  auto old = std::move(detail::log_sink());
  detail::log_sink() = std::move(sink);
  return old;
}

inline void log_message(const std::string& level, const std::string& msg) {
  std::lock_guard lock(detail::log_mutex());
  if (detail::log_sink()) detail::log_sink()(level, msg);
}

inline void log_warning(const std::string& msg) { log_message("warn", msg); }
inline void log_info(const std::string& msg) { log_message("info", msg); }

}  // namespace ussl
