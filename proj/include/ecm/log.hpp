#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace ecm::log {

enum class Level { Info, Warn };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level lvl, std::string_view msg) {
    std::cerr << (lvl == Level::Warn ? "warning: " : "") << msg << '\n';
  };
  return s;
}
}  // namespace detail

// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::mutex());
  std::swap(detail::sink(), s);
  return s;
}

inline void emit(Level lvl, std::string_view msg) {
  std::lock_guard lock(detail::mutex());
  if (detail::sink()) detail::sink()(lvl, msg);
}

inline void info(std::string_view msg) { emit(Level::Info, msg); }
inline void warn(std::string_view msg) { emit(Level::Warn, msg); }

// Restores the previous sink on scope exit.
class ScopedSink {
 public:
  explicit ScopedSink(Sink s) : previous_(set_sink(std::move(s))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace ecm::log
