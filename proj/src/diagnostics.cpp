#include "conformal/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace conformal::diagnostics {
namespace {

std::mutex sink_mutex;

Sink& current_sink() {
  static Sink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex);
  std::swap(current_sink(), sink);
  return sink;
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  if (current_sink()) current_sink()(message);
}

}  // namespace conformal::diagnostics
