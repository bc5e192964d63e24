#include "distinct/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace distinct {
namespace {

bool quiet() {
  static const bool q = std::getenv("DISTINCT_QUIET") != nullptr;
  return q;
}

std::mutex& sink() {
  static std::mutex m;
  return m;
}

}  // namespace

void log_warning(std::string_view message) {
  if (quiet()) return;
  std::lock_guard lock(sink());
  std::cerr << "warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (quiet()) return;
  std::lock_guard lock(sink());
  std::cerr << message << '\n';
}

}  // namespace distinct
