#include "fhsc/error.hpp"

#include <iostream>
#include <mutex>

namespace fhsc {

void log_warning(const std::string& msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[fhsc] warning: " << msg << "\n";
}

}  // namespace fhsc
