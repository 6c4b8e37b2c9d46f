#include "cardiofeat/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace cardiofeat {
namespace {
std::atomic<bool> g_enabled{true};
std::mutex g_mutex;
}  // namespace

void set_log_enabled(bool enabled) { g_enabled = enabled; }

void log_stage(std::string_view stage, std::string_view message) {
    if (!g_enabled) return;
    std::lock_guard lock(g_mutex);
    std::cerr << '[' << stage << "] " << message << '\n';
}

}  // namespace cardiofeat
