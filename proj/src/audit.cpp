#include "brevity/audit.hpp"

#include <mutex>

namespace brevity::audit {

namespace {
std::mutex g_mutex;
Observer g_observer;
} // namespace

void set_observer(Observer observer) {
    std::lock_guard lock(g_mutex);
    g_observer = std::move(observer);
}

void observe(std::string_view stage, std::span<const PointId> ids) {
    std::lock_guard lock(g_mutex);
    if (g_observer) g_observer(stage, ids);
}

} // namespace brevity::audit
