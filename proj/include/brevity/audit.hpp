#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

namespace brevity::audit {

using PointId = std::uint32_t;

/// Receives the point identifiers that reach a data-dependent stage ("grid", "median", "split",
/// "search", "holdout"). Cross-validation also reports each fold's holdout part as "fold"
/// before training on the rest.
using Observer = std::function<void(std::string_view stage, std::span<const PointId> ids)>;

/// Installs a process-wide observer; pass an empty function to remove it.
void set_observer(Observer observer);

/// Forwards to the installed observer, if any.
void observe(std::string_view stage, std::span<const PointId> ids);

/// Installs an observer for the lifetime of the guard.
class ScopedObserver {
public:
    explicit ScopedObserver(Observer observer) { set_observer(std::move(observer)); }
    ~ScopedObserver() { set_observer({}); }
    ScopedObserver(const ScopedObserver&) = delete;
    ScopedObserver& operator=(const ScopedObserver&) = delete;
};

} // namespace brevity::audit
