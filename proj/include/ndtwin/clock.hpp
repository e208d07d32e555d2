// Time source abstraction: real monotonic clock or a virtual test clock.
#pragma once

#include <cstdint>

namespace ndtwin {

class Clock {
  public:
    virtual ~Clock() = default;
    virtual std::int64_t now_us() = 0;
    virtual void sleep_until_us(std::int64_t t_us) = 0;
};

/// Monotonic wall clock (microseconds since the steady epoch).
class SystemClock final : public Clock {
  public:
    std::int64_t now_us() override;
    void sleep_until_us(std::int64_t t_us) override;
};

/// Manually advanced clock for deterministic single-threaded tests;
/// sleep_until_us jumps forward instantly.
class VirtualClock final : public Clock {
  public:
    explicit VirtualClock(std::int64_t start_us = 0) : now_(start_us) {}
    std::int64_t now_us() override { return now_; }
    void sleep_until_us(std::int64_t t_us) override {
        if (t_us > now_) now_ = t_us;
    }
    void advance_us(std::int64_t d_us) { now_ += d_us; }
    void advance_ms(double d_ms) { now_ += static_cast<std::int64_t>(d_ms * 1000.0); }

  private:
    std::int64_t now_;
};

}  // namespace ndtwin
