#include "ndtwin/clock.hpp"

#include <chrono>
#include <thread>

namespace ndtwin {

namespace {
using steady = std::chrono::steady_clock;
}

std::int64_t SystemClock::now_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(steady::now().time_since_epoch())
        .count();
}

void SystemClock::sleep_until_us(std::int64_t t_us) {
    std::this_thread::sleep_until(steady::time_point(std::chrono::microseconds(t_us)));
}

}  // namespace ndtwin
