#pragma once

#include <exception>
#include <mutex>

namespace poolalloc::detail {

// Exceptions must not leave an OpenMP region; keep the first one and rethrow after the join.
class ExceptionSink
{
public:
    template <class F>
    void run(F&& f) noexcept
    {
        try {
            f();
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!first_)
                first_ = std::current_exception();
        }
    }

    void rethrow()
    {
        if (first_)
            std::rethrow_exception(first_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr first_;
};

} // namespace poolalloc::detail
