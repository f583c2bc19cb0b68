#pragma once

#include <cstddef>
#include <functional>

namespace pff {

/// Worker count from PF_THREADS (default 1, capped by hardware threads).
int thread_count();
void set_thread_count(int n);  // 0 restores the environment default

/// Calls body(begin, end) on contiguous chunks of [0, n). Bodies must only write
/// to slots they own; callers combine results serially afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Neumaier-compensated sum.
class KahanSum {
public:
    void add(double x);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace pff
