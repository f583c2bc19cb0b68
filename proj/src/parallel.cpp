#include "pff/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace pff {

namespace {

int override_threads = 0;

int env_threads() {
    const char* s = std::getenv("PF_THREADS");
    int n = 1;
    if (s != nullptr) {
        try {
            n = std::stoi(s);
        } catch (const std::exception&) {
            n = 1;
        }
    }
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return std::clamp(n, 1, hw);
}

}  // namespace

int thread_count() { return override_threads > 0 ? override_threads : env_threads(); }

void set_thread_count(int n) { override_threads = std::max(0, n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n / 256 + 1);
    if (t <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t b = 0; b < n; b += chunk) {
        pool.emplace_back(body, b, std::min(n, b + chunk));
    }
    for (auto& th : pool) th.join();
}

void KahanSum::add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        comp_ += (sum_ - t) + x;
    } else {
        comp_ += (x - t) + sum_;
    }
    sum_ = t;
}

}  // namespace pff
