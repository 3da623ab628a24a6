#include "faloha/mathutil.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace faloha {

namespace {

// lgamma(n+1) cache; grows on demand, guarded for concurrent first use
std::vector<double>& log_factorial_table() {
    static std::vector<double> table = {0.0, 0.0};
    return table;
}
std::mutex table_mutex;

double log_factorial(int n) {
    auto& table = log_factorial_table();
    if (static_cast<std::size_t>(n) >= table.size()) {
        std::lock_guard lock(table_mutex);
        while (table.size() <= static_cast<std::size_t>(n))
            table.push_back(table.back() + std::log(static_cast<double>(table.size())));
    }
    return table[static_cast<std::size_t>(n)];
}

}  // namespace

double log_binomial(int n, int k) {
    if (k < 0 || k > n || n < 0) return -std::numeric_limits<double>::infinity();
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double binomial_pmf(int n, int k, double q) {
    if (k < 0 || k > n) return 0.0;
    if (q <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (q >= 1.0) return k == n ? 1.0 : 0.0;
    const double lp = log_binomial(n, k) + k * std::log(q) + (n - k) * std::log1p(-q);
    return std::exp(lp);
}

std::vector<double> binomial_pmf_table(int n, double q) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) pmf[static_cast<std::size_t>(k)] = binomial_pmf(n, k, q);
    return pmf;
}

double activation_probability(double gamma, int d) {
    return -std::expm1(d * std::log1p(-gamma));
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads) {
    if (n == 0) return;
    unsigned workers = threads ? threads : std::thread::hardware_concurrency();
    if (workers < 1) workers = 1;
    if (workers > n) workers = static_cast<unsigned>(n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace faloha
