#ifndef FALOHA_MATHUTIL_HPP
#define FALOHA_MATHUTIL_HPP

#include <cstdint>
#include <functional>
#include <vector>

namespace faloha {

// log C(n, k); returns -inf for k outside {0..n}
double log_binomial(int n, int k);

// C(n, k) q^k (1-q)^(n-k), evaluated in the log domain for large n
double binomial_pmf(int n, int k, double q);

// Full Binomial(n, q) PMF, indices 0..n
std::vector<double> binomial_pmf_table(int n, double q);

// 1 - (1-gamma)^d, the per-user activation probability after d slots
double activation_probability(double gamma, int d);

// SplitMix64 step, used to derive independent simulation streams
std::uint64_t splitmix64(std::uint64_t& state);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
// Tasks must write to disjoint locations.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

}  // namespace faloha

#endif
