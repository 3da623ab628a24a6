#ifndef FALOHA_TESTS_ORACLE_HPP
#define FALOHA_TESTS_ORACLE_HPP

#include <map>
#include <vector>

#include "faloha/types.hpp"

// Brute-force reference implementations used by the tests. These enumerate
// transmission patterns and apply the collision-channel/SIC semantics
// directly, independently of the analytic state recursion.
namespace faloha::testing {

struct OracleCpResult {
    std::vector<double> duration_pmf;              // index d-1
    std::vector<double> decoded_pmf;               // index m
    std::vector<double> decoded_mean_by_duration;  // index d-1
    std::vector<double> beta;                      // index m; empty if no residual
    // Unnormalized joint laws P{state at slot d, contention still open},
    // index d-1. Post laws include the slot's terminal states.
    std::vector<std::map<SicState, double>> pre_law;
    std::vector<std::map<SicState, double>> post_law;
};

// Enumerates every replica placement of u users over d_max slots (first slot
// always used) and peels each one exactly.
OracleCpResult oracle_cp_law(int u, const ProtocolParams& params);

// Enumerates collided-slot compositions and singleton ownership consistent
// with `state`, resolves one user, and tallies the resulting state law.
std::map<SicState, double> oracle_resolve_step(const SicState& state, int u, double q);

double total_variation(const std::map<SicState, double>& a,
                       const std::map<SicState, double>& b);

double total_variation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace faloha::testing

#endif
