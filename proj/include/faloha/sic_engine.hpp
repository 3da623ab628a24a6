#ifndef FALOHA_SIC_ENGINE_HPP
#define FALOHA_SIC_ENGINE_HPP

#include <vector>

#include "faloha/types.hpp"

namespace faloha {
namespace sic {

// Probability that a collided slot turns into a singleton when one of the
// w unresolved users is resolved, for u contenders with access probability q.
// Defined as 0 when no collided slot can exist (w < 2 or u < 2).
double singleton_conversion_probability(int u, int w, double q);

// Pre-decoding law right after the initial slot: (0,0,0), (1,0,1) or (u,0,0).
StateDistribution init_state(int u, int population);

// Law of the state after resolving exactly one user from `state`
// (requires state.w >= 1 and state.r >= 1).
std::map<SicState, double> resolve_step_law(const SicState& state, int u, double q);

// Peels every state to its no-singleton fixed point.
StateDistribution post_from_pre(const StateDistribution& dist, int u, double q);

// Adds one slot: each state (w,c,0) stays, gains a singleton, or gains a
// collided slot with the binomial-in-w probabilities.
StateDistribution pre_from_post(const StateDistribution& dist, double q);

// Full contention-period law for u contenders under `params`.
CpLaw cp_law(int u, const ProtocolParams& params);

// cp_law for every u in {0..U}, evaluated concurrently.
std::vector<CpLaw> cp_table(const ProtocolParams& params, unsigned threads = 0);

}  // namespace sic
}  // namespace faloha

#endif
