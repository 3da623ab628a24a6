#ifndef FALOHA_DYNAMICS_HPP
#define FALOHA_DYNAMICS_HPP

#include <vector>

#include "faloha/types.hpp"

namespace faloha {
namespace dynamics {

// P{U = u | previous CP lasted d slots}: Binomial(population, 1-(1-gamma)^d).
std::vector<double> users_given_duration(int population, double gamma, int d);

// Contention-duration chain over {1..d_max} built from a full cp_table.
ChainModel build_duration_chain(const ProtocolParams& params,
                                const std::vector<CpLaw>& table);

// Contending-users chain over {0..population}.
ChainModel build_user_chain(const ProtocolParams& params,
                            const std::vector<CpLaw>& table);

// Unique stationary distribution. Solves the balance equations by dense LU
// (one equation replaced by normalization); falls back to power iteration
// for state spaces above 512. Throws structural_error when the chain has
// several closed classes (no unique stationary law).
std::vector<double> stationary(const ChainModel& chain);

// Stationary decoded-users PMF over {0..population} (pi_M).
std::vector<double> decoded_stationary(const std::vector<CpLaw>& table,
                                       const std::vector<double>& pi_user);

// Average decoded packets per slot in stationarity.
double throughput(const ProtocolParams& params, const std::vector<CpLaw>& table);

// Expected contender change per CP with equilibrium classification.
DriftProfile drift_profile(const ProtocolParams& params,
                           const std::vector<CpLaw>& table);

// Expected number of slots, starting right after a CP of maximum duration,
// until the end of the first CP shorter than `threshold` slots.
double recovery_time(const ProtocolParams& params, const std::vector<CpLaw>& table,
                     int threshold);

// Convenience wrappers that build the cp_table internally.
double throughput(const ProtocolParams& params);
DriftProfile drift_profile(const ProtocolParams& params);
double recovery_time(const ProtocolParams& params, int threshold);

}  // namespace dynamics
}  // namespace faloha

#endif
