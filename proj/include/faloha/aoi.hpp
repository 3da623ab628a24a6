#ifndef FALOHA_AOI_HPP
#define FALOHA_AOI_HPP

#include <vector>

#include "faloha/types.hpp"

namespace faloha {
namespace aoi {

// P{tagged user delivers an update | u contenders, CP lasted d slots}.
// For d < d_max every contender is decoded, giving u/U; at d_max the decoded
// count is mixed over beta(m,u). `from_beta` reports whether the beta branch
// was usable (it is vacuous when the CP cannot end at d_max unresolved).
double success_probability(int u, int d, const ProtocolParams& params,
                           const CpLaw& law, bool* from_beta = nullptr);

// Ancillary chain over (d, s): CP duration plus a delivered-update flag for
// the tagged user. States are indexed s * d_max + (d - 1).
ChainModel build_ancillary_chain(const ProtocolParams& params,
                                 const std::vector<CpLaw>& table);

// P_X over {1..d_max}: stationary CP duration conditioned on delivery.
std::vector<double> system_time_pmf(const ChainModel& ancillary);

// E[Y | Z=(d,0)]: expected slots until the next delivery, counting the
// current failed CP.
std::vector<double> conditional_mean_y(const ChainModel& ancillary);

// E[Y^2 | Z=(d,0)] given the first moments.
std::vector<double> conditional_mean_y2(const ChainModel& ancillary,
                                        const std::vector<double>& mean_y_fail);

// Full average-AoI pipeline for the tagged user.
AoiReport average_aoi(const ProtocolParams& params, const std::vector<CpLaw>& table);
AoiReport average_aoi(const ProtocolParams& params);

}  // namespace aoi
}  // namespace faloha

#endif
