#include "faloha/types.hpp"

#include <cmath>

namespace faloha {

int Termination::decoded_threshold(int u) const {
    if (kind == TerminationKind::FullResolution) return u;
    return static_cast<int>(std::ceil(fraction * u - 1e-12));
}

void ProtocolParams::validate() const {
    if (population < 1) throw invalid_parameter("population must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw invalid_parameter("gamma must lie in (0,1)");
    if (!(q > 0.0 && q <= 1.0)) throw invalid_parameter("q must lie in (0,1]");
    if (d_max < 1) throw invalid_parameter("d_max must be at least 1");
    if (termination.kind == TerminationKind::EarlyFraction &&
        !(termination.fraction > 0.0 && termination.fraction <= 1.0))
        throw invalid_parameter("termination fraction must lie in (0,1]");
}

double StateDistribution::total() const {
    double s = 0.0;
    for (const auto& [state, p] : mass) s += p;
    return s;
}

}  // namespace faloha
