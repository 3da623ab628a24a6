#ifndef FALOHA_TYPES_HPP
#define FALOHA_TYPES_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace faloha {

// Decoder state of one contention period: w unresolved users, c collided
// slots (the initial slot is not counted in c), r singleton slots.
struct SicState {
    int w = 0;
    int c = 0;
    int r = 0;

    friend bool operator==(const SicState&, const SicState&) = default;
    friend auto operator<=>(const SicState&, const SicState&) = default;
};

enum class TerminationKind { FullResolution, EarlyFraction };

struct Termination {
    TerminationKind kind = TerminationKind::FullResolution;
    double fraction = 1.0;  // decoded-user fraction threshold, used by EarlyFraction

    static Termination full() { return {TerminationKind::FullResolution, 1.0}; }
    static Termination early(double f) { return {TerminationKind::EarlyFraction, f}; }

    // Contention ends once at least this many of the u contenders are decoded.
    int decoded_threshold(int u) const;
};

struct ProtocolParams {
    int population = 0;     // U, total users
    double gamma = 0.0;     // per-user per-slot generation probability
    double q = 0.0;         // per-slot access probability after the first slot
    int d_max = 1;          // maximum contention period duration, slots
    Termination termination = Termination::full();

    void validate() const;
};

enum class Phase { PreDecoding, PostDecoding };

// Sparse law over decoder states at one slot. Mass of the absorbing state
// (all contenders decoded) is moved out of `mass` by the contention-period
// recursion and accounted in CpLaw; `pruned` tracks mass dropped below the
// sparsity threshold.
struct StateDistribution {
    int slot = 1;
    Phase phase = Phase::PreDecoding;
    std::map<SicState, double> mass;
    double pruned = 0.0;

    double total() const;
};

// Exact per-contention statistics for u active users: duration law, decoded
// count law, the decoded-count law conditioned on hitting d_max unresolved,
// and the joint bookkeeping needed for the update-success probability.
struct CpLaw {
    int active_users = 0;                    // u
    int d_max = 1;
    std::vector<double> duration_pmf;        // index d-1, d in {1..d_max}
    std::vector<double> decoded_pmf;         // index m, m in {0..u}
    std::vector<double> beta;                // index m; empty when the d_max-unresolved event has zero mass
    // E[M ; D=d] = sum_m m P{M=m, D=d | u}, index d-1. Divided by the
    // population this gives P{tagged user delivers, D=d | u}.
    std::vector<double> decoded_mean_by_duration;
    double pruned_mass = 0.0;

    bool beta_defined() const { return !beta.empty(); }
};

enum class ChainLabel { D, U, Z };

// Finite ergodic chain: row-stochastic matrix with its stationary law.
// `state_values` holds the external value of each index (duration in slots,
// contender count, or encoded (d,s) pair for the ancillary chain).
struct ChainModel {
    ChainLabel label = ChainLabel::D;
    std::vector<int> state_values;
    std::vector<double> matrix;   // row-major, n x n
    std::vector<double> pi;

    std::size_t size() const { return state_values.size(); }
    double p(std::size_t i, std::size_t j) const { return matrix[i * size() + j]; }
};

enum class EquilibriumKind { Stable, Unstable };

struct Equilibrium {
    double location = 0.0;        // interpolated real crossing of the drift
    int bracket_lo = 0;           // integer grid points bracketing the crossing
    int bracket_hi = 0;
    EquilibriumKind kind = EquilibriumKind::Stable;
};

struct DriftProfile {
    std::vector<double> drift;    // Xi(u), index u in {0..U}
    std::vector<Equilibrium> equilibria;
};

struct AoiReport {
    double aoi_mean = 0.0;        // average AoI, slots
    double mean_y = 0.0;          // E[Y]
    double mean_y2 = 0.0;         // E[Y^2]
    double mean_xy = 0.0;         // E[XY]
    std::vector<double> system_time_pmf;      // P_X over {1..d_max}, index x-1
    std::vector<double> mean_y_given_fail;    // E[Y | Z=(d,0)], index d-1
    std::vector<double> mean_y2_given_fail;   // E[Y^2 | Z=(d,0)], index d-1
};

struct invalid_parameter : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct structural_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace faloha

#endif
