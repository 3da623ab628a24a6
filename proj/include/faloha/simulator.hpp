#ifndef FALOHA_SIMULATOR_HPP
#define FALOHA_SIMULATOR_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "faloha/types.hpp"

namespace faloha {
namespace sim {

enum class Protocol { Frameless, Irsa, SlottedAloha };

struct SimConfig {
    ProtocolParams params;
    Protocol protocol = Protocol::Frameless;
    long long horizon_slots = 1000000;
    long long warmup_slots = -1;  // negative: 10% of the horizon
    std::uint64_t seed = 1;
    int replications = 1;
    // IRSA
    int frame_length = 100;
    std::vector<std::pair<int, double>> replica_dist = {{3, 0.86}, {8, 0.14}};
    // Recovery-time sampling: windows close at the first CP shorter than this
    int recovery_threshold = 150;
    bool collect_traces = false;

    long long effective_warmup() const {
        return warmup_slots >= 0 ? warmup_slots : horizon_slots / 10;
    }
    void validate() const;
};

struct CpTrace {
    int replication;
    long long cp_index;
    int duration;
    int contenders;
    int decoded;
};

struct SimMetrics {
    double throughput = 0.0;
    double throughput_se = 0.0;
    double aoi_mean = 0.0;
    double aoi_se = 0.0;
    double recovery_mean = 0.0;
    double recovery_se = 0.0;
    long long recovery_samples = 0;
    long long cp_count = 0;
    long long slot_count = 0;
    std::vector<double> per_rep_throughput;
    std::vector<double> per_rep_aoi;
    std::vector<double> per_rep_recovery_mean;  // NaN when a rep saw no window
    std::vector<long long> duration_hist;   // counts, index d-1
    std::vector<long long> contender_hist;  // counts, index u
    std::vector<long long> decoded_hist;    // counts, index m
    // Joint counts for validating the per-CP laws, index [u][d-1] / [u][m]
    std::vector<std::vector<long long>> duration_by_users;
    std::vector<std::vector<long long>> decoded_by_users;
    std::vector<CpTrace> traces;
};

SimMetrics run_frameless(const SimConfig& config);
SimMetrics run_irsa(const SimConfig& config);
SimMetrics run_slotted_aloha(const SimConfig& config);

// Dispatch on config.protocol.
SimMetrics run(const SimConfig& config);

}  // namespace sim
}  // namespace faloha

#endif
