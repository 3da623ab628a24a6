#include "faloha/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include "faloha/mathutil.hpp"

namespace faloha {
namespace sim {

namespace {

// Deterministic per-replication stream; raw draws come from mt19937_64 and
// are mapped to doubles locally so results do not depend on libstdc++
// distribution internals.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }
    int uniform_int(int n) { return static_cast<int>(uniform() * n) % n; }

  private:
    std::mt19937_64 engine_;
};

std::uint64_t stream_seed(std::uint64_t seed, int replication) {
    // Mix the master seed first: a raw seed^rep scheme would give adjacent
    // master seeds identical replication ensembles up to permutation.
    std::uint64_t h = seed;
    std::uint64_t mixed = splitmix64(h) ^ static_cast<std::uint64_t>(replication);
    return splitmix64(mixed);
}

struct RepAccumulator {
    long long decoded_slots = 0;  // decoded packets over counted CPs
    long long counted_slots = 0;
    long long counted_cps = 0;
    double aoi_area = 0.0;
    long long aoi_slots = 0;
    std::vector<double> recovery;
    std::vector<long long> duration_hist, contender_hist, decoded_hist;
    std::vector<std::vector<long long>> duration_by_users, decoded_by_users;
    std::vector<CpTrace> traces;

    RepAccumulator(int dmax, int population) {
        duration_hist.assign(dmax, 0);
        contender_hist.assign(population + 1, 0);
        decoded_hist.assign(population + 1, 0);
        duration_by_users.assign(population + 1, std::vector<long long>(dmax, 0));
        decoded_by_users.assign(
            population + 1, std::vector<long long>(static_cast<std::size_t>(population) + 1, 0));
    }
};

int hist_dmax(const SimConfig& config) {
    return config.protocol == Protocol::Irsa
               ? std::max(config.params.d_max, config.frame_length)
               : config.params.d_max;
}

SimMetrics merge(const SimConfig& config, std::vector<RepAccumulator>& reps) {
    const int dmax = hist_dmax(config);
    const int population = config.params.population;
    SimMetrics m;
    m.duration_hist.assign(dmax, 0);
    m.contender_hist.assign(population + 1, 0);
    m.decoded_hist.assign(population + 1, 0);
    m.duration_by_users.assign(population + 1, std::vector<long long>(dmax, 0));
    m.decoded_by_users.assign(
        population + 1, std::vector<long long>(static_cast<std::size_t>(population) + 1, 0));

    double rec_sum = 0.0;
    for (auto& rep : reps) {
        m.per_rep_throughput.push_back(
            rep.counted_slots ? static_cast<double>(rep.decoded_slots) / rep.counted_slots
                              : 0.0);
        m.per_rep_aoi.push_back(
            rep.aoi_slots ? rep.aoi_area / (static_cast<double>(rep.aoi_slots) * population)
                          : 0.0);
        if (rep.recovery.empty()) {
            m.per_rep_recovery_mean.push_back(std::nan(""));
        } else {
            double s = 0.0;
            for (double v : rep.recovery) s += v;
            m.per_rep_recovery_mean.push_back(s / rep.recovery.size());
            rec_sum += s;
            m.recovery_samples += static_cast<long long>(rep.recovery.size());
        }
        m.cp_count += rep.counted_cps;
        m.slot_count += rep.counted_slots;
        for (int d = 0; d < dmax; ++d) m.duration_hist[d] += rep.duration_hist[d];
        for (int u = 0; u <= population; ++u) {
            m.contender_hist[u] += rep.contender_hist[u];
            m.decoded_hist[u] += rep.decoded_hist[u];
            for (int d = 0; d < dmax; ++d)
                m.duration_by_users[u][d] += rep.duration_by_users[u][d];
            for (int k = 0; k <= population; ++k)
                m.decoded_by_users[u][k] += rep.decoded_by_users[u][k];
        }
        for (auto& t : rep.traces) m.traces.push_back(t);
    }

    auto mean_se = [](const std::vector<double>& xs, double& mean, double& se) {
        std::vector<double> v;
        for (double x : xs)
            if (!std::isnan(x)) v.push_back(x);
        if (v.empty()) {
            mean = se = 0.0;
            return;
        }
        double s = 0.0;
        for (double x : v) s += x;
        mean = s / v.size();
        if (v.size() < 2) {
            se = 0.0;
            return;
        }
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / (v.size() - 1) / v.size());
    };
    mean_se(m.per_rep_throughput, m.throughput, m.throughput_se);
    mean_se(m.per_rep_aoi, m.aoi_mean, m.aoi_se);
    mean_se(m.per_rep_recovery_mean, m.recovery_mean, m.recovery_se);
    return m;
}

// One frameless replication. Activation is sampled per CP with probability
// 1-(1-gamma)^d, which matches per-slot generation with replacement in
// waiting exactly; update timestamps equal the CP start either way.
void frameless_replication(const SimConfig& config, int rep, RepAccumulator& acc) {
    const auto& p = config.params;
    const int population = p.population;
    const int dmax = p.d_max;
    Stream rng(stream_seed(config.seed, rep));

    // Lazy age bookkeeping: a user's AoI at the start of slot `now` is
    // now - reset[i]; only the sum of reset times is needed for the area.
    std::vector<double> reset(population, 0.0);
    double reset_sum = 0.0;
    std::vector<char> active(population, 0), decoded(population, 0);
    std::vector<int> active_users;
    std::vector<std::vector<int>> slot_users(dmax + 1);
    std::vector<int> slot_live(dmax + 1, 0);
    std::vector<std::vector<int>> replicas(population);
    std::vector<int> cascade;

    const long long warmup = config.effective_warmup();
    long long now = 0;  // completed slots
    long long cp_index = 0;
    int prev_duration = 1;
    std::vector<long long> open_windows;

    while (now < config.horizon_slots) {
        const double gamma_d = activation_probability(p.gamma, prev_duration);
        active_users.clear();
        for (int i = 0; i < population; ++i) {
            active[i] = rng.bernoulli(gamma_d) ? 1 : 0;
            decoded[i] = 0;
            if (active[i]) {
                active_users.push_back(i);
                replicas[i].clear();
            }
        }
        const int u = static_cast<int>(active_users.size());
        const int threshold = p.termination.decoded_threshold(u);
        int decoded_count = 0;
        int duration = 0;

        for (int d = 1; d <= dmax; ++d) {
            auto& slot = slot_users[d];
            slot.clear();
            for (int i : active_users) {
                if (decoded[i]) continue;  // canceled on arrival
                if (d == 1 || rng.bernoulli(p.q)) {
                    slot.push_back(i);
                    replicas[i].push_back(d);
                }
            }
            slot_live[d] = static_cast<int>(slot.size());

            if (slot_live[d] == 1) {
                cascade.assign(1, d);
                while (!cascade.empty()) {
                    const int s = cascade.back();
                    cascade.pop_back();
                    if (slot_live[s] != 1) continue;
                    int user = -1;
                    for (int i : slot_users[s])
                        if (!decoded[i]) {
                            user = i;
                            break;
                        }
                    if (user < 0) continue;
                    decoded[user] = 1;
                    ++decoded_count;
                    for (int s2 : replicas[user]) {
                        if (--slot_live[s2] == 1) cascade.push_back(s2);
                    }
                }
            }

            // AoI saw-tooth area over this slot (slope one, trapezoid rule)
            if (now >= warmup) {
                acc.aoi_area += population * (static_cast<double>(now) + 0.5) - reset_sum;
                ++acc.aoi_slots;
            }
            ++now;

            if (decoded_count >= threshold || d == dmax) {
                duration = d;
                break;
            }
        }

        // Delivered updates carry the CP-start timestamp
        const double cp_start = static_cast<double>(now - duration);
        for (int i : active_users)
            if (decoded[i]) {
                reset_sum += cp_start - reset[i];
                reset[i] = cp_start;
            }

        ++cp_index;
        const bool counted = (now - duration) >= warmup;
        if (counted) {
            ++acc.counted_cps;
            acc.counted_slots += duration;
            acc.decoded_slots += decoded_count;
            acc.duration_hist[duration - 1] += 1;
            acc.contender_hist[u] += 1;
            acc.decoded_hist[decoded_count] += 1;
            acc.duration_by_users[u][duration - 1] += 1;
            acc.decoded_by_users[u][decoded_count] += 1;
            if (config.collect_traces)
                acc.traces.push_back({rep, cp_index, duration, u, decoded_count});
            if (duration < config.recovery_threshold) {
                for (long long open : open_windows)
                    acc.recovery.push_back(static_cast<double>(now - open));
                open_windows.clear();
            }
            if (duration == dmax) open_windows.push_back(now);
        }
        prev_duration = duration;
    }
}

void irsa_replication(const SimConfig& config, int rep, RepAccumulator& acc) {
    const auto& p = config.params;
    const int population = p.population;
    const int d = config.frame_length;
    Stream rng(stream_seed(config.seed, rep));

    std::vector<double> cum;
    std::vector<int> degree;
    {
        double c = 0.0;
        for (auto& [deg, prob] : config.replica_dist) {
            c += prob;
            cum.push_back(c);
            degree.push_back(std::min(deg, d));
        }
    }
    auto draw_degree = [&]() {
        const double x = rng.uniform() * cum.back();
        for (std::size_t i = 0; i < cum.size(); ++i)
            if (x <= cum[i]) return degree[i];
        return degree.back();
    };

    const double gamma_d = activation_probability(p.gamma, d);
    std::vector<double> age(population, 0.0);
    std::vector<char> decoded(population, 0);
    std::vector<std::vector<int>> slot_users(d + 1);
    std::vector<int> slot_live(d + 1, 0);
    std::vector<std::vector<int>> replicas(population);
    std::vector<int> slots_pool(d);
    std::vector<int> active_users, cascade;

    const long long warmup = config.effective_warmup();
    long long now = 0;
    long long frame_index = 0;

    while (now < config.horizon_slots) {
        active_users.clear();
        for (int s = 1; s <= d; ++s) {
            slot_users[s].clear();
            slot_live[s] = 0;
        }
        for (int i = 0; i < population; ++i) {
            decoded[i] = 0;
            if (!rng.bernoulli(gamma_d)) continue;
            active_users.push_back(i);
            replicas[i].clear();
            const int k = draw_degree();
            // partial Fisher-Yates over slot indices
            for (int s = 0; s < d; ++s) slots_pool[s] = s + 1;
            for (int t = 0; t < k; ++t) {
                const int pick = t + rng.uniform_int(d - t);
                std::swap(slots_pool[t], slots_pool[pick]);
                const int s = slots_pool[t];
                replicas[i].push_back(s);
                slot_users[s].push_back(i);
            }
        }
        const int u = static_cast<int>(active_users.size());
        for (int s = 1; s <= d; ++s) slot_live[s] = static_cast<int>(slot_users[s].size());

        // SIC at frame end
        int decoded_count = 0;
        cascade.clear();
        for (int s = 1; s <= d; ++s)
            if (slot_live[s] == 1) cascade.push_back(s);
        while (!cascade.empty()) {
            const int s = cascade.back();
            cascade.pop_back();
            if (slot_live[s] != 1) continue;
            int user = -1;
            for (int i : slot_users[s])
                if (!decoded[i]) {
                    user = i;
                    break;
                }
            if (user < 0) continue;
            decoded[user] = 1;
            ++decoded_count;
            for (int s2 : replicas[user])
                if (--slot_live[s2] == 1) cascade.push_back(s2);
        }

        if (now >= warmup) {
            // ages advance linearly across the frame
            double area = 0.0;
            for (int i = 0; i < population; ++i) area += age[i] * d;
            area += population * (d * static_cast<double>(d)) / 2.0;
            acc.aoi_area += area;
            acc.aoi_slots += d;
        }
        for (int i = 0; i < population; ++i) age[i] += d;
        now += d;
        for (int i : active_users)
            if (decoded[i]) age[i] = d;  // timestamped at the frame start

        ++frame_index;
        if (now - d >= warmup) {
            ++acc.counted_cps;
            acc.counted_slots += d;
            acc.decoded_slots += decoded_count;
            acc.duration_hist[d - 1] += 1;
            acc.contender_hist[u] += 1;
            acc.decoded_hist[decoded_count] += 1;
            if (config.collect_traces)
                acc.traces.push_back({rep, frame_index, d, u, decoded_count});
        }
    }
}

void slotted_replication(const SimConfig& config, int rep, RepAccumulator& acc) {
    const auto& p = config.params;
    const int population = p.population;
    Stream rng(stream_seed(config.seed, rep));

    // AoI at the start of slot `now` is now - reset[i]; an update generated
    // at the start of slot T and delivered at its end resets to 1, i.e.
    // reset[i] = T.
    std::vector<double> reset(population, 0.0);
    double reset_sum = 0.0;
    const long long warmup = config.effective_warmup();
    const auto pmf = binomial_pmf_table(population, p.gamma);

    auto draw_transmitters = [&]() {
        double x = rng.uniform();
        for (int k = 0; k <= population; ++k) {
            x -= pmf[k];
            if (x <= 0.0) return k;
        }
        return population;
    };

    for (long long now = 0; now < config.horizon_slots; ++now) {
        const int k = draw_transmitters();
        if (now >= warmup) {
            acc.aoi_area += population * (static_cast<double>(now) + 0.5) - reset_sum;
            ++acc.aoi_slots;
            ++acc.counted_cps;
            ++acc.counted_slots;
            acc.contender_hist[k] += 1;
            acc.duration_hist[0] += 1;
        }
        if (k == 1) {
            const int user = rng.uniform_int(population);
            reset_sum += static_cast<double>(now) - reset[user];
            reset[user] = static_cast<double>(now);
            if (now >= warmup) {
                acc.decoded_slots += 1;
                acc.decoded_hist[1] += 1;
            }
        } else if (now >= warmup) {
            acc.decoded_hist[0] += 1;
        }
    }
}

}  // namespace

void SimConfig::validate() const {
    params.validate();
    if (horizon_slots <= 0) throw invalid_parameter("horizon must be positive");
    if (effective_warmup() >= horizon_slots)
        throw invalid_parameter("warmup must be shorter than the horizon");
    if (replications < 1) throw invalid_parameter("replications must be positive");
    if (protocol == Protocol::Irsa) {
        if (frame_length < 1) throw invalid_parameter("frame length must be positive");
        double total = 0.0;
        for (auto& [deg, prob] : replica_dist) {
            if (deg < 1 || prob < 0.0) throw invalid_parameter("malformed replica distribution");
            total += prob;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw invalid_parameter("replica distribution must sum to 1");
    }
}

SimMetrics run_frameless(const SimConfig& config) {
    config.validate();
    std::vector<RepAccumulator> reps(
        config.replications, RepAccumulator(hist_dmax(config), config.params.population));
    parallel_for(reps.size(),
                 [&](std::size_t r) { frameless_replication(config, static_cast<int>(r), reps[r]); });
    return merge(config, reps);
}

SimMetrics run_irsa(const SimConfig& config) {
    config.validate();
    std::vector<RepAccumulator> reps(
        config.replications, RepAccumulator(hist_dmax(config), config.params.population));
    parallel_for(reps.size(),
                 [&](std::size_t r) { irsa_replication(config, static_cast<int>(r), reps[r]); });
    return merge(config, reps);
}

SimMetrics run_slotted_aloha(const SimConfig& config) {
    config.validate();
    std::vector<RepAccumulator> reps(
        config.replications, RepAccumulator(hist_dmax(config), config.params.population));
    parallel_for(reps.size(),
                 [&](std::size_t r) { slotted_replication(config, static_cast<int>(r), reps[r]); });
    return merge(config, reps);
}

SimMetrics run(const SimConfig& config) {
    switch (config.protocol) {
        case Protocol::Frameless: return run_frameless(config);
        case Protocol::Irsa: return run_irsa(config);
        case Protocol::SlottedAloha: return run_slotted_aloha(config);
    }
    throw invalid_parameter("unknown protocol");
}

}  // namespace sim
}  // namespace faloha
