#ifndef FALOHA_BENCHMARKS_HPP
#define FALOHA_BENCHMARKS_HPP

#include <string>
#include <vector>

#include "faloha/types.hpp"

namespace faloha {
namespace benchmarks {

// gamma U (1-gamma)^(U-1): slotted-ALOHA throughput on a collision channel.
double slotted_aloha_throughput(int population, double gamma);

// 1/2 + U/S; infinite when S vanishes.
double slotted_aloha_aoi(int population, double gamma);

// d/2 + U/S from a measured IRSA throughput.
double irsa_aoi(int population, int frame_length, double throughput);

struct ComparisonRow {
    std::string protocol;
    double gamma_u = 0.0;
    double best_throughput = 0.0;
    int best_throughput_d = 0;   // optimizing d_max (frameless) or frame length
    double best_throughput_q = 0.0;
    double best_aoi = 0.0;
    int best_aoi_d = 0;
    double best_aoi_q = 0.0;
};

struct OperatingPoint {
    double q = 0.0;
    double throughput = 0.0;
    double aoi = 0.0;
};

// max_q S and min_q aoi at one (gamma, d_max) via grid search: a coarse scan
// around 1/E[contenders], then steps of 5e-4, refined once at 5e-5.
struct OptimizedPoint {
    OperatingPoint best_throughput;
    OperatingPoint best_aoi;
};
OptimizedPoint optimize_q(const ProtocolParams& base, double coarse_step = 5e-4,
                          double fine_step = 5e-5);

struct Table1Config {
    int population = 200;
    std::vector<double> gamma_u_values = {0.4, 0.6, 0.8, 1.0};
    std::vector<int> frameless_dmax_grid;       // per gamma_u reuse; empty -> defaults
    std::vector<int> irsa_frame_grid;           // empty -> defaults
    long long sim_horizon = 2000000;            // IRSA cells are simulated
    int sim_replications = 4;
    std::uint64_t seed = 1;
};

// Slotted cells are closed form, frameless cells analytic with q optimized
// per d_max, IRSA cells simulated with the 0.86x^3+0.14x^8 distribution.
std::vector<ComparisonRow> build_table1(const Table1Config& config);

}  // namespace benchmarks
}  // namespace faloha

#endif
