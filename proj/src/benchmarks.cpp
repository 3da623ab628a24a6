#include "faloha/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "faloha/aoi.hpp"
#include "faloha/dynamics.hpp"
#include "faloha/mathutil.hpp"
#include "faloha/sic_engine.hpp"
#include "faloha/simulator.hpp"

namespace faloha {
namespace benchmarks {

double slotted_aloha_throughput(int population, double gamma) {
    return gamma * population * std::pow(1.0 - gamma, population - 1);
}

double slotted_aloha_aoi(int population, double gamma) {
    const double s = slotted_aloha_throughput(population, gamma);
    if (s <= 0.0) return std::numeric_limits<double>::infinity();
    return 0.5 + population / s;
}

double irsa_aoi(int population, int frame_length, double throughput) {
    if (throughput <= 0.0) return std::numeric_limits<double>::infinity();
    return frame_length / 2.0 + population / throughput;
}

namespace {

struct Evaluation {
    double throughput = 0.0;
    double aoi = 0.0;
};

Evaluation evaluate(const ProtocolParams& params) {
    const auto table = sic::cp_table(params);
    Evaluation e;
    e.throughput = dynamics::throughput(params, table);
    e.aoi = aoi::average_aoi(params, table).aoi_mean;
    return e;
}

}  // namespace

OptimizedPoint optimize_q(const ProtocolParams& base, double coarse_step,
                          double fine_step) {
    std::map<long long, Evaluation> cache;  // keyed by round(q / fine_step)
    auto eval_at = [&](double q) -> const Evaluation& {
        const auto key = static_cast<long long>(std::llround(q / fine_step));
        auto it = cache.find(key);
        if (it == cache.end()) {
            ProtocolParams p = base;
            p.q = key * fine_step;
            it = cache.emplace(key, evaluate(p)).first;
        }
        return it->second;
    };
    auto snap = [&](double q, double step) {
        return std::max(step, std::round(q / step) * step);
    };

    // Geometric bracket around 1/E[contenders], then two local grid passes.
    const double mean_contenders =
        base.population * activation_probability(base.gamma, base.d_max);
    const double q_center = 1.0 / std::max(1.0, mean_contenders);
    double best_q = 0.0;
    double best_s = -1.0;
    for (double factor = 0.4; factor < 8.0; factor *= 1.4) {
        const double q = snap(std::min(0.9, q_center * factor), coarse_step);
        const auto& e = eval_at(q);
        if (e.throughput > best_s) {
            best_s = e.throughput;
            best_q = q;
        }
    }
    for (double step : {coarse_step, fine_step}) {
        best_q = snap(best_q, step);
        best_s = eval_at(best_q).throughput;
        for (int dir : {+1, -1}) {
            for (;;) {
                const double q = best_q + dir * step;
                if (q <= 0.0 || q > 1.0) break;
                const auto& e = eval_at(q);
                if (e.throughput <= best_s) break;
                best_s = e.throughput;
                best_q = q;
            }
        }
    }

    OptimizedPoint out;
    out.best_throughput = {0.0, -1.0, 0.0};
    out.best_aoi = {0.0, 0.0, std::numeric_limits<double>::infinity()};
    for (const auto& [key, e] : cache) {
        const double q = key * fine_step;
        if (e.throughput > out.best_throughput.throughput)
            out.best_throughput = {q, e.throughput, e.aoi};
        if (e.aoi < out.best_aoi.aoi) out.best_aoi = {q, e.throughput, e.aoi};
    }
    return out;
}

std::vector<ComparisonRow> build_table1(const Table1Config& config) {
    std::vector<ComparisonRow> rows;
    auto frameless_grid = [&](double gamma_u) -> std::vector<int> {
        if (!config.frameless_dmax_grid.empty()) return config.frameless_dmax_grid;
        if (gamma_u <= 0.4) return {30};
        if (gamma_u <= 0.6) return {45, 60};
        if (gamma_u <= 0.8) return {70, 100};
        return {110, 130};
    };
    auto irsa_grid = [&](double gamma_u) -> std::vector<int> {
        if (!config.irsa_frame_grid.empty()) return config.irsa_frame_grid;
        if (gamma_u <= 0.4) return {31, 35};
        if (gamma_u <= 0.6) return {56, 65};
        if (gamma_u <= 0.8) return {103, 113};
        return {151, 160};
    };

    for (double gamma_u : config.gamma_u_values) {
        const double gamma = gamma_u / config.population;

        ComparisonRow slotted;
        slotted.protocol = "slotted_aloha";
        slotted.gamma_u = gamma_u;
        slotted.best_throughput = slotted_aloha_throughput(config.population, gamma);
        slotted.best_aoi = slotted_aloha_aoi(config.population, gamma);
        slotted.best_throughput_d = slotted.best_aoi_d = 1;
        rows.push_back(slotted);

        ComparisonRow irsa;
        irsa.protocol = "irsa";
        irsa.gamma_u = gamma_u;
        irsa.best_throughput = -1.0;
        irsa.best_aoi = std::numeric_limits<double>::infinity();
        for (int d : irsa_grid(gamma_u)) {
            sim::SimConfig sc;
            sc.params.population = config.population;
            sc.params.gamma = gamma;
            sc.params.q = 0.5;  // unused by IRSA
            sc.params.d_max = d;
            sc.protocol = sim::Protocol::Irsa;
            sc.frame_length = d;
            sc.horizon_slots = config.sim_horizon;
            sc.replications = config.sim_replications;
            sc.seed = config.seed;
            const auto metrics = sim::run_irsa(sc);
            if (metrics.throughput > irsa.best_throughput) {
                irsa.best_throughput = metrics.throughput;
                irsa.best_throughput_d = d;
            }
            const double aoi = irsa_aoi(config.population, d, metrics.throughput);
            if (aoi < irsa.best_aoi) {
                irsa.best_aoi = aoi;
                irsa.best_aoi_d = d;
            }
        }
        rows.push_back(irsa);

        ComparisonRow frameless;
        frameless.protocol = "frameless_aloha";
        frameless.gamma_u = gamma_u;
        frameless.best_throughput = -1.0;
        frameless.best_aoi = std::numeric_limits<double>::infinity();
        for (int dmax : frameless_grid(gamma_u)) {
            ProtocolParams p;
            p.population = config.population;
            p.gamma = gamma;
            p.q = 0.05;
            p.d_max = dmax;
            const auto opt = optimize_q(p);
            if (opt.best_throughput.throughput > frameless.best_throughput) {
                frameless.best_throughput = opt.best_throughput.throughput;
                frameless.best_throughput_d = dmax;
                frameless.best_throughput_q = opt.best_throughput.q;
            }
            if (opt.best_aoi.aoi < frameless.best_aoi) {
                frameless.best_aoi = opt.best_aoi.aoi;
                frameless.best_aoi_d = dmax;
                frameless.best_aoi_q = opt.best_aoi.q;
            }
        }
        rows.push_back(frameless);
    }
    return rows;
}

}  // namespace benchmarks
}  // namespace faloha
