#include <cmath>
#include <doctest.h>

#include "faloha/aoi.hpp"
#include "faloha/benchmarks.hpp"
#include "faloha/dynamics.hpp"
#include "faloha/sic_engine.hpp"
#include "faloha/simulator.hpp"

using namespace faloha;

namespace {

sim::SimConfig base_config() {
    sim::SimConfig c;
    c.params.population = 5;
    c.params.gamma = 0.08;
    c.params.q = 0.4;
    c.params.d_max = 8;
    c.horizon_slots = 200000;
    c.seed = 42;
    c.replications = 4;
    return c;
}

}  // namespace

TEST_CASE("identical seeds reproduce identical metrics") {
    auto c = base_config();
    c.collect_traces = true;
    c.horizon_slots = 20000;
    auto a = sim::run_frameless(c);
    auto b = sim::run_frameless(c);
    CHECK(a.throughput == b.throughput);
    CHECK(a.aoi_mean == b.aoi_mean);
    CHECK(a.duration_hist == b.duration_hist);
    CHECK(a.decoded_hist == b.decoded_hist);
    REQUIRE(a.traces.size() == b.traces.size());
    CHECK(a.traces.size() > 0);
    c.seed = 43;
    auto d = sim::run_frameless(c);
    CHECK(a.throughput != d.throughput);
}

TEST_CASE("single-user frameless matches the closed forms") {
    sim::SimConfig c;
    c.params.population = 1;
    c.params.gamma = 0.3;
    c.params.q = 0.6;
    c.params.d_max = 5;
    c.horizon_slots = 400000;
    c.replications = 4;
    c.seed = 7;
    auto m = sim::run_frameless(c);
    // every CP lasts one slot; throughput = gamma
    CHECK(m.duration_hist[0] == m.cp_count);
    CHECK(m.throughput == doctest::Approx(0.3).epsilon(0.01));
    const double expected_aoi = 1.0 + (2.0 - 0.3) / (2.0 * 0.3);
    CHECK(m.aoi_mean == doctest::Approx(expected_aoi).epsilon(0.01));
}

TEST_CASE("frameless per-CP laws match the analysis within sampling error") {
    auto c = base_config();
    c.horizon_slots = 600000;
    c.replications = 2;
    auto m = sim::run_frameless(c);
    auto table = sic::cp_table(c.params);

    for (int u = 0; u <= c.params.population; ++u) {
        long long n_u = 0;
        for (long long v : m.duration_by_users[u]) n_u += v;
        if (n_u < 2000) continue;
        for (int d = 0; d < c.params.d_max; ++d) {
            const double expected = table[u].duration_pmf[d];
            const double got = static_cast<double>(m.duration_by_users[u][d]) / n_u;
            const double se =
                std::sqrt(std::max(expected * (1 - expected), 1e-12) / n_u);
            CHECK(std::abs(got - expected) < 4.0 * se + 1e-3);
        }
        for (int k = 0; k <= u; ++k) {
            const double expected = table[u].decoded_pmf[k];
            const double got = static_cast<double>(m.decoded_by_users[u][k]) / n_u;
            const double se =
                std::sqrt(std::max(expected * (1 - expected), 1e-12) / n_u);
            CHECK(std::abs(got - expected) < 4.0 * se + 1e-3);
        }
    }
}

TEST_CASE("frameless contenders never decode twice and respect the first-slot rule") {
    auto c = base_config();
    c.collect_traces = true;
    c.horizon_slots = 30000;
    c.replications = 1;
    auto m = sim::run_frameless(c);
    for (const auto& t : m.traces) {
        CHECK(t.decoded <= t.contenders);
        CHECK(t.duration >= 1);
        CHECK(t.duration <= c.params.d_max);
        if (t.contenders == 0) CHECK(t.duration == 1);
        // full termination here: a CP ends early only when all are decoded
        if (t.duration < c.params.d_max) CHECK(t.decoded == t.contenders);
    }
}

TEST_CASE("early termination stops at the decoded fraction") {
    auto c = base_config();
    c.params.termination = Termination::early(0.5);
    c.collect_traces = true;
    c.horizon_slots = 30000;
    c.replications = 1;
    auto m = sim::run_frameless(c);
    bool saw_partial = false;
    for (const auto& t : m.traces) {
        if (t.duration < c.params.d_max && t.contenders > 0) {
            CHECK(2 * t.decoded >= t.contenders);
            if (t.decoded < t.contenders) saw_partial = true;
        }
    }
    CHECK(saw_partial);
}

TEST_CASE("frameless analytic cross-validation of throughput and AoI") {
    sim::SimConfig c;
    c.params.population = 10;
    c.params.gamma = 0.02;
    c.params.q = 0.35;
    c.params.d_max = 12;
    c.horizon_slots = 400000;
    c.replications = 6;
    c.seed = 11;
    auto m = sim::run_frameless(c);
    auto table = sic::cp_table(c.params);
    const double s = dynamics::throughput(c.params, table);
    const double aoi = aoi::average_aoi(c.params, table).aoi_mean;
    CHECK(std::abs(m.throughput - s) < 3.0 * m.throughput_se + 0.003);
    CHECK(std::abs(m.aoi_mean - aoi) < 3.0 * m.aoi_se + 0.02 * aoi);
}

TEST_CASE("slotted ALOHA matches its closed forms") {
    sim::SimConfig c;
    c.params.population = 50;
    c.params.gamma = 0.02;  // gamma U = 1
    c.params.q = 0.5;
    c.params.d_max = 1;
    c.protocol = sim::Protocol::SlottedAloha;
    c.horizon_slots = 300000;
    c.replications = 4;
    c.seed = 3;
    auto m = sim::run_slotted_aloha(c);
    const double s_expected = benchmarks::slotted_aloha_throughput(50, 0.02);
    const double aoi_expected = benchmarks::slotted_aloha_aoi(50, 0.02);
    CHECK(std::abs(m.throughput - s_expected) < 3.0 * m.throughput_se + 0.002);
    CHECK(std::abs(m.aoi_mean - aoi_expected) < 3.0 * m.aoi_se + 0.01 * aoi_expected);
}

TEST_CASE("degenerate single-user slotted ALOHA") {
    sim::SimConfig c;
    c.params.population = 1;
    c.params.gamma = 0.999;
    c.params.q = 0.5;
    c.params.d_max = 1;
    c.protocol = sim::Protocol::SlottedAloha;
    c.horizon_slots = 50000;
    c.replications = 2;
    auto m = sim::run_slotted_aloha(c);
    CHECK(m.throughput == doctest::Approx(0.999).epsilon(0.01));
    CHECK(m.aoi_mean == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("IRSA with degree-1 single user decodes every active frame") {
    sim::SimConfig c;
    c.params.population = 1;
    c.params.gamma = 0.05;
    c.params.q = 0.5;
    c.params.d_max = 10;
    c.protocol = sim::Protocol::Irsa;
    c.frame_length = 10;
    c.replica_dist = {{1, 1.0}};
    c.horizon_slots = 300000;
    c.replications = 4;
    auto m = sim::run_irsa(c);
    const double gamma_d = 1.0 - std::pow(1.0 - 0.05, 10);
    CHECK(m.throughput == doctest::Approx(gamma_d / 10.0).epsilon(0.02));
    // every decoded frame resets the age to the frame length
    long long active_frames = 0, decoded_frames = 0;
    for (std::size_t u = 1; u < m.contender_hist.size(); ++u)
        active_frames += m.contender_hist[u];
    for (std::size_t k = 1; k < m.decoded_hist.size(); ++k)
        decoded_frames += m.decoded_hist[k];
    CHECK(active_frames == decoded_frames);
}

TEST_CASE("IRSA AoI follows the frame-start timestamp identity") {
    sim::SimConfig c;
    c.params.population = 20;
    c.params.gamma = 0.004;
    c.params.q = 0.5;
    c.params.d_max = 20;
    c.protocol = sim::Protocol::Irsa;
    c.frame_length = 20;
    c.horizon_slots = 500000;
    c.replications = 4;
    c.seed = 17;
    auto m = sim::run_irsa(c);
    const double eq49 = benchmarks::irsa_aoi(20, 20, m.throughput);
    CHECK(std::abs(m.aoi_mean - eq49) < 3.0 * m.aoi_se + 0.01 * eq49);
}

TEST_CASE("recovery-time windows close at the first short CP") {
    auto c = base_config();
    c.params.population = 6;
    c.params.gamma = 0.2;
    c.params.q = 0.05;  // sluggish decoding: many max-length CPs
    c.params.d_max = 6;
    c.recovery_threshold = 3;
    c.horizon_slots = 60000;
    c.replications = 2;
    auto m = sim::run_frameless(c);
    CHECK(m.recovery_samples > 0);
    CHECK(m.recovery_mean >= 1.0);
}
