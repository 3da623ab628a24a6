#include <cmath>
#include <doctest.h>

#include "faloha/mathutil.hpp"
#include "faloha/sic_engine.hpp"
#include "oracle.hpp"

using namespace faloha;
using namespace faloha::testing;

namespace {

ProtocolParams make_params(int population, double q, int d_max,
                           Termination term = Termination::full()) {
    ProtocolParams p;
    p.population = population;
    p.gamma = 0.01;
    p.q = q;
    p.d_max = d_max;
    p.termination = term;
    return p;
}

// h_w for binomial slot degrees collapses to a closed form; used here as an
// independent route against the term-by-term evaluation.
double h_closed_form(int w, double q) {
    const double num = (w - 1) * q * q * std::pow(1.0 - q, w - 2);
    const double den =
        1.0 - std::pow(1.0 - q, w) - w * q * std::pow(1.0 - q, w - 1);
    return num / den;
}

}  // namespace

TEST_CASE("init_state matches the three initialization cases") {
    auto d0 = sic::init_state(0, 10);
    CHECK(d0.mass.at({0, 0, 0}) == doctest::Approx(1.0));
    auto d1 = sic::init_state(1, 10);
    CHECK(d1.mass.at({1, 0, 1}) == doctest::Approx(1.0));
    auto d5 = sic::init_state(5, 10);
    CHECK(d5.mass.at({5, 0, 0}) == doctest::Approx(1.0));
    CHECK(d5.mass.size() == 1);
    CHECK_THROWS_AS(sic::init_state(11, 10), invalid_parameter);
    CHECK_THROWS_AS(sic::init_state(-1, 10), invalid_parameter);
}

TEST_CASE("singleton conversion probability agrees with its closed form") {
    for (int u : {2, 3, 5, 17, 60, 200}) {
        for (int w = 2; w <= u; w += (u > 20 ? 13 : 1)) {
            for (double q : {0.01, 0.03515, 0.2, 0.5, 0.9}) {
                const double got = sic::singleton_conversion_probability(u, w, q);
                const double want = h_closed_form(w, q);
                CHECK(got == doctest::Approx(want).epsilon(1e-10));
            }
        }
    }
    CHECK(sic::singleton_conversion_probability(5, 2, 0.5) == doctest::Approx(1.0));
    CHECK(sic::singleton_conversion_probability(5, 1, 0.5) == 0.0);
}

TEST_CASE("resolve_step_law handles the forced cases") {
    SUBCASE("last user, no collided slots") {
        auto law = sic::resolve_step_law({1, 0, 1}, 3, 0.4);
        REQUIRE(law.size() == 1);
        CHECK(law.at({0, 0, 0}) == doctest::Approx(1.0));
    }
    SUBCASE("w=2 forces the initial slot to open up") {
        auto law = sic::resolve_step_law({2, 0, 1}, 2, 0.6);
        REQUIRE(law.size() == 1);
        CHECK(law.at({1, 0, 1}) == doctest::Approx(1.0));
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(sic::resolve_step_law({0, 0, 1}, 3, 0.5), invalid_parameter);
        CHECK_THROWS_AS(sic::resolve_step_law({3, 1, 0}, 3, 0.5), invalid_parameter);
    }
}

TEST_CASE("resolve_step_law matches composition enumeration") {
    for (int u : {3, 4}) {
        for (int w = 2; w <= u; ++w) {
            for (int c : {0, 1, 2}) {
                for (int r : {1, 2, 3}) {
                    for (double q : {0.1, 0.5, 0.8}) {
                        SicState s{w, c, r};
                        auto got = sic::resolve_step_law(s, u, q);
                        auto want = oracle_resolve_step(s, u, q);
                        CHECK(total_variation(got, want) < 1e-12);
                        double sum = 0.0;
                        for (auto& [k, v] : got) sum += v;
                        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
                    }
                }
            }
        }
    }
}

TEST_CASE("resolve_step_law spec point: (3,2,1) at u=3, q=0.5") {
    auto law = sic::resolve_step_law({3, 2, 1}, 3, 0.5);
    // h_3(q=0.5) = 1/2: two collided slots each convert independently
    CHECK(law.at({2, 2, 0}) == doctest::Approx(0.25));
    CHECK(law.at({2, 1, 1}) == doctest::Approx(0.5));
    CHECK(law.at({2, 0, 2}) == doctest::Approx(0.25));
}

TEST_CASE("pre_from_post binomial arithmetic") {
    StateDistribution post;
    post.slot = 3;
    post.phase = Phase::PostDecoding;

    SUBCASE("two unresolved users at q=0.5") {
        post.mass[{2, 0, 0}] = 1.0;
        auto pre = sic::pre_from_post(post, 0.5);
        CHECK(pre.slot == 4);
        CHECK(pre.mass.at({2, 0, 0}) == doctest::Approx(0.25));
        CHECK(pre.mass.at({2, 0, 1}) == doctest::Approx(0.5));
        CHECK(pre.mass.at({2, 1, 0}) == doctest::Approx(0.25));
    }
    SUBCASE("w=0 is a fixed point") {
        post.mass[{0, 0, 0}] = 1.0;
        auto pre = sic::pre_from_post(post, 0.3);
        CHECK(pre.mass.at({0, 0, 0}) == doctest::Approx(1.0));
        CHECK(pre.mass.size() == 1);
    }
    SUBCASE("three unresolved users at q=0.1") {
        post.mass[{3, 1, 0}] = 1.0;
        auto pre = sic::pre_from_post(post, 0.1);
        CHECK(pre.mass.at({3, 1, 0}) == doctest::Approx(0.729));
        CHECK(pre.mass.at({3, 1, 1}) == doctest::Approx(0.243));
        CHECK(pre.mass.at({3, 2, 0}) == doctest::Approx(0.028));
    }
}

TEST_CASE("post_from_pre identities and peeling") {
    StateDistribution pre;
    pre.slot = 4;
    pre.phase = Phase::PreDecoding;

    SUBCASE("no singleton passes through") {
        pre.mass[{3, 2, 0}] = 1.0;
        auto post = sic::post_from_pre(pre, 3, 0.5);
        CHECK(post.mass.at({3, 2, 0}) == doctest::Approx(1.0));
        CHECK(post.phase == Phase::PostDecoding);
    }
    SUBCASE("single resolvable user peels to the empty state") {
        pre.mass[{1, 0, 1}] = 1.0;
        auto post = sic::post_from_pre(pre, 1, 0.5);
        CHECK(post.mass.at({0, 0, 0}) == doctest::Approx(1.0));
    }
    SUBCASE("every output state has r = 0 and peeling conserves mass") {
        pre.mass[{4, 3, 1}] = 0.7;
        pre.mass[{3, 2, 1}] = 0.3;
        auto post = sic::post_from_pre(pre, 4, 0.35);
        double sum = post.pruned;
        for (auto& [s, p] : post.mass) {
            CHECK(s.r == 0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cp_law degenerate populations") {
    auto p = make_params(8, 0.5, 5);
    auto law0 = sic::cp_law(0, p);
    CHECK(law0.duration_pmf[0] == doctest::Approx(1.0));
    CHECK(law0.decoded_pmf[0] == doctest::Approx(1.0));
    CHECK_FALSE(law0.beta_defined());
    auto law1 = sic::cp_law(1, p);
    CHECK(law1.duration_pmf[0] == doctest::Approx(1.0));
    CHECK(law1.decoded_pmf[1] == doctest::Approx(1.0));
}

TEST_CASE("cp_law matches the placement-enumeration oracle") {
    // Small grid; the acceptance suite runs the full sweep.
    for (int u : {2, 3}) {
        for (int dmax : {1, 2, 4}) {
            for (double q : {0.3, 0.7}) {
                auto params = make_params(4, q, dmax);
                auto got = sic::cp_law(u, params);
                auto want = oracle_cp_law(u, params);
                CHECK(total_variation(got.duration_pmf, want.duration_pmf) < 1e-9);
                CHECK(total_variation(got.decoded_pmf, want.decoded_pmf) < 1e-9);
                CHECK(total_variation(got.beta, want.beta) < 1e-9);
                for (int d = 0; d < dmax; ++d)
                    CHECK(got.decoded_mean_by_duration[d] ==
                          doctest::Approx(want.decoded_mean_by_duration[d]).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("cp_law under early termination matches the oracle") {
    for (double f : {0.5, 0.85}) {
        for (int u : {2, 3, 4}) {
            auto params = make_params(4, 0.4, 4, Termination::early(f));
            auto got = sic::cp_law(u, params);
            auto want = oracle_cp_law(u, params);
            CHECK(total_variation(got.duration_pmf, want.duration_pmf) < 1e-9);
            CHECK(total_variation(got.decoded_pmf, want.decoded_pmf) < 1e-9);
            CHECK(total_variation(got.beta, want.beta) < 1e-9);
        }
    }
}

TEST_CASE("cp_law conserves and normalizes mass at moderate scale") {
    auto params = make_params(40, 0.08, 30);
    for (int u : {0, 1, 7, 25, 40}) {
        auto law = sic::cp_law(u, params);
        double sd = 0.0, sm = 0.0;
        for (double v : law.duration_pmf) sd += v;
        for (double v : law.decoded_pmf) sm += v;
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(sm == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(law.pruned_mass < 1e-9);
        if (law.beta_defined()) {
            double sb = 0.0;
            for (double v : law.beta) sb += v;
            CHECK(sb == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("cp_law agrees with iterating the public slot operations") {
    const auto params = make_params(5, 0.45, 5);
    const int u = 4;
    auto law = sic::cp_law(u, params);

    auto dist = sic::init_state(u, params.population);
    std::vector<double> duration(params.d_max, 0.0);
    for (int d = 1; d <= params.d_max; ++d) {
        auto post = sic::post_from_pre(dist, u, params.q);
        if (auto it = post.mass.find({0, 0, 0}); it != post.mass.end()) {
            duration[d - 1] += it->second;
            post.mass.erase(it);
        }
        if (d == params.d_max) {
            for (auto& [s, p] : post.mass) duration[d - 1] += p;
            break;
        }
        dist = sic::pre_from_post(post, params.q);
    }
    for (int d = 0; d < params.d_max; ++d)
        CHECK(duration[d] == doctest::Approx(law.duration_pmf[d]).epsilon(1e-9));
}

TEST_CASE("cp_table computes all contender counts") {
    auto params = make_params(12, 0.3, 6);
    auto table = sic::cp_table(params);
    REQUIRE(table.size() == 13);
    for (int u = 0; u <= 12; ++u) {
        CHECK(table[u].active_users == u);
        double s = 0.0;
        for (double v : table[u].duration_pmf) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}
