#include "faloha/sic_engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>

#include "faloha/mathutil.hpp"

namespace faloha {
namespace sic {

namespace {

constexpr double kPruneThreshold = 1e-15;   // per-state sparsity cutoff
constexpr double kBranchCutoff = 1e-17;     // binomial tail cutoff inside expansions

// Visits the significant terms of Binomial(n, p), walking outward from the
// mode so that underflowed tails are skipped. Returns the visited mass.
template <class F>
double for_binomial_significant(int n, double p, double cutoff, F&& fn) {
    if (n <= 0) {
        fn(0, 1.0);
        return 1.0;
    }
    if (p <= 0.0) {
        fn(0, 1.0);
        return 1.0;
    }
    if (p >= 1.0) {
        fn(n, 1.0);
        return 1.0;
    }
    int k0 = static_cast<int>((n + 1) * p);
    k0 = std::clamp(k0, 0, n);
    const double pmf0 = binomial_pmf(n, k0, p);
    const double ratio = p / (1.0 - p);
    double covered = 0.0;
    double t = pmf0;
    for (int k = k0; k <= n; ++k) {
        if (t < cutoff && k > k0) break;
        fn(k, t);
        covered += t;
        t *= ratio * (n - k) / (k + 1);
    }
    t = pmf0;
    for (int k = k0 - 1; k >= 0; --k) {
        t *= (k + 1) / (ratio * (n - k));
        if (t < cutoff) break;
        fn(k, t);
        covered += t;
    }
    return covered;
}

// One SIC iteration from (w,c,r): the resolved user empties i of the r
// singletons, j of the c collided slots become singletons, and the initial
// slot becomes a singleton exactly when w==2. Emits fn(w-1, c-j, r-i+j+a, prob)
// and returns the emitted mass (tails below `cutoff` are skipped).
template <class F>
double expand_resolution(int w, int c, int r, double h, double cutoff, F&& fn) {
    const int a = (w == 2) ? 1 : 0;
    // i-1 ~ Binomial(r-1, 1/w): the other singletons owned by the resolved user
    double covered_i = 0.0;
    static thread_local std::vector<std::pair<int, double>> iterms;
    iterms.clear();
    covered_i = for_binomial_significant(r - 1, 1.0 / w, cutoff, [&](int k, double pr) {
        iterms.emplace_back(k + 1, pr);
    });
    const double covered_j =
        for_binomial_significant(c, h, cutoff, [&](int j, double pj) {
            for (const auto& [i, pi] : iterms)
                fn(w - 1, c - j, r - i + j + a, pj * pi);
        });
    return covered_i * covered_j;
}

// Dense level buffer for the peeling cascade, tracking the touched r-range
// per row so accumulation stays branch-free. The cascade runs in coordinates
// (t, r) with t = c + r: one resolution step maps t -> t - 1 - k + a
// independently of how many collided slots convert, which keeps the
// reachable set per level narrow.
struct CascadeLevel {
    int rdim = 0;
    std::vector<double> mass;
    std::vector<int> row_lo, row_hi;  // touched r-range per t, empty when lo > hi
    std::vector<int> rows;            // touched t values

    void configure(int tdim, int rdim_) {
        rdim = rdim_;
        mass.assign(static_cast<std::size_t>(tdim) * rdim_, 0.0);
        row_lo.assign(tdim, 1);
        row_hi.assign(tdim, 0);
        rows.clear();
    }
    double* row(int t) { return mass.data() + static_cast<std::size_t>(t) * rdim; }
    void add_range(int t, int r0, double scale, const double* __restrict pmf, int len) {
        if (row_lo[t] > row_hi[t]) {
            rows.push_back(t);
            row_lo[t] = r0;
            row_hi[t] = r0 + len - 1;
        } else {
            row_lo[t] = std::min(row_lo[t], r0);
            row_hi[t] = std::max(row_hi[t], r0 + len - 1);
        }
        double* __restrict dst = row(t) + r0;
        for (int i = 0; i < len; ++i) dst[i] += scale * pmf[i];
    }
    void add(int t, int r, double p) {
        static constexpr double kUnit = 1.0;
        add_range(t, r, p, &kUnit, 1);
    }
    void clear() {
        for (int t : rows) {
            double* m = row(t);
            for (int r = row_lo[t]; r <= row_hi[t]; ++r) m[r] = 0.0;
            row_lo[t] = 1;
            row_hi[t] = 0;
        }
        rows.clear();
    }
    bool empty() const { return rows.empty(); }
};

// Significant Binomial(n, p) terms for one fixed p, built lazily per n and
// stored contiguously over {k_lo..k_lo+len-1}. Each row carries nested
// per-decade subranges so callers scaling the row by a small weight can skip
// terms that cannot matter.
class BinomialRows {
  public:
    static constexpr int kGears = 5;
    // gear g keeps terms with pmf >= 10^-(6 + 3g); gear kGears-1 keeps all
    struct Row {
        int k_lo = 0;
        double covered = 0.0;
        std::vector<double> pmf;
        int gear_lo[kGears];
        int gear_len[kGears];
        double gear_mass[kGears];
    };

    void configure(double p, int max_n) {
        p_ = p;
        rows_.assign(static_cast<std::size_t>(max_n) + 1, nullptr);
        storage_.clear();
    }

    const Row& row(int n) {
        if (!rows_[n]) {
            auto r = std::make_unique<Row>();
            int k_min = n + 1, k_max = -1;
            for_binomial_significant(n, p_, kBranchCutoff, [&](int k, double) {
                k_min = std::min(k_min, k);
                k_max = std::max(k_max, k);
            });
            r->k_lo = k_min;
            r->pmf.assign(static_cast<std::size_t>(k_max - k_min) + 1, 0.0);
            r->covered = for_binomial_significant(
                n, p_, kBranchCutoff, [&](int k, double pr) { r->pmf[k - k_min] = pr; });
            const int len = static_cast<int>(r->pmf.size());
            for (int g = 0; g < kGears; ++g) {
                const double cut = std::pow(10.0, -(6 + 3 * g));
                int lo = 0, hi = len - 1;
                while (lo < len && r->pmf[lo] < cut) ++lo;
                while (hi >= lo && r->pmf[hi] < cut) --hi;
                double m = 0.0;
                for (int i = lo; i <= hi; ++i) m += r->pmf[i];
                r->gear_lo[g] = lo;
                r->gear_len[g] = hi - lo + 1;  // may be 0
                r->gear_mass[g] = m;
            }
            rows_[n] = r.get();
            storage_.push_back(std::move(r));
        }
        return *rows_[n];
    }

    // Smallest gear whose cut keeps every term with scale*pmf >= 1e-20;
    // anything skipped is charged to the caller's pruned-mass ledger.
    static int gear_for(double scale) {
        int e2 = 0;
        std::frexp(scale, &e2);
        const double log10s = e2 * 0.30102999566398120;
        const int g = static_cast<int>(std::ceil((14.0 + log10s) / 3.0));
        return std::clamp(g, 0, kGears - 1);
    }

  private:
    double p_ = 0.0;
    std::vector<Row*> rows_;
    std::vector<std::unique_ptr<Row>> storage_;
};

}  // namespace

double singleton_conversion_probability(int u, int w, double q) {
    if (w < 2 || u < 2) return 0.0;
    const double logq = std::log(q);
    const double log1mq = (q < 1.0) ? std::log1p(-q) : -std::numeric_limits<double>::infinity();
    auto log_lambda = [&](int k) {
        if (q >= 1.0) return k == u ? 0.0 : -std::numeric_limits<double>::infinity();
        return log_binomial(u, k) + k * logq + (u - k) * log1mq;
    };
    double num = 0.0;
    for (int k = 2; k <= u - w + 2; ++k) {
        const double lt = log_lambda(k) + std::log(static_cast<double>(k)) +
                          std::log(static_cast<double>(k - 1)) +
                          std::log(static_cast<double>(w - 1)) -
                          std::log(static_cast<double>(u)) -
                          std::log(static_cast<double>(u - 1)) +
                          log_binomial(u - w, k - 2) - log_binomial(u - 2, k - 2);
        num += std::exp(lt);
    }
    double sum_single = 0.0;
    for (int k = 1; k <= u - w + 1; ++k)
        sum_single += std::exp(log_lambda(k) + std::log(static_cast<double>(w)) +
                               log_binomial(u - w, k - 1) - log_binomial(u, k));
    double sum_none = 0.0;
    for (int k = 0; k <= u - w; ++k)
        sum_none += std::exp(log_lambda(k) + log_binomial(u - w, k) - log_binomial(u, k));
    const double den = 1.0 - sum_single - sum_none;
    if (den <= 0.0) {
        if (num <= 1e-300) return 0.0;  // vacuous: no collided slot can exist
        throw numerical_error("singleton conversion probability: nonpositive denominator at u=" +
                              std::to_string(u) + " w=" + std::to_string(w) +
                              " q=" + std::to_string(q));
    }
    const double h = num / den;
    if (h < -1e-9 || h > 1.0 + 1e-9)
        throw numerical_error("singleton conversion probability out of [0,1] at u=" +
                              std::to_string(u) + " w=" + std::to_string(w) +
                              " q=" + std::to_string(q) + ": " + std::to_string(h));
    return std::clamp(h, 0.0, 1.0);
}

StateDistribution init_state(int u, int population) {
    if (u < 0 || u > population)
        throw invalid_parameter("active users must lie in {0..population}, got " +
                                std::to_string(u));
    StateDistribution dist;
    dist.slot = 1;
    dist.phase = Phase::PreDecoding;
    if (u == 0)
        dist.mass[{0, 0, 0}] = 1.0;
    else if (u == 1)
        dist.mass[{1, 0, 1}] = 1.0;
    else
        dist.mass[{u, 0, 0}] = 1.0;
    return dist;
}

std::map<SicState, double> resolve_step_law(const SicState& state, int u, double q) {
    if (state.w < 1 || state.r < 1)
        throw invalid_parameter("resolve step requires w >= 1 and r >= 1");
    const double h = state.c > 0 ? singleton_conversion_probability(u, state.w, q) : 0.0;
    std::map<SicState, double> out;
    expand_resolution(state.w, state.c, state.r, h, 0.0,
                      [&](int w, int c, int r, double p) {
                          if (p > 0.0) out[{w, c, r}] += p;
                      });
    return out;
}

StateDistribution post_from_pre(const StateDistribution& dist, int u, double q) {
    if (dist.phase != Phase::PreDecoding)
        throw invalid_parameter("post_from_pre expects a pre-decoding law");
    StateDistribution out;
    out.slot = dist.slot;
    out.phase = Phase::PostDecoding;
    out.pruned = dist.pruned;

    std::vector<double> h_table(static_cast<std::size_t>(u) + 1, 0.0);
    for (int w = 2; w <= u; ++w) h_table[w] = singleton_conversion_probability(u, w, q);

    // Peel levels in order of strictly decreasing w; states reaching r=0 stop.
    std::map<int, std::map<std::pair<int, int>, double>, std::greater<>> levels;
    for (const auto& [state, p] : dist.mass) {
        if (state.r == 0)
            out.mass[state] += p;
        else
            levels[state.w][{state.c, state.r}] += p;
    }
    while (!levels.empty()) {
        auto node = levels.extract(levels.begin());
        const int w = node.key();
        for (const auto& [cr, p] : node.mapped()) {
            const auto [c, r] = cr;
            if (r == 0) {
                out.mass[{w, c, 0}] += p;
                continue;
            }
            assert(w >= 1);
            const double covered = expand_resolution(
                w, c, r, c > 0 ? h_table[w] : 0.0, kBranchCutoff,
                [&](int w2, int c2, int r2, double pr) {
                    if (r2 == 0 || w2 == 0)
                        out.mass[{w2, c2, 0}] += p * pr;
                    else
                        levels[w2][{c2, r2}] += p * pr;
                });
            out.pruned += p * (1.0 - covered);
        }
    }
    return out;
}

StateDistribution pre_from_post(const StateDistribution& dist, double q) {
    if (dist.phase != Phase::PostDecoding)
        throw invalid_parameter("pre_from_post expects a post-decoding law");
    StateDistribution out;
    out.slot = dist.slot + 1;
    out.phase = Phase::PreDecoding;
    out.pruned = dist.pruned;
    for (const auto& [state, p] : dist.mass) {
        const int w = state.w;
        const double none = std::pow(1.0 - q, w);
        const double one = w * q * std::pow(1.0 - q, w - 1);
        out.mass[{w, state.c, 0}] += p * none;
        if (one > 0.0) out.mass[{w, state.c, 1}] += p * one;
        const double coll = 1.0 - none - one;
        if (coll > 0.0) out.mass[{w, state.c + 1, 0}] += p * coll;
    }
    return out;
}

CpLaw cp_law(int u, const ProtocolParams& params) {
    params.validate();
    if (u < 0 || u > params.population)
        throw invalid_parameter("active users must lie in {0..population}, got " +
                                std::to_string(u));
    const int dmax = params.d_max;
    const double q = params.q;
    const int w_stop = u - params.termination.decoded_threshold(u);

    CpLaw law;
    law.active_users = u;
    law.d_max = dmax;
    law.duration_pmf.assign(dmax, 0.0);
    law.decoded_pmf.assign(static_cast<std::size_t>(u) + 1, 0.0);
    law.decoded_mean_by_duration.assign(dmax, 0.0);
    std::vector<double> beta_num(static_cast<std::size_t>(u) + 1, 0.0);

    const int cdim = dmax + 1;
    const int wdim = u + 1;
    auto idx = [cdim](int w, int c) { return static_cast<std::size_t>(w) * cdim + c; };

    std::vector<double> post(static_cast<std::size_t>(wdim) * cdim, 0.0);
    std::vector<double> pre1(post.size(), 0.0);  // pre-decoding states with r=1
    std::vector<double> next(post.size(), 0.0);

    std::vector<double> h_table(wdim, 0.0);
    for (int w = 2; w <= u; ++w) h_table[w] = singleton_conversion_probability(u, w, q);
    std::vector<double> p_none(wdim), p_one(wdim), p_coll(wdim);
    for (int w = 0; w < wdim; ++w) {
        p_none[w] = std::pow(1.0 - q, w);
        p_one[w] = w * q * std::pow(1.0 - q, w - 1);
        p_coll[w] = std::max(0.0, 1.0 - p_none[w] - p_one[w]);
    }

    // Lazily built significant-term tables: per level w, conversions of
    // collided slots follow Bin(., h_w) and singleton consumption Bin(., 1/w).
    std::vector<BinomialRows> jrows(wdim), krows(wdim);
    for (int w = 1; w < wdim; ++w) {
        jrows[w].configure(h_table[w], dmax + 1);
        krows[w].configure(1.0 / w, dmax + 1);
    }

    CascadeLevel cur, nxt;
    cur.configure(dmax + 2, dmax + 2);
    nxt.configure(dmax + 2, dmax + 2);

    // Absorbs every post-decoding cell with w <= limit into duration slot d.
    auto absorb = [&](int d, int limit, bool as_residual) {
        double moved = 0.0;
        for (int w = 0; w <= std::min(limit, u); ++w) {
            for (int c = 0; c < cdim; ++c) {
                double& cell = post[idx(w, c)];
                if (cell == 0.0) continue;
                const int m = u - w;
                law.duration_pmf[d - 1] += cell;
                law.decoded_pmf[m] += cell;
                law.decoded_mean_by_duration[d - 1] += m * cell;
                if (as_residual) beta_num[m] += cell;
                moved += cell;
                cell = 0.0;
            }
        }
        return moved;
    };

    double live = 1.0;
    for (int d = 1; d <= dmax && live > 0.0; ++d) {
        // Pre-decoding law of slot d
        if (d == 1) {
            if (u == 0)
                post[idx(0, 0)] = 1.0;
            else if (u == 1)
                pre1[idx(1, 0)] = 1.0;
            else
                post[idx(u, 0)] = 1.0;
        } else {
            std::fill(next.begin(), next.end(), 0.0);
            const int climit = std::min(d - 1, cdim - 2);
            for (int w = 1; w < wdim; ++w) {
                const std::size_t base = idx(w, 0);
                for (int c = 0; c <= climit; ++c) {
                    const double p = post[base + c];
                    if (p < kPruneThreshold) {
                        law.pruned_mass += p;
                        continue;
                    }
                    next[base + c] += p * p_none[w];
                    pre1[base + c] = p * p_one[w];
                    next[base + c + 1] += p * p_coll[w];
                }
            }
            post.swap(next);
        }

        // Decode: peel r=1 states down through strictly decreasing w.
        // Level states are kept as (t, r) with t = c + r.
        for (int w = u; w >= 1; --w) {
            const std::size_t base = idx(w, 0);
            bool any = false;
            for (int c = 0; c < cdim; ++c) {
                double& p = pre1[base + c];
                if (p != 0.0) {
                    if (p < kPruneThreshold)
                        law.pruned_mass += p;
                    else {
                        cur.add(c + 1, 1, p);
                        any = true;
                    }
                    p = 0.0;
                }
            }
            if (!any && cur.empty()) continue;
            const int a = (w == 2) ? 1 : 0;
            for (const int t : cur.rows) {
                const double* src = cur.row(t);
                for (int r = cur.row_lo[t]; r <= cur.row_hi[t]; ++r) {
                    const double p = src[r];
                    if (p == 0.0) continue;
                    if (p < kPruneThreshold) {
                        law.pruned_mass += p;
                        continue;
                    }
                    if (r == 0) {
                        post[idx(w, t)] += p;  // c = t once no singleton remains
                        continue;
                    }
                    const int c = t - r;
                    const auto& krow = krows[w].row(r - 1);
                    const auto& jrow = jrows[w].row(c);
                    double emitted = 0.0;
                    for (std::size_t ki = 0; ki < krow.pmf.size(); ++ki) {
                        const int k = krow.k_lo + static_cast<int>(ki);
                        const double pk = p * krow.pmf[ki];
                        if (pk < 1e-20) continue;
                        const int g = BinomialRows::gear_for(pk);
                        const int len = jrow.gear_len[g];
                        if (len <= 0) continue;
                        const int jlo = jrow.gear_lo[g];
                        const int t2 = t - 1 - k + a;
                        const int rho0 = r - 1 - k + a + jrow.k_lo + jlo;
                        nxt.add_range(t2, rho0, pk, jrow.pmf.data() + jlo, len);
                        emitted += pk * jrow.gear_mass[g];
                    }
                    law.pruned_mass += p - emitted;
                }
            }
            cur.clear();
            std::swap(cur, nxt);
        }
        // Mass peeled past the final user sits at level 0 with r = 0.
        for (const int t : cur.rows) {
            const double* src = cur.row(t);
            for (int r = cur.row_lo[t]; r <= cur.row_hi[t]; ++r)
                if (src[r] != 0.0) post[idx(0, t)] += src[r];
        }
        cur.clear();

        live -= absorb(d, w_stop, false);
        if (d == dmax) live -= absorb(d, u, true);
    }

    const double beta_total = std::accumulate(beta_num.begin(), beta_num.end(), 0.0);
    if (beta_total > 1e-12) {
        law.beta = std::move(beta_num);
        for (double& b : law.beta) b /= beta_total;
    }
    return law;
}

std::vector<CpLaw> cp_table(const ProtocolParams& params, unsigned threads) {
    params.validate();
    std::vector<CpLaw> table(static_cast<std::size_t>(params.population) + 1);
    parallel_for(table.size(),
                 [&](std::size_t u) { table[u] = cp_law(static_cast<int>(u), params); },
                 threads);
    return table;
}

}  // namespace sic
}  // namespace faloha
