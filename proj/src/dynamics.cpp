#include "faloha/dynamics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "faloha/mathutil.hpp"
#include "faloha/sic_engine.hpp"

namespace faloha {
namespace dynamics {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix to_eigen(const ChainModel& chain) {
    const auto n = static_cast<Eigen::Index>(chain.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = chain.p(i, j);
    return m;
}

// Kosaraju strongly-connected components over the positive-probability graph.
std::vector<int> scc_labels(const Matrix& p, int& count) {
    const int n = static_cast<int>(p.rows());
    std::vector<int> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    std::vector<std::pair<int, int>> stack;  // (node, next child to try)
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        seen[s] = 1;
        stack.emplace_back(s, 0);
        while (!stack.empty()) {
            const int v = stack.back().first;
            int child = -1;
            for (int& j = stack.back().second; j < n;) {
                const int cand = j++;
                if (p(v, cand) > 0.0 && !seen[cand]) {
                    child = cand;
                    break;
                }
            }
            if (child >= 0) {
                seen[child] = 1;
                stack.emplace_back(child, 0);
            } else {
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    std::vector<int> label(n, -1);
    count = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (label[*it] != -1) continue;
        std::vector<int> dfs{*it};
        label[*it] = count;
        while (!dfs.empty()) {
            const int v = dfs.back();
            dfs.pop_back();
            for (int i = 0; i < n; ++i) {
                if (p(i, v) > 0.0 && label[i] == -1) {
                    label[i] = count;
                    dfs.push_back(i);
                }
            }
        }
        ++count;
    }
    return label;
}

}  // namespace

std::vector<double> users_given_duration(int population, double gamma, int d) {
    return binomial_pmf_table(population, activation_probability(gamma, d));
}

ChainModel build_duration_chain(const ProtocolParams& params,
                                const std::vector<CpLaw>& table) {
    const int dmax = params.d_max;
    const int n_users = params.population + 1;
    ChainModel chain;
    chain.label = ChainLabel::D;
    chain.state_values.resize(dmax);
    std::iota(chain.state_values.begin(), chain.state_values.end(), 1);
    chain.matrix.assign(static_cast<std::size_t>(dmax) * dmax, 0.0);
    // p_D(i,j) = sum_u P_{D|U}(j|u) P_{U|D}(u|i)
    for (int i = 1; i <= dmax; ++i) {
        const auto act = users_given_duration(params.population, params.gamma, i);
        double* row = chain.matrix.data() + static_cast<std::size_t>(i - 1) * dmax;
        for (int u = 0; u < n_users; ++u) {
            const double b = act[u];
            if (b == 0.0) continue;
            const auto& pmf = table[u].duration_pmf;
            for (int j = 0; j < dmax; ++j) row[j] += b * pmf[j];
        }
    }
    chain.pi = stationary(chain);
    return chain;
}

ChainModel build_user_chain(const ProtocolParams& params,
                            const std::vector<CpLaw>& table) {
    const int dmax = params.d_max;
    const int n_users = params.population + 1;
    ChainModel chain;
    chain.label = ChainLabel::U;
    chain.state_values.resize(n_users);
    std::iota(chain.state_values.begin(), chain.state_values.end(), 0);
    chain.matrix.assign(static_cast<std::size_t>(n_users) * n_users, 0.0);
    std::vector<std::vector<double>> act(dmax);
    for (int d = 1; d <= dmax; ++d)
        act[d - 1] = users_given_duration(params.population, params.gamma, d);
    // p_U(i,j) = sum_d P_{U|D}(j|d) P_{D|U}(d|i)
    for (int i = 0; i < n_users; ++i) {
        double* row = chain.matrix.data() + static_cast<std::size_t>(i) * n_users;
        const auto& pmf = table[i].duration_pmf;
        for (int d = 0; d < dmax; ++d) {
            const double pd = pmf[d];
            if (pd == 0.0) continue;
            const auto& a = act[d];
            for (int j = 0; j < n_users; ++j) row[j] += pd * a[j];
        }
    }
    chain.pi = stationary(chain);
    return chain;
}

std::vector<double> stationary(const ChainModel& chain) {
    const int n = static_cast<int>(chain.size());
    Matrix p = to_eigen(chain);

    int n_scc = 0;
    const auto label = scc_labels(p, n_scc);
    std::vector<char> closed(n_scc, 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (p(i, j) > 0.0 && label[i] != label[j]) closed[label[i]] = 0;
    int closed_class = -1;
    int n_closed = 0;
    for (int s = 0; s < n_scc; ++s)
        if (closed[s]) {
            ++n_closed;
            closed_class = s;
        }
    if (n_closed != 1) {
        std::string msg = "chain has " + std::to_string(n_closed) +
                          " closed classes; states outside the first:";
        int shown = 0;
        for (int i = 0; i < n && shown < 8; ++i)
            if (closed[label[i]] && label[i] != closed_class) {
                msg += " " + std::to_string(chain.state_values[i]);
                ++shown;
            }
        throw structural_error(msg);
    }

    std::vector<int> members;
    for (int i = 0; i < n; ++i)
        if (label[i] == closed_class) members.push_back(i);
    const int m = static_cast<int>(members.size());

    Matrix sub(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) sub(a, b) = p(members[a], members[b]);

    Vector pi_sub(m);
    if (m <= 512) {
        Matrix sys = sub.transpose() - Matrix::Identity(m, m);
        sys.row(0).setOnes();
        Vector rhs = Vector::Zero(m);
        rhs(0) = 1.0;
        pi_sub = sys.partialPivLu().solve(rhs);
    } else {
        // Lazy power iteration; bimodal chains mix slowly, hence the cap.
        Vector x = Vector::Constant(m, 1.0 / m);
        for (long it = 0; it < 1000000; ++it) {
            Vector next = 0.5 * (sub.transpose() * x + x);
            next /= next.sum();
            const double delta = (next - x).lpNorm<Eigen::Infinity>();
            x = next;
            if (delta < 1e-12) break;
        }
        pi_sub = x;
    }

    for (int a = 0; a < m; ++a)
        if (pi_sub(a) < 0.0) {
            if (pi_sub(a) < -1e-9)
                throw numerical_error("stationary solve produced negative mass");
            pi_sub(a) = 0.0;
        }
    pi_sub /= pi_sub.sum();
    const double residual =
        (pi_sub.transpose() * sub - pi_sub.transpose()).lpNorm<Eigen::Infinity>();
    if (residual > 1e-8)
        throw numerical_error("stationary residual " + std::to_string(residual));

    std::vector<double> pi(n, 0.0);
    for (int a = 0; a < m; ++a) pi[members[a]] = pi_sub(a);
    return pi;
}

std::vector<double> decoded_stationary(const std::vector<CpLaw>& table,
                                       const std::vector<double>& pi_user) {
    const std::size_t n = table.size();
    std::vector<double> pi_m(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
        if (pi_user[u] == 0.0) continue;
        const auto& pmf = table[u].decoded_pmf;
        for (std::size_t m = 0; m < pmf.size(); ++m) pi_m[m] += pi_user[u] * pmf[m];
    }
    return pi_m;
}

double throughput(const ProtocolParams& params, const std::vector<CpLaw>& table) {
    const auto user_chain = build_user_chain(params, table);
    const auto dur_chain = build_duration_chain(params, table);
    double decoded = 0.0;
    for (int u = 0; u <= params.population; ++u) {
        if (user_chain.pi[u] == 0.0) continue;
        const auto& pmf = table[u].decoded_pmf;
        double mean_m = 0.0;
        for (std::size_t m = 1; m < pmf.size(); ++m) mean_m += m * pmf[m];
        decoded += mean_m * user_chain.pi[u];
    }
    double slots = 0.0;
    for (int d = 1; d <= params.d_max; ++d) slots += d * dur_chain.pi[d - 1];
    return decoded / slots;
}

DriftProfile drift_profile(const ProtocolParams& params,
                           const std::vector<CpLaw>& table) {
    const int n_users = params.population + 1;
    DriftProfile profile;
    profile.drift.resize(n_users);
    // Xi(u) = sum_d P_{D|U}(d|u) * U * gamma_d - u
    std::vector<double> mean_next(params.d_max);
    for (int d = 1; d <= params.d_max; ++d)
        mean_next[d - 1] =
            params.population * activation_probability(params.gamma, d);
    for (int u = 0; u < n_users; ++u) {
        const auto& pmf = table[u].duration_pmf;
        double e = 0.0;
        for (int d = 0; d < params.d_max; ++d) e += pmf[d] * mean_next[d];
        profile.drift[u] = e - u;
    }

    const auto& xi = profile.drift;
    for (int u = 0; u + 1 < n_users; ++u) {
        const double a = xi[u];
        const double b = xi[u + 1];
        if (a > 0.0 && b <= 0.0)
            profile.equilibria.push_back(
                {u + a / (a - b), u, u + 1, EquilibriumKind::Stable});
        else if (a < 0.0 && b >= 0.0)
            profile.equilibria.push_back(
                {u + a / (a - b), u, u + 1, EquilibriumKind::Unstable});
    }
    if (profile.equilibria.empty()) {
        // Monotone drift: the population is attracted to one boundary.
        if (xi[0] <= 0.0)
            profile.equilibria.push_back({0.0, 0, 0, EquilibriumKind::Stable});
        else
            profile.equilibria.push_back({static_cast<double>(params.population),
                                          params.population, params.population,
                                          EquilibriumKind::Stable});
    }
    return profile;
}

double recovery_time(const ProtocolParams& params, const std::vector<CpLaw>& table,
                     int threshold) {
    if (threshold < 1 || threshold > params.d_max)
        throw invalid_parameter("threshold must lie in {1..d_max}");
    const auto chain = build_duration_chain(params, table);
    const int dmax = params.d_max;

    // Expected next-CP duration from each state.
    std::vector<double> mean_next(dmax, 0.0);
    for (int i = 0; i < dmax; ++i)
        for (int j = 0; j < dmax; ++j) mean_next[i] += chain.p(i, j) * (j + 1);

    if (threshold == 1) throw invalid_parameter("empty target set: no CP is shorter than 1 slot");

    // States with duration >= threshold are transient for this question:
    // h(i) = E[next duration] + sum_{j >= threshold} p(i,j) h(j).
    const int first = threshold - 1;  // index of duration == threshold
    const int m = dmax - first;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs(m);
    double target_reach = 0.0;
    for (int a = 0; a < m; ++a) {
        const int i = first + a;
        rhs(a) = mean_next[i];
        for (int b = 0; b < m; ++b) sys(a, b) -= chain.p(i, first + b);
        for (int j = 0; j < first; ++j) target_reach += chain.p(i, j);
    }
    if (target_reach <= 0.0)
        throw structural_error("recovery target set unreachable");
    Eigen::VectorXd h = sys.partialPivLu().solve(rhs);
    const double residual = (sys * h - rhs).lpNorm<Eigen::Infinity>();
    if (!h.allFinite() || residual > 1e-6 * std::max(1.0, h.lpNorm<Eigen::Infinity>()))
        throw numerical_error("recovery-time system is singular");
    return h(m - 1);
}

double throughput(const ProtocolParams& params) {
    return throughput(params, sic::cp_table(params));
}

DriftProfile drift_profile(const ProtocolParams& params) {
    return drift_profile(params, sic::cp_table(params));
}

double recovery_time(const ProtocolParams& params, int threshold) {
    return recovery_time(params, sic::cp_table(params), threshold);
}

}  // namespace dynamics
}  // namespace faloha
