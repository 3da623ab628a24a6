#include "faloha/aoi.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "faloha/dynamics.hpp"
#include "faloha/mathutil.hpp"
#include "faloha/sic_engine.hpp"

namespace faloha {
namespace aoi {

namespace {

// P{tagged success, D=d | u} for every (u, d), from the joint decoded-count
// bookkeeping: E[M ; D=d | u] / U.
double joint_success(const CpLaw& law, int population, int d) {
    return law.decoded_mean_by_duration[d - 1] / population;
}

struct ZRows {
    // succ(j,d) = p_Z((j,.),(d,1)); fail(j,d) = p_Z((j,.),(d,0)); 1-based d
    Eigen::MatrixXd succ;
    Eigen::MatrixXd fail;
};

ZRows build_z_rows(const ProtocolParams& params, const std::vector<CpLaw>& table) {
    const int dmax = params.d_max;
    ZRows rows{Eigen::MatrixXd::Zero(dmax, dmax), Eigen::MatrixXd::Zero(dmax, dmax)};
    for (int j = 1; j <= dmax; ++j) {
        const auto act =
            dynamics::users_given_duration(params.population, params.gamma, j);
        for (int u = 0; u <= params.population; ++u) {
            const double b = act[u];
            if (b == 0.0) continue;
            const auto& law = table[u];
            for (int d = 1; d <= dmax; ++d) {
                const double pd = law.duration_pmf[d - 1];
                if (pd == 0.0) continue;
                const double ps = joint_success(law, params.population, d);
                rows.succ(j - 1, d - 1) += b * ps;
                rows.fail(j - 1, d - 1) += b * (pd - ps);
            }
        }
    }
    return rows;
}

}  // namespace

double success_probability(int u, int d, const ProtocolParams& params,
                           const CpLaw& law, bool* from_beta) {
    if (u < 0 || u > params.population || d < 1 || d > params.d_max)
        throw invalid_parameter("success probability: u or d out of range");
    if (from_beta) *from_beta = false;
    if (d < params.d_max || !law.beta_defined())
        return static_cast<double>(u) / params.population;
    if (from_beta) *from_beta = true;
    double nu = 0.0;
    for (std::size_t m = 0; m < law.beta.size(); ++m)
        nu += static_cast<double>(m) / params.population * law.beta[m];
    return nu;
}

ChainModel build_ancillary_chain(const ProtocolParams& params,
                                 const std::vector<CpLaw>& table) {
    const int dmax = params.d_max;
    const auto rows = build_z_rows(params, table);
    ChainModel chain;
    chain.label = ChainLabel::Z;
    const int n = 2 * dmax;
    chain.state_values.resize(n);
    for (int s = 0; s < 2; ++s)
        for (int d = 1; d <= dmax; ++d)
            chain.state_values[s * dmax + d - 1] = s * 1000000 + d;
    chain.matrix.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int s = 0; s < 2; ++s) {
        for (int j = 1; j <= dmax; ++j) {
            double* row =
                chain.matrix.data() + static_cast<std::size_t>(s * dmax + j - 1) * n;
            for (int d = 1; d <= dmax; ++d) {
                row[d - 1] = rows.fail(j - 1, d - 1);
                row[dmax + d - 1] = rows.succ(j - 1, d - 1);
            }
        }
    }
    chain.pi = dynamics::stationary(chain);
    return chain;
}

std::vector<double> system_time_pmf(const ChainModel& ancillary) {
    const int dmax = static_cast<int>(ancillary.size()) / 2;
    double norm = 0.0;
    for (int d = 0; d < dmax; ++d) norm += ancillary.pi[dmax + d];
    if (norm <= 0.0)
        throw structural_error("degenerate AoI: the tagged user never delivers");
    std::vector<double> pmf(dmax);
    for (int d = 0; d < dmax; ++d) pmf[d] = ancillary.pi[dmax + d] / norm;
    return pmf;
}

namespace {

Eigen::MatrixXd fail_block(const ChainModel& chain) {
    const int dmax = static_cast<int>(chain.size()) / 2;
    Eigen::MatrixXd f(dmax, dmax);
    for (int j = 0; j < dmax; ++j)
        for (int d = 0; d < dmax; ++d) f(j, d) = chain.p(j, d);
    return f;
}

Eigen::MatrixXd succ_block(const ChainModel& chain) {
    const int dmax = static_cast<int>(chain.size()) / 2;
    Eigen::MatrixXd s(dmax, dmax);
    for (int j = 0; j < dmax; ++j)
        for (int d = 0; d < dmax; ++d) s(j, d) = chain.p(j, dmax + d);
    return s;
}

Eigen::VectorXd solve_first_step(const Eigen::MatrixXd& fail,
                                 const Eigen::VectorXd& rhs) {
    const auto n = fail.rows();
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n) - fail;
    Eigen::VectorXd x = sys.partialPivLu().solve(rhs);
    const double residual = (sys * x - rhs).lpNorm<Eigen::Infinity>();
    if (!x.allFinite() || residual > 1e-8 * std::max(1.0, x.lpNorm<Eigen::Infinity>()))
        throw numerical_error("first-step system residual " + std::to_string(residual));
    return x;
}

}  // namespace

std::vector<double> conditional_mean_y(const ChainModel& ancillary) {
    const int dmax = static_cast<int>(ancillary.size()) / 2;
    const auto fail = fail_block(ancillary);
    const auto succ = succ_block(ancillary);
    Eigen::VectorXd durations = Eigen::VectorXd::LinSpaced(dmax, 1.0, dmax);
    Eigen::VectorXd rhs = durations + succ * durations;
    Eigen::VectorXd v = solve_first_step(fail, rhs);
    return {v.data(), v.data() + dmax};
}

std::vector<double> conditional_mean_y2(const ChainModel& ancillary,
                                        const std::vector<double>& mean_y_fail) {
    const int dmax = static_cast<int>(ancillary.size()) / 2;
    const auto fail = fail_block(ancillary);
    const auto succ = succ_block(ancillary);
    Eigen::VectorXd durations = Eigen::VectorXd::LinSpaced(dmax, 1.0, dmax);
    Eigen::VectorXd d2 = durations.array().square();
    Eigen::Map<const Eigen::VectorXd> v(mean_y_fail.data(), dmax);
    // E[Y | next state] averaged over one transition from (d, 0)
    Eigen::VectorXd step_mean = succ * durations + fail * v;
    Eigen::VectorXd rhs = d2 + 2.0 * durations.cwiseProduct(step_mean) + succ * d2;
    Eigen::VectorXd w = solve_first_step(fail, rhs);
    return {w.data(), w.data() + dmax};
}

AoiReport average_aoi(const ProtocolParams& params, const std::vector<CpLaw>& table) {
    const int dmax = params.d_max;
    const auto chain = build_ancillary_chain(params, table);
    const auto fail = fail_block(chain);
    const auto succ = succ_block(chain);

    AoiReport report;
    report.system_time_pmf = system_time_pmf(chain);
    report.mean_y_given_fail = conditional_mean_y(chain);
    report.mean_y2_given_fail = conditional_mean_y2(chain, report.mean_y_given_fail);

    Eigen::VectorXd durations = Eigen::VectorXd::LinSpaced(dmax, 1.0, dmax);
    Eigen::VectorXd d2 = durations.array().square();
    Eigen::Map<const Eigen::VectorXd> v(report.mean_y_given_fail.data(), dmax);
    Eigen::Map<const Eigen::VectorXd> w(report.mean_y2_given_fail.data(), dmax);
    Eigen::Map<const Eigen::VectorXd> px(report.system_time_pmf.data(), dmax);

    // Rows out of a success state coincide with rows out of a failure state,
    // so E[Y | X=x] is the one-transition average taken from (x, 1).
    Eigen::VectorXd y_given_x = succ * durations + fail * v;
    Eigen::VectorXd y2_given_x = succ * d2 + fail * w;

    report.mean_xy = durations.cwiseProduct(y_given_x).dot(px);
    report.mean_y = y_given_x.dot(px);
    report.mean_y2 = y2_given_x.dot(px);
    report.aoi_mean = (report.mean_xy + 0.5 * report.mean_y2) / report.mean_y;
    return report;
}

AoiReport average_aoi(const ProtocolParams& params) {
    return average_aoi(params, sic::cp_table(params));
}

}  // namespace aoi
}  // namespace faloha
