#include "quilt/eval/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "quilt/lrgq/lrgq.hpp"
#include "quilt/madgq/madgq.hpp"

namespace quilt {

namespace {

bool pair_selected(const PairMask* mask, Restriction restriction, int i, int j) {
    if (mask == nullptr || restriction == Restriction::all) return true;
    const bool obs = mask->observed(i, j);
    return restriction == Restriction::observed ? obs : !obs;
}

}  // namespace

RecoveryMetrics compare_edges(const EdgeSet& estimate, const EdgeSet& truth,
                              const PairMask* mask, Restriction restriction) {
    if (estimate.p() != truth.p())
        throw ValidationError("compare_edges: dimension mismatch");
    if (mask != nullptr && mask->p() != truth.p())
        throw ValidationError("compare_edges: mask dimension mismatch");

    RecoveryMetrics m;
    for (const auto& [i, j] : truth.pairs()) {
        if (!pair_selected(mask, restriction, i, j)) continue;
        if (estimate.contains(i, j))
            ++m.tp;
        else
            ++m.fn;
    }
    for (const auto& [i, j] : estimate.pairs()) {
        if (!pair_selected(mask, restriction, i, j)) continue;
        if (!truth.contains(i, j)) ++m.fp;
    }
    if (m.tp + m.fn > 0) {
        m.tpr_defined = true;
        m.tpr = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    }
    m.fdp = static_cast<double>(m.fp) / static_cast<double>(std::max<long>(m.tp + m.fp, 1));
    const long denom = 2 * m.tp + m.fp + m.fn;
    m.f1 = denom > 0 ? 2.0 * static_cast<double>(m.tp) / static_cast<double>(denom) : 1.0;
    return m;
}

OracleTuneResult tune_f1_oracle(
    std::size_t grid_size,
    const std::function<std::optional<EdgeSet>(std::size_t)>& runner,
    const EdgeSet& truth) {
    if (grid_size == 0) throw ValidationError("tune_f1_oracle: empty grid");
    OracleTuneResult best(truth.p());
    bool have_best = false;
    for (std::size_t idx = 0; idx < grid_size; ++idx) {
        std::optional<EdgeSet> edges = runner(idx);
        if (!edges) {
            ++best.n_failed;
            continue;
        }
        const RecoveryMetrics m = compare_edges(*edges, truth);
        const bool better =
            !have_best || m.f1 > best.metrics.f1 ||
            (m.f1 == best.metrics.f1 && edges->size() < best.edges.size());
        if (better) {
            best.best_index = idx;
            best.metrics = m;
            best.edges = std::move(*edges);
            have_best = true;
        }
    }
    if (!have_best) throw NumericalError("tune_f1_oracle: every grid point failed");
    return best;
}

double ebic(const Matrix& sigma_input, const PrecisionEstimate& theta,
            double n_effective, double gamma) {
    if (n_effective <= 0.0) throw ValidationError("ebic: n_effective must be positive");
    Eigen::LLT<Matrix> llt(theta.theta);
    if (llt.info() != Eigen::Success)
        throw NumericalError("ebic: theta is not positive definite");
    const double log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    const double trace_term = (sigma_input.array() * theta.theta.array()).sum();
    const double n_edges = static_cast<double>(theta.support.size());
    const int p = static_cast<int>(theta.theta.rows());
    return -n_effective * (log_det - trace_term) + n_edges * std::log(n_effective) +
           4.0 * gamma * n_edges * std::log(static_cast<double>(p));
}

namespace {

int max_feasible_rank(const BlockDesign& design) {
    int feasible = static_cast<int>(design.block(0).size());
    std::vector<bool> seen(design.p(), false);
    for (int idx : design.block(0)) seen[idx] = true;
    for (int k = 1; k < design.num_blocks(); ++k) {
        int overlap = 0;
        for (int idx : design.block(k))
            if (seen[idx]) ++overlap;
        feasible = std::min({feasible, overlap,
                             static_cast<int>(design.block(k).size())});
        for (int idx : design.block(k)) seen[idx] = true;
    }
    return feasible;
}

}  // namespace

int bic_rank(const MaskedCorrelation& masked, const BlockDesign& design,
             const std::vector<int>& rank_grid) {
    if (rank_grid.empty()) throw ValidationError("bic_rank: empty rank grid");
    const int feasible = max_feasible_rank(design);
    const int p = masked.p();

    long m = 0;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (masked.mask().observed(i, j)) ++m;
    if (m == 0) throw ValidationError("bic_rank: no observed off-diagonal entries");

    int best_rank = -1;
    double best_bic = 0.0;
    std::vector<int> grid = rank_grid;
    std::sort(grid.begin(), grid.end());
    for (int r : grid) {
        if (r < 1 || r > feasible) continue;
        const BsvdResult completion = bsvd_complete(masked, design, r);
        double rss = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                if (masked.mask().observed(i, j)) {
                    const double d = masked.values()(i, j) - completion.completed(i, j);
                    rss += d * d;
                }
        const double dof = static_cast<double>(p) * r - 0.5 * r * (r - 1);
        const double bic = m * std::log(std::max(rss, 1e-300) / m) +
                           dof * std::log(static_cast<double>(m));
        if (best_rank < 0 || bic < best_bic) {
            best_rank = r;
            best_bic = bic;
        }
    }
    if (best_rank < 0)
        throw ValidationError("bic_rank: no feasible rank in the grid");
    return best_rank;
}

StabilityResult stability_select(
    std::size_t grid_size,
    const std::function<EdgeSet(std::size_t, const std::vector<Matrix>&)>& runner,
    const std::vector<Matrix>& block_data, double subsample_fraction, int n_subsamples,
    std::uint64_t seed, double instability_threshold) {
    if (grid_size == 0) throw ValidationError("stability_select: empty grid");
    if (n_subsamples < 2)
        throw ValidationError("stability_select: need at least 2 subsamples");
    if (subsample_fraction <= 0.0 || subsample_fraction > 1.0)
        throw ValidationError("stability_select: fraction must be in (0, 1]");

    std::vector<std::vector<Matrix>> subsamples;
    for (int s = 0; s < n_subsamples; ++s) {
        std::vector<Matrix> sub;
        for (std::size_t k = 0; k < block_data.size(); ++k) {
            const Matrix& data = block_data[k];
            const int n = static_cast<int>(data.rows());
            const int keep =
                std::max(2, static_cast<int>(std::floor(subsample_fraction * n)));
            if (keep > n)
                throw ValidationError("stability_select: degenerate subsample");
            std::vector<int> rows(n);
            std::iota(rows.begin(), rows.end(), 0);
            Rng rng(derive_seed(seed, s + 1, k + 1));
            rng.shuffle(rows);
            Matrix picked(keep, data.cols());
            for (int r = 0; r < keep; ++r) picked.row(r) = data.row(rows[r]);
            sub.push_back(std::move(picked));
        }
        subsamples.push_back(std::move(sub));
    }

    StabilityResult out;
    out.instability.resize(grid_size, 0.0);
    for (std::size_t g = 0; g < grid_size; ++g) {
        std::vector<EdgeSet> selections;
        selections.reserve(n_subsamples);
        for (int s = 0; s < n_subsamples; ++s)
            selections.push_back(runner(g, subsamples[s]));
        const int p = selections.front().p();
        std::vector<std::vector<int>> count(p, std::vector<int>(p, 0));
        for (const EdgeSet& e : selections)
            for (const auto& [i, j] : e.pairs()) ++count[i][j];
        double total = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j) {
                const double xi = static_cast<double>(count[i][j]) / n_subsamples;
                total += 2.0 * xi * (1.0 - xi);
            }
        out.instability[g] = total / (static_cast<double>(p) * (p - 1) / 2.0);
    }

    out.monotonized.resize(grid_size);
    double running = 0.0;
    for (std::size_t g = 0; g < grid_size; ++g) {
        running = std::max(running, out.instability[g]);
        out.monotonized[g] = running;
    }
    out.selected_index = 0;
    out.all_unstable = out.monotonized[0] > instability_threshold;
    for (std::size_t g = 0; g < grid_size; ++g)
        if (out.monotonized[g] <= instability_threshold) out.selected_index = g;
    return out;
}

double match_edge_count_tau1(const Matrix& theta, const PairMask& mask, long target,
                             double rel_tol) {
    if (target < 0) throw ValidationError("match_edge_count_tau1: negative target");
    const int p = mask.p();
    double max_abs = 0.0;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (mask.observed(i, j)) max_abs = std::max(max_abs, std::fabs(theta(i, j)));
    auto count_at = [&](double tau) {
        long c = 0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                if (mask.observed(i, j) && std::fabs(theta(i, j)) > tau) ++c;
        return c;
    };
    const double lower = target * (1.0 - rel_tol);
    const double upper = target * (1.0 + rel_tol);
    double lo = 0.0, hi = max_abs + 1e-12;
    double best_tau = hi;
    long best_gap = std::numeric_limits<long>::max();
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const long c = count_at(mid);
        const long gap = std::labs(c - target);
        if (gap < best_gap) {
            best_gap = gap;
            best_tau = mid;
        }
        if (c >= lower && c <= upper) return mid;
        if (c > target)
            lo = mid;  // too many edges: raise the threshold
        else
            hi = mid;
    }
    return best_tau;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::madgq_npn: return "madgq-npn";
        case Method::bsvd_npn: return "bsvd-npn";
        case Method::zero_impute: return "zero-impute";
    }
    return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "madgq-npn") return Method::madgq_npn;
    if (name == "bsvd-npn") return Method::bsvd_npn;
    if (name == "zero-impute") return Method::zero_impute;
    return std::nullopt;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    const double hi = 0.5, lo = 0.008;
    const int n = 10;
    for (int i = 0; i < n; ++i)
        grid.push_back(hi * std::pow(lo / hi, static_cast<double>(i) / (n - 1)));
    return grid;
}

namespace {

std::vector<double> tau1_candidates(const Matrix& theta, const PairMask& mask,
                                    double tau2, int count) {
    std::vector<double> mags;
    const int p = mask.p();
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (mask.observed(i, j)) {
                const double x = std::fabs(theta(i, j));
                if (x > tau2) mags.push_back(x);
            }
    std::sort(mags.begin(), mags.end());
    mags.erase(std::unique(mags.begin(), mags.end()), mags.end());
    std::vector<double> cuts;
    if (mags.empty()) {
        cuts.push_back(2.0 * tau2);
        return cuts;
    }
    // Thresholds between consecutive magnitudes (and above the largest),
    // sampled evenly, largest first so smaller grid indices are sparser.
    std::vector<double> all;
    all.push_back(mags.back() * (1.0 + 1e-9) + 1e-12);
    for (std::size_t i = mags.size(); i-- > 1;)
        all.push_back(0.5 * (mags[i] + mags[i - 1]));
    all.push_back(0.5 * (tau2 + mags.front()));
    if (static_cast<int>(all.size()) <= count) return all;
    for (int t = 0; t < count; ++t) {
        const std::size_t idx =
            static_cast<std::size_t>(std::llround(static_cast<double>(t) *
                                                  (all.size() - 1) / (count - 1)));
        cuts.push_back(all[idx]);
    }
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

EdgeSet madgq_edges_at(const Matrix& theta, const std::vector<Matrix>& schur,
                       const BlockDesign& design, const PairMask& mask, double tau1,
                       double tau2) {
    EdgeSet edges = threshold_edges_O(theta, mask, tau1);
    const std::vector<int> w = superset_nodes(schur, design, tau2, tau1);
    std::vector<bool> in_w(design.p(), false);
    for (int i : w) in_w[i] = true;
    for (int i = 0; i < design.p(); ++i)
        for (int j = i + 1; j < design.p(); ++j)
            if (in_w[i] && in_w[j] && !mask.observed(i, j)) edges.insert(i, j);
    return edges;
}

}  // namespace

SweepRow evaluate_method(Method method, const ScenarioData& data,
                         const MaskedCorrelation& masked, const TuningGrids& grids,
                         const std::string& scenario_id, int o, int K, int replicate) {
    SweepRow row;
    row.scenario = scenario_id;
    row.method = method_name(method);
    row.o = o;
    row.K = K;
    row.replicate = replicate;

    const BlockDesign& design = data.design;
    const std::vector<double>& lambdas =
        grids.lambda_grid.empty() ? default_lambda_grid() : grids.lambda_grid;

    try {
        const MaskedCorrelation repaired = psd_repair(masked, design, 1e-4);
        std::vector<std::optional<EdgeSet>> candidates;

        if (method == Method::madgq_npn) {
            const double tau2 =
                MadgqThresholds::default_tau2(design.p(), design.min_sample_size());
            const auto constraint = zero_constraint_from_mask(repaired.mask());
            Matrix warm;
            for (double lam : lambdas) {
                SolverOptions options;
                options.tolerance = 1e-5;
                options.kkt_target = 1e-5;
                options.zero_constraint = constraint;
                if (warm.size() > 0) options.theta_init = &warm;
                try {
                    GlassoResult sol = solve(repaired.values(),
                                             PenaltyMatrix::uniform(design.p(), lam),
                                             options);
                    warm = sol.est.theta;
                    std::vector<Matrix> schur;
                    schur.reserve(design.num_blocks());
                    for (int k = 0; k < design.num_blocks(); ++k)
                        schur.push_back(schur_complement(sol.est.theta, design.block(k)));
                    for (double tau1 : tau1_candidates(sol.est.theta, repaired.mask(),
                                                       tau2, grids.tau1_grid_size))
                        candidates.emplace_back(madgq_edges_at(
                            sol.est.theta, schur, design, repaired.mask(), tau1, tau2));
                } catch (const NumericalError&) {
                    candidates.emplace_back(std::nullopt);
                }
            }
        } else {
            Matrix input;
            if (method == Method::bsvd_npn) {
                std::vector<int> rank_grid = grids.rank_grid;
                if (rank_grid.empty())
                    for (int r = 1; r <= 8; ++r) rank_grid.push_back(r);
                const int rank = bic_rank(repaired, design, rank_grid);
                const BsvdResult completion = bsvd_complete(repaired, design, rank);
                input = assemble_completed(repaired, completion);
            } else {
                input = repaired.values();
            }
            Matrix warm;
            for (double lam : lambdas) {
                SolverOptions options;
                options.tolerance = 1e-5;
                options.kkt_target = 1e-5;
                if (warm.size() > 0) options.theta_init = &warm;
                try {
                    GlassoResult sol =
                        solve(input, PenaltyMatrix::uniform(design.p(), lam), options);
                    warm = sol.est.theta;
                    candidates.emplace_back(sol.est.support);
                } catch (const NumericalError&) {
                    candidates.emplace_back(std::nullopt);
                }
            }
        }

        const OracleTuneResult tuned = tune_f1_oracle(
            candidates.size(),
            [&](std::size_t idx) { return candidates[idx]; }, data.truth);
        const PairMask mask = induced_pair_set(design);
        row.all = compare_edges(tuned.edges, data.truth);
        row.in_o = compare_edges(tuned.edges, data.truth, &mask, Restriction::observed);
        row.in_oc = compare_edges(tuned.edges, data.truth, &mask, Restriction::unobserved);
    } catch (const std::exception& e) {
        row.failed = true;
        log::warn(std::string("replicate failed: ") + e.what());
    }
    return row;
}

SweepResult run_sweep(const std::vector<ScenarioConfig>& scenarios,
                      const std::vector<Method>& methods, int replicates,
                      std::uint64_t root_seed, const TuningGrids& grids, int threads) {
    if (scenarios.empty() || methods.empty() || replicates < 1)
        throw ValidationError("run_sweep: need scenarios, methods, and replicates");

    const std::size_t units = scenarios.size() * static_cast<std::size_t>(replicates);
    SweepResult result;
    result.rows.resize(units * methods.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t unit = next.fetch_add(1);
            if (unit >= units) return;
            const std::size_t s = unit / replicates;
            const int rep = static_cast<int>(unit % replicates);
            const ScenarioConfig& config = scenarios[s];
            const std::uint64_t seed = derive_seed(root_seed, s + 1, rep + 1);
            try {
                const ScenarioData data = simulate_scenario(config, seed);
                const MaskedCorrelation masked = rank_correlation(
                    data.design, data.block_data, config.statistic);
                for (std::size_t m = 0; m < methods.size(); ++m)
                    result.rows[unit * methods.size() + m] =
                        evaluate_method(methods[m], data, masked, grids, config.id,
                                        config.o, config.K, rep);
            } catch (const std::exception& e) {
                log::warn(std::string("unit failed: ") + e.what());
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    SweepRow& row = result.rows[unit * methods.size() + m];
                    row.scenario = config.id;
                    row.method = method_name(methods[m]);
                    row.o = config.o;
                    row.K = config.K;
                    row.replicate = rep;
                    row.failed = true;
                }
            }
        }
    };

    const int n_threads = std::max(1, threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (const Method method : methods) {
            SweepCell cell;
            cell.scenario = scenarios[s].id;
            cell.method = method_name(method);
            std::vector<double> tprs, fdps, f1s;
            for (const SweepRow& row : result.rows) {
                if (row.scenario != cell.scenario || row.method != cell.method) continue;
                if (row.failed) {
                    ++cell.n_failed;
                    continue;
                }
                if (row.all.tpr_defined) tprs.push_back(row.all.tpr);
                fdps.push_back(row.all.fdp);
                f1s.push_back(row.all.f1);
                ++cell.n_used;
            }
            if (cell.n_failed * 5 > replicates)
                throw NumericalError("run_sweep: more than 20% of replicates failed in " +
                                     cell.scenario + "/" + cell.method);
            auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd,
                              bool& defined) {
                if (v.empty()) {
                    mean = 0.0;
                    sd = 0.0;
                    defined = false;
                    return;
                }
                mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
                if (v.size() < 2) {
                    sd = 0.0;
                    defined = false;
                    return;
                }
                double acc = 0.0;
                for (double x : v) acc += (x - mean) * (x - mean);
                sd = std::sqrt(acc / (v.size() - 1));
                defined = true;
            };
            bool def1 = true, def2 = true, def3 = true;
            mean_sd(tprs, cell.mean_tpr, cell.sd_tpr, def1);
            mean_sd(fdps, cell.mean_fdp, cell.sd_fdp, def2);
            mean_sd(f1s, cell.mean_f1, cell.sd_f1, def3);
            cell.sd_defined = def1 && def2 && def3;
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

}  // namespace quilt
