#include "gmmtree/engine.hpp"

#include "gmmtree/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace gmmtree {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Per-component products shared by every block: residuals r = x − μ with
// missing cells zeroed, q = Λ r, and rᵀΛr.
struct Residuals {
    RowMatrix r;
    RowMatrix q;
    Vector r_lambda_r;
};

Residuals residuals(const GaussianComponent& c, const Dataset& ds) {
    Residuals out;
    out.r = ds.values().rowwise() - c.mean.transpose();
    out.r = out.r.array().isNaN().select(0.0, out.r);
    out.q.noalias() = out.r * c.precision;
    out.r_lambda_r = out.r.cwiseProduct(out.q).rowwise().sum();
    return out;
}

// Densities and fill-ins for all samples of one block. With t = Λ_mo r_o and
// C = (Λ_mm)⁻¹ the workspace conditional covariance,
//   Σ_mo Σ_oo⁻¹ r_o = −C t   and   r_oᵀ Σ_oo⁻¹ r_o = r_oᵀ Λ_oo r_o − tᵀ C t,
// so each sample costs O(n_m²) once the shared products are known.
void evaluate_block(const GaussianComponent& c, const PatternWorkspace& ws, const Residuals& res,
                    const PatternSchedule& s, const ScheduleBlock& b, bool keep_filled,
                    ComponentSweep& out) {
    const auto n_o = static_cast<double>(ws.factor.dim());
    const auto n_m = static_cast<Eigen::Index>(ws.missing_order.size());
    const std::size_t* rows = s.sample_order.data() + b.offset;
    const double constant = n_o * std::log(2.0 * std::numbers::pi) + ws.factor.log_det();
    Vector t(n_m);
    Vector shift(n_m);
    for (std::size_t k = 0; k < b.count; ++k) {
        const auto row = static_cast<Eigen::Index>(rows[k]);
        for (Eigen::Index a = 0; a < n_m; ++a) {
            t[a] = res.q(row, ws.missing_order[static_cast<std::size_t>(a)]);
        }
        shift.noalias() = ws.cond_cov * t;
        const double quad = std::max(res.r_lambda_r[row] - t.dot(shift), 0.0);
        out.log_q[row] = ws.factor.dim() == 0 ? 0.0 : -0.5 * (constant + quad);
        if (keep_filled) {
            for (Eigen::Index a = 0; a < n_m; ++a) {
                const int v = ws.missing_order[static_cast<std::size_t>(a)];
                out.filled(row, v) = c.mean[v] - shift[a];
            }
        }
    }
}

void check_workspace(const GaussianComponent& c, const PatternWorkspace& ws, ComponentSweep& out) {
    const IndexList& perm = ws.factor.perm();
    if (!perm.empty()) {
        const double err = relative_frobenius(ws.factor.reconstruct(), gather(c.cov, perm, perm));
        out.max_factor_error = std::max(out.max_factor_error, err);
    }
    if (!ws.missing_order.empty()) {
        const SymMatrix direct = conditional_covariance(c.cov, ws.missing_order);
        const double err = relative_frobenius(ws.cond_cov, direct);
        out.max_cond_cov_error = std::max(out.max_cond_cov_error, err);
    }
}

ComponentSweep sweep_component(const GaussianComponent& c, const Dataset& ds, const PatternSchedule& s,
                               Engine engine, const SweepOptions& opts) {
    ComponentSweep out;
    out.log_q = Vector::Zero(static_cast<Eigen::Index>(ds.n()));
    if (opts.keep_filled) {
        out.filled = ds.values();
    }
    if (opts.keep_cond_cov) {
        out.cond_cov.resize(s.patterns.size());
    }

    struct Frame {
        PatternId id;
        PatternWorkspace ws;
        std::size_t pending_children;
    };
    std::vector<Frame> stack;
    const Residuals res = residuals(c, ds);

    for (const ScheduleBlock& b : s.blocks) {
        const MissingPattern& pattern = s.patterns[b.pattern];
        auto scratch = [&] {
            try {
                return workspace_from_scratch(c, pattern, b.pattern);
            } catch (const NotPositiveDefinite& e) {
                throw NotPositiveDefinite("pattern " + std::to_string(b.pattern) + " (missing mask " +
                                          pattern.mask.to_hex() + "): " + e.what());
            }
        };
        PatternWorkspace ws;
        if (engine == Engine::naive || !b.parent) {
            ws = scratch();
        } else {
            if (stack.empty() || stack.back().id != *b.parent) {
                throw std::logic_error("pattern schedule is not in pre-order");
            }
            Frame& top = stack.back();
            const bool last_child = --top.pending_children == 0;
            if (b.from_scratch) {
                ws = scratch();
            } else if (last_child) {
                ws = advance_workspace(std::move(top.ws), pattern, b.pattern, c);
            } else {
                ws = advance_workspace(top.ws, pattern, b.pattern, c);
            }
            if (last_child) {
                stack.pop_back();
            }
        }
        if (ws.fresh) {
            ++out.from_scratch_nodes;
        }

        evaluate_block(c, ws, res, s, b, opts.keep_filled, out);
        if (opts.check_workspaces) {
            check_workspace(c, ws, out);
        }
        const std::size_t children =
            engine == Engine::fast ? s.trees[b.tree].node(b.pattern).children.size() : 0;
        if (opts.keep_cond_cov) {
            if (children > 0) {
                out.cond_cov[b.pattern] = PatternCondCov{ws.missing_order, ws.cond_cov};
            } else {
                out.cond_cov[b.pattern] = PatternCondCov{std::move(ws.missing_order), std::move(ws.cond_cov)};
            }
        }
        if (children > 0) {
            stack.push_back(Frame{b.pattern, std::move(ws), children});
        }
    }
    return out;
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
    const double top = v.maxCoeff();
    if (!std::isfinite(top)) {
        return top;
    }
    return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

Sweep run_sweep(const MixtureModel& model, const Dataset& ds, const PatternSchedule& sched, Engine engine,
                const SweepOptions& opts) {
    if (ds.d() != model.d) {
        throw DimensionMismatch("model has d=" + std::to_string(model.d) + ", data has d=" +
                                std::to_string(ds.d()));
    }
    const std::size_t L = model.size();
    Sweep sweep;
    sweep.components.resize(L);
    auto one = [&](std::size_t j) {
        try {
            sweep.components[j] = sweep_component(model.components[j], ds, sched, engine, opts);
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("component " + std::to_string(j) + ", " + e.what());
        }
    };
    const std::size_t workers = std::min(opts.threads, L);
    if (workers <= 1) {
        for (std::size_t j = 0; j < L; ++j) {
            one(j);
        }
        return sweep;
    }
    // Components are independent; worker w takes j ≡ w (mod workers).
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t j = w; j < L; j += workers) {
                    one(j);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return sweep;
}

Responsibilities responsibilities_from(const MixtureModel& model, const Sweep& sweep) {
    const std::size_t L = model.size();
    const Eigen::Index n = L == 0 ? 0 : sweep.components.front().log_q.size();
    Responsibilities r;
    r.log_q.resize(n, static_cast<Eigen::Index>(L));
    r.p.resize(n, static_cast<Eigen::Index>(L));
    r.log_mix.resize(n);
    for (std::size_t j = 0; j < L; ++j) {
        r.log_q.col(static_cast<Eigen::Index>(j)) = sweep.components[j].log_q;
    }
    Vector joint(static_cast<Eigen::Index>(L));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            joint[static_cast<Eigen::Index>(j)] = model.components[j].log_weight + r.log_q(i, static_cast<Eigen::Index>(j));
        }
        const double lse = log_sum_exp(joint);
        r.log_mix[i] = lse;
        Vector p = (joint.array() - lse).exp();
        p /= p.sum();
        r.p.row(i) = p.transpose();
    }
    return r;
}

Responsibilities e_step(const MixtureModel& model, const Dataset& ds, const PatternSchedule& sched, Engine engine) {
    SweepOptions opts;
    opts.keep_filled = false;
    opts.keep_cond_cov = false;
    opts.threads = model.config.threads;
    return responsibilities_from(model, run_sweep(model, ds, sched, engine, opts));
}

MixtureModel m_step_from(const MixtureModel& model, const Sweep& sweep, const Responsibilities& resp,
                         const PatternSchedule& sched) {
    const std::size_t L = model.size();
    const auto d = static_cast<Eigen::Index>(model.d);
    const Eigen::Index n = resp.p.rows();
    const double n_real = static_cast<double>(n);
    MixtureModel next = model;

    std::vector<std::size_t> degenerate;
    for (std::size_t j = 0; j < L; ++j) {
        const ComponentSweep& cs = sweep.components[j];
        if (cs.filled.rows() != n || cs.cond_cov.size() != sched.patterns.size()) {
            throw std::logic_error("m_step needs a sweep that kept fill-ins and conditional covariances");
        }
        const Vector pj = resp.p.col(static_cast<Eigen::Index>(j));
        const double nj = pj.sum();
        GaussianComponent& comp = next.components[j];
        if (!(nj >= 1e-10 * n_real)) {
            degenerate.push_back(j);
            continue;
        }

        const Vector mean = cs.filled.transpose() * pj / nj;
        RowMatrix weighted = cs.filled.rowwise() - mean.transpose();
        weighted.array().colwise() *= pj.array().sqrt();
        SymMatrix cov = SymMatrix::Zero(d, d);
        cov.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose(), 1.0 / nj);
        cov = cov.selfadjointView<Eigen::Lower>();

        // Uncertainty of the conditional-mean fill-ins.
        for (const ScheduleBlock& b : sched.blocks) {
            const PatternCondCov& cc = cs.cond_cov[b.pattern];
            if (cc.missing_order.empty()) {
                continue;
            }
            double wsum = 0.0;
            for (std::size_t k = 0; k < b.count; ++k) {
                wsum += pj[static_cast<Eigen::Index>(sched.sample_order[b.offset + k])];
            }
            const double scale = wsum / nj;
            const auto n_m = static_cast<Eigen::Index>(cc.missing_order.size());
            for (Eigen::Index col = 0; col < n_m; ++col) {
                auto dst = cov.col(cc.missing_order[static_cast<std::size_t>(col)]);
                const auto src = cc.cov.col(col);
                for (Eigen::Index a = 0; a < n_m; ++a) {
                    dst[cc.missing_order[static_cast<std::size_t>(a)]] += scale * src[a];
                }
            }
        }

        comp.mean = mean;
        comp.cov = regularize(cov, model.config.ridge, model.config.pc_fraction);
        comp.log_weight = model.config.optimize_weights ? std::log(nj / n_real)
                                                        : -std::log(static_cast<double>(L));
    }

    if (!degenerate.empty()) {
        // Restart starved components at the worst-explained sample.
        Eigen::Index worst = 0;
        resp.log_mix.minCoeff(&worst);
        for (std::size_t j : degenerate) {
            GaussianComponent& comp = next.components[j];
            comp.mean = sweep.components[j].filled.row(worst).transpose();
            comp.log_weight = model.config.optimize_weights ? -std::log(n_real) : -std::log(static_cast<double>(L));
        }
        if (model.config.optimize_weights) {
            Vector lw(static_cast<Eigen::Index>(L));
            for (std::size_t j = 0; j < L; ++j) {
                lw[static_cast<Eigen::Index>(j)] = next.components[j].log_weight;
            }
            const double lse = log_sum_exp(lw);
            for (auto& comp : next.components) {
                comp.log_weight -= lse;
            }
        }
    }
    next.refresh();
    return next;
}

MixtureModel m_step(const MixtureModel& model, const Dataset& ds, const Responsibilities& resp,
                    const PatternSchedule& sched, Engine engine) {
    SweepOptions opts;
    opts.threads = model.config.threads;
    return m_step_from(model, run_sweep(model, ds, sched, engine, opts), resp, sched);
}

double log_likelihood(const MixtureModel& model, const Dataset& ds) {
    if (ds.n() == 0) {
        return 0.0;
    }
    PlanOptions plan;
    plan.max_patterns_per_tree = model.config.max_patterns_per_tree;
    plan.recompute_every = model.config.recompute_every;
    const PatternSchedule sched = plan_patterns(ds, plan);
    return e_step(model, ds, sched, model.config.engine).mean_log_likelihood();
}

FitResult fit(const Dataset& ds, const TrainConfig& config, const FitOptions& opts) {
    const auto start = Clock::now();
    config.validate();
    if (ds.d() < 1) {
        throw InvalidConfig("dataset has no columns");
    }
    if (ds.n() < config.components) {
        throw InvalidConfig("need at least as many samples as components");
    }
    if (opts.validation && opts.validation->d() != ds.d()) {
        throw DimensionMismatch("validation data has a different number of columns");
    }

    FitResult result;
    TrainTrace& trace = result.trace;

    auto t = Clock::now();
    std::vector<MissingPattern> patterns = extract_patterns(ds);
    trace.patterns_ms = elapsed_ms(t);

    t = Clock::now();
    std::vector<PatternTree> trees;
    for (const auto& group : cluster_patterns(patterns, config.max_patterns_per_tree)) {
        trees.push_back(build_mst(patterns, group, config.recompute_every));
    }
    trace.mst_ms = elapsed_ms(t);

    t = Clock::now();
    const PatternSchedule sched = schedule(std::move(trees), std::move(patterns));
    trace.schedule_ms = elapsed_ms(t);
    trace.n_patterns = sched.patterns.size();
    trace.n_trees = sched.trees.size();
    trace.mst_weight = sched.total_weight();

    t = Clock::now();
    MixtureModel model;
    if (opts.initial) {
        model = *opts.initial;
        if (model.d != ds.d()) {
            throw DimensionMismatch("initial model has a different dimension");
        }
        model.config = config;
        model.refresh();
    } else {
        model = kmeans_init(ds, config);
    }
    trace.init_ms = elapsed_ms(t);

    SweepOptions sweep_opts;
    sweep_opts.threads = config.threads;
    Sweep sweep = run_sweep(model, ds, sched, config.engine, sweep_opts);
    Responsibilities resp = responsibilities_from(model, sweep);
    double ll = resp.mean_log_likelihood();
    trace.initial_log_likelihood = ll;
    double val_ll = opts.validation ? log_likelihood(model, *opts.validation)
                                    : -std::numeric_limits<double>::infinity();

    trace.stop_reason = "max_iters";
    for (std::size_t it = 1; it <= config.max_iters; ++it) {
        IterationRecord rec;
        t = Clock::now();
        MixtureModel next = m_step_from(model, sweep, resp, sched);
        rec.m_step_ms = elapsed_ms(t);

        t = Clock::now();
        sweep = run_sweep(next, ds, sched, config.engine, sweep_opts);
        resp = responsibilities_from(next, sweep);
        rec.e_step_ms = elapsed_ms(t);
        rec.log_likelihood = resp.mean_log_likelihood();

        if (opts.observer) {
            opts.observer(it, next, resp);
        }
        bool stop_on_validation = false;
        if (opts.validation) {
            const double v = log_likelihood(next, *opts.validation);
            rec.validation_log_likelihood = v;
            stop_on_validation = v < val_ll;
            val_ll = v;
        }
        trace.iterations.push_back(rec);
        if (stop_on_validation) {
            // Keep the parameters from before the validation score dropped.
            trace.stop_reason = "validation";
            break;
        }
        model = std::move(next);
        const double gain = rec.log_likelihood - ll;
        ll = rec.log_likelihood;
        if (config.rel_ll_tolerance > 0.0 && gain < config.rel_ll_tolerance * std::abs(ll - gain)) {
            trace.stop_reason = "converged";
            break;
        }
    }
    result.model = std::move(model);
    trace.total_ms = elapsed_ms(start);
    return result;
}

}  // namespace gmmtree
