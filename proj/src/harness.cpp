#include "spnn/harness.hpp"

#include "spnn/couette.hpp"
#include "spnn/io.hpp"
#include "spnn/parallel.hpp"
#include "spnn/pendulum.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace spnn::harness {

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(base_lr >= 0.0)) throw std::invalid_argument("base_lr must be >= 0");
    if (!(lambda_d >= 0.0) || !(lambda_r >= 0.0)) throw std::invalid_argument("lambda_d and lambda_r must be >= 0");
    if (hidden_layers < 1) throw std::invalid_argument("hidden_layers must be >= 1");
    if (hidden_width < 1) throw std::invalid_argument("hidden_width must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0, 1)");
    if (!(divergence_threshold > 0.0)) throw std::invalid_argument("divergence_threshold must be positive");
    scheduler().validate();
}

nn::SchedulerSpec TrainConfig::scheduler() const {
    nn::SchedulerSpec s;
    s.base_lr = base_lr;
    s.gamma = gamma;
    if (!milestones.empty()) {
        s.milestones = milestones;
    } else if (epochs >= 3) {
        s.milestones = {epochs / 3, 2 * epochs / 3};
    }
    return s;
}

Transition build_transition(ad::Graph& g, const nn::NetParams& params, const Matrix& states,
                            double dt, Formalism f) {
    const Eigen::Index dim = states.rows();
    if (params.in_dim() != dim) {
        throw ShapeError("network input " + std::to_string(params.in_dim()) + " does not match state dim " +
                         std::to_string(dim));
    }
    Transition tr;
    tr.net = nn::bind(g, params);
    tr.z = g.input(states);
    tr.head = bracket::split_head(nn::forward(tr.net, tr.z), dim, f);
    tr.ops = bracket::assemble(tr.head);
    // Each column's energy depends on its own state only, so the gradient of
    // the batch sum is the per-state gradient.
    tr.grad_primary = ad::gradient(ad::sum(tr.head.energies[0]), tr.z);
    if (f == Formalism::Generic) {
        tr.grad_entropy = ad::gradient(ad::sum(tr.head.energies[1]), tr.z);
        tr.residuals = bracket::degeneracy_residuals(tr.ops, tr.grad_primary, tr.grad_entropy, f);
    }
    tr.next = bracket::step({tr.z, dt, tr.grad_primary, tr.grad_entropy}, tr.ops, f);
    return tr;
}

ad::Var data_loss(ad::Var pred, ad::Var truth) { return ad::sum(ad::square(pred - truth)); }

LossTerms combine_losses(ad::Var data, ad::Var degen, ad::Var reg, const TrainConfig& cfg, Formalism f) {
    LossTerms t{data, {}, reg, {}};
    t.total = cfg.lambda_d * data + cfg.lambda_r * reg;
    if (f == Formalism::Generic) {
        t.degen = degen;
        t.total = t.total + degen;
    }
    return t;
}

LossTerms losses(const Transition& tr, ad::Var truth, const TrainConfig& cfg) {
    ad::Var degen;
    if (tr.residuals) degen = bracket::degeneracy_loss(*tr.residuals);
    return combine_losses(data_loss(tr.next, truth), degen, nn::weight_penalty(tr.net), cfg,
                          tr.residuals ? Formalism::Generic : Formalism::SingleGenerator);
}

LossValues values(const LossTerms& t) {
    LossValues v;
    v.data = t.data.scalar();
    if (t.degen.valid()) v.degen = t.degen.scalar();
    v.reg = t.reg.scalar();
    v.total = t.total.scalar();
    return v;
}

namespace {

void check_trajectories(const data::Dataset& ds, const std::vector<Eigen::Index>& idx) {
    for (Eigen::Index i : idx) {
        if (i < 0 || i >= ds.n_traj) throw std::out_of_range("trajectory index " + std::to_string(i) + " out of range");
    }
}

struct OneStep {
    ad::Graph graph;
    Transition tr;
    LossTerms terms;
};

void build_one_step(OneStep& s, const nn::NetParams& params, const data::Dataset& ds, Eigen::Index traj,
                    const TrainConfig& cfg) {
    const auto block = ds.trajectory(traj);
    const Eigen::Index n = ds.n_time - 1;
    s.tr = build_transition(s.graph, params, block.leftCols(n), ds.dt, cfg.formalism);
    s.terms = losses(s.tr, s.graph.constant_matrix(block.rightCols(n)), cfg);
}

}  // namespace

LossValues teacher_forced_loss(const nn::NetParams& params, const data::Dataset& ds,
                               const std::vector<Eigen::Index>& trajectories, const TrainConfig& cfg) {
    check_trajectories(ds, trajectories);
    LossValues acc;
    if (cfg.formalism == Formalism::Generic) acc.degen = 0.0;
    for (Eigen::Index i : trajectories) {
        OneStep s;
        build_one_step(s, params, ds, i, cfg);
        const LossValues v = values(s.terms);
        acc.data += v.data;
        if (v.degen) *acc.degen += *v.degen;
        acc.reg = v.reg;
    }
    acc.total = cfg.lambda_d * acc.data + acc.degen.value_or(0.0) + cfg.lambda_r * acc.reg;
    return acc;
}

std::vector<double> teacher_forced_degeneracy(const nn::NetParams& params, const data::Dataset& ds,
                                              const std::vector<Eigen::Index>& trajectories) {
    check_trajectories(ds, trajectories);
    std::vector<double> out;
    for (Eigen::Index i : trajectories) {
        ad::Graph g;
        const auto block = ds.trajectory(i);
        const Transition tr = build_transition(g, params, block.leftCols(ds.n_time - 1), ds.dt, Formalism::Generic);
        const Matrix& rl = tr.residuals->r_L.value();
        const Matrix& rm = tr.residuals->r_M.value();
        for (Eigen::Index c = 0; c < rl.cols(); ++c) out.push_back(rl.col(c).squaredNorm() + rm.col(c).squaredNorm());
    }
    return out;
}

bool trivial_solution(double median_dissipative, double median_reversible) {
    return median_dissipative < kTrivialRatio * median_reversible;
}

Rollout rollout(const nn::NetParams& params, const Vector& z0, Eigen::Index n_states, double dt, Formalism f) {
    if (n_states < 1) throw std::invalid_argument("rollout: n_states must be >= 1");
    if (!z0.allFinite()) throw std::invalid_argument("rollout: initial state is not finite");
    const Eigen::Index d = z0.size();
    Rollout r;
    r.states.resize(d, n_states);
    r.states.col(0) = z0;
    Matrix z = z0;
    for (Eigen::Index k = 0; k < n_states; ++k) {
        ad::Graph g;
        Transition tr;
        try {
            tr = build_transition(g, params, z, dt, f);
        } catch (const NonFiniteError&) {
            if (k + 1 < n_states) {
                r.failure_step = k + 1;
                r.states.conservativeResize(d, k + 1);
                break;
            }
        }
        if (!tr.next.valid()) break;
        const Matrix L = bracket::unpack(tr.ops.L.value(), 0, d);
        const Matrix M = bracket::unpack(tr.ops.M.value(), 0, d);
        const Vector gp = tr.grad_primary.value().col(0);
        r.reversible_norm.push_back((L * gp).norm());
        if (f == Formalism::Generic) {
            const Vector gs = tr.grad_entropy.value().col(0);
            const Vector mgs = M * gs;
            r.dissipative_norm.push_back(mgs.norm());
            r.residual_L.push_back((L * gs).norm());
            r.residual_M.push_back((M * gp).norm());
            r.energy_rate.push_back(gp.dot(mgs));
        } else {
            r.dissipative_norm.push_back((M * gp).norm());
        }
        if (k + 1 == n_states) break;
        z = tr.next.value();
        r.states.col(k + 1) = z.col(0);
    }
    return r;
}

EnergyFn system_energy(const data::Dataset& ds) {
    if (ds.system == data::System::Pendulum) {
        const pendulum::Params p = pendulum::params_from_manifest(ds.manifest);
        return [p](const Matrix& states) {
            Vector e(states.cols());
            for (Eigen::Index n = 0; n < states.cols(); ++n) {
                try {
                    e(n) = pendulum::energies<double>(pendulum::State(states.col(n)), p).total;
                } catch (const pendulum::DomainError&) {
                    e(n) = std::numeric_limits<double>::infinity();
                }
            }
            return e;
        };
    }
    return [](const Matrix& states) -> Vector { return states.row(3).transpose(); };
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (lo + m);
    }
    return m;
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal series of length >= 2");
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

RunMetrics evaluate(const nn::NetParams& params, const data::Dataset& ds,
                    const std::vector<Eigen::Index>& trajectories, Formalism f, const EnergyFn& energy) {
    check_trajectories(ds, trajectories);
    RunMetrics m;
    m.formalism = f;
    m.mse_per_variable = Vector::Zero(ds.dim);
    std::vector<double> totals, energy_errors, diss, rev;
    int ok = 0;
    for (Eigen::Index i : trajectories) {
        const auto truth = ds.trajectory(i);
        const Rollout r = rollout(params, truth.col(0), ds.n_time, ds.dt, f);
        TrajectoryMetrics t;
        t.trajectory = i;
        t.failure_step = r.failure_step;
        t.residual_L = r.residual_L;
        t.residual_M = r.residual_M;
        // Operator norms are taken at finite states, so a failed rollout still
        // informs the trivial-solution check.
        diss.insert(diss.end(), r.dissipative_norm.begin(), r.dissipative_norm.end());
        rev.insert(rev.end(), r.reversible_norm.begin(), r.reversible_norm.end());
        if (r.failure_step >= 0) {
            ++m.failed_rollouts;
            m.trajectories.push_back(std::move(t));
            continue;
        }
        const Matrix diff = r.states - truth;
        // Averaged over the predicted snapshots; z0 is given.
        t.mse = diff.array().square().rowwise().sum() / static_cast<double>(ds.n_time - 1);
        t.mse_total = t.mse.mean();
        const Vector e_net = energy(r.states);
        const Vector e_gt = energy(truth);
        for (Eigen::Index n = 0; n < ds.n_time; ++n) t.energy_error.push_back(std::abs(e_net(n) - e_gt(n)));
        m.mse_per_variable += t.mse;
        totals.push_back(t.mse_total);
        energy_errors.insert(energy_errors.end(), t.energy_error.begin(), t.energy_error.end());
        ++ok;
        m.trajectories.push_back(std::move(t));
    }
    if (ok > 0) {
        m.mse_per_variable /= static_cast<double>(ok);
    } else {
        m.mse_per_variable.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    m.median_mse = median(totals);
    m.median_energy_error = median(energy_errors);
    m.median_dissipative = median(diss);
    m.median_reversible = median(rev);
    m.trivial_solution = !rev.empty() && trivial_solution(m.median_dissipative, m.median_reversible);
    return m;
}

namespace {

std::vector<double> energy_rates(const nn::NetParams& params, const data::Dataset& ds,
                                 const std::vector<Eigen::Index>& idx) {
    std::vector<double> out;
    for (Eigen::Index i : idx) {
        const Rollout r = rollout(params, ds.trajectory(i).col(0), ds.n_time, ds.dt, Formalism::Generic);
        for (double v : r.energy_rate) out.push_back(std::abs(v));
    }
    return out;
}

bool diverged(const LossValues& v, double threshold) {
    return !std::isfinite(v.total) || v.total > threshold;
}

}  // namespace

TrainResult train(const data::Dataset& ds, const TrainConfig& cfg, const data::Split& split,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    ds.validate();
    check_trajectories(ds, split.train);
    check_trajectories(ds, split.test);
    if (split.train.empty()) throw std::invalid_argument("train: empty training partition");

    TrainResult res;
    res.split = split;
    const auto layout = nn::mlp_layout(ds.dim, cfg.hidden_layers, cfg.hidden_width,
                                       bracket::head_width(ds.dim, cfg.formalism));
    res.params = nn::init_kaiming(layout, cfg.seed);
    res.initial = res.params;
    res.metrics.formalism = cfg.formalism;
    const nn::SchedulerSpec sched = cfg.scheduler();
    const bool generic = cfg.formalism == Formalism::Generic;
    const bool monitor = generic && cfg.monitor_degeneracy;

    auto diagnose = [&](long long epoch) {
        if (!monitor) return;
        CheckpointDiagnostic d;
        d.epoch = epoch;
        d.degen_loss = *teacher_forced_loss(res.params, ds, split.train, cfg).degen;
        d.median_energy_rate = median(energy_rates(res.params, ds, split.train));
        res.metrics.checkpoints.push_back(d);
    };
    diagnose(0);

    nn::AdamState adam = nn::adam_init(res.params);
    auto& curves = res.metrics.curves;
    try {
        for (long long epoch = 0; epoch < cfg.epochs; ++epoch) {
            const double lr = nn::scheduled_lr(sched, epoch);
            LossValues acc;
            if (generic) acc.degen = 0.0;
            bool first = true;
            for (Eigen::Index i : split.train) {
                OneStep s;
                build_one_step(s, res.params, ds, i, cfg);
                const LossValues v = values(s.terms);
                if (diverged(v, cfg.divergence_threshold)) {
                    throw NonFiniteError(s.terms.total.id().index,
                                         "loss " + io::format_double(v.total) + " at epoch " + std::to_string(epoch) +
                                             ", trajectory " + std::to_string(i));
                }
                acc.data += v.data;
                if (v.degen) *acc.degen += *v.degen;
                if (first) acc.reg = v.reg;
                first = false;
                const nn::NetParams grads = nn::collect_gradients(s.terms.total, s.tr.net, res.params);
                nn::adam_step(res.params, grads, adam, lr);
            }
            acc.total = cfg.lambda_d * acc.data + acc.degen.value_or(0.0) + cfg.lambda_r * acc.reg;
            curves.data.push_back(acc.data);
            if (acc.degen) curves.degen.push_back(*acc.degen);
            curves.reg.push_back(acc.reg);
            curves.total.push_back(acc.total);
            res.epochs_run = epoch + 1;
            if (on_epoch) on_epoch(epoch, acc);
            if (diverged(acc, cfg.divergence_threshold)) {
                throw NonFiniteError(0, "epoch loss " + io::format_double(acc.total) + " at epoch " + std::to_string(epoch));
            }
            const long long done = epoch + 1;
            if (std::find(sched.milestones.begin(), sched.milestones.end(), done) != sched.milestones.end() &&
                done < cfg.epochs) {
                res.milestones.push_back({done, res.params});
                diagnose(done);
            }
        }
    } catch (const NonFiniteError& e) {
        res.status = TrainStatus::Diverged;
        res.message = e.what();
        return res;
    }
    res.milestones.push_back({cfg.epochs, res.params});
    if (cfg.epochs > 0) diagnose(cfg.epochs);
    return res;
}

TrainResult train(const data::Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    return train(ds, cfg, data::split(ds, {cfg.train_fraction, cfg.split_seed}), on_epoch);
}

// ---------------------------------------------------------------------------
// Export

std::string csv_header() { return "run_id,cell,metric,trajectory,variable,value\n"; }

namespace {

void row(std::string& out, const std::string& run, const std::string& cell, const std::string& metric,
         const std::string& traj, const std::string& var, double v) {
    out += run;
    out += ',';
    out += cell;
    out += ',';
    out += metric;
    out += ',';
    out += traj;
    out += ',';
    out += var;
    out += ',';
    out += io::format_double(v);
    out += '\n';
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

}  // namespace

void append_csv(std::string& out, const std::string& run_id, const std::string& cell, const RunMetrics& m) {
    const std::string run = quote(run_id), c = quote(cell);
    auto curve = [&](const char* name, const std::vector<double>& v) {
        for (std::size_t e = 0; e < v.size(); ++e) row(out, run, c, name, "", std::to_string(e), v[e]);
    };
    curve("loss_data", m.curves.data);
    curve("loss_degen", m.curves.degen);
    curve("loss_reg", m.curves.reg);
    curve("loss_total", m.curves.total);
    for (const auto& d : m.checkpoints) {
        row(out, run, c, "checkpoint_degen_loss", "", std::to_string(d.epoch), d.degen_loss);
        row(out, run, c, "checkpoint_energy_rate", "", std::to_string(d.epoch), d.median_energy_rate);
    }
    for (const auto& t : m.trajectories) {
        const std::string tr = std::to_string(t.trajectory);
        row(out, run, c, "failure_step", tr, "", static_cast<double>(t.failure_step));
        if (t.failure_step >= 0) continue;
        for (Eigen::Index k = 0; k < t.mse.size(); ++k) row(out, run, c, "mse", tr, std::to_string(k), t.mse(k));
        row(out, run, c, "mse_total", tr, "", t.mse_total);
        for (std::size_t n = 0; n < t.energy_error.size(); ++n) {
            row(out, run, c, "energy_error", tr, std::to_string(n), t.energy_error[n]);
        }
        if (!t.residual_L.empty()) {
            row(out, run, c, "residual_L_median", tr, "", median(t.residual_L));
            row(out, run, c, "residual_M_median", tr, "", median(t.residual_M));
        }
    }
    row(out, run, c, "failed_rollouts", "", "", m.failed_rollouts);
    row(out, run, c, "median_mse", "", "", m.median_mse);
    row(out, run, c, "median_energy_error", "", "", m.median_energy_error);
    row(out, run, c, "median_dissipative", "", "", m.median_dissipative);
    row(out, run, c, "median_reversible", "", "", m.median_reversible);
    row(out, run, c, "trivial_solution", "", "", m.trivial_solution ? 1.0 : 0.0);
    for (const auto& [k, v] : m.scalars) row(out, run, c, quote(k), "", "", v);
}

namespace {

nlohmann::json num(double v) {
    if (std::isfinite(v)) return v;
    return io::format_double(v);
}

}  // namespace

std::string summary_json(const std::string& run_id, const TrainConfig& cfg, const RunMetrics& m,
                         const TrainResult* tr) {
    nlohmann::ordered_json j;
    j["run_id"] = run_id;
    j["formalism"] = bracket::formalism_name(cfg.formalism);
    j["config"] = {{"epochs", cfg.epochs},
                   {"base_lr", cfg.base_lr},
                   {"milestones", cfg.scheduler().milestones},
                   {"gamma", cfg.gamma},
                   {"lambda_d", cfg.lambda_d},
                   {"lambda_r", cfg.lambda_r},
                   {"hidden_layers", cfg.hidden_layers},
                   {"hidden_width", cfg.hidden_width},
                   {"seed", cfg.seed},
                   {"train_fraction", cfg.train_fraction},
                   {"split_seed", cfg.split_seed}};
    if (tr) {
        j["status"] = tr->status == TrainStatus::Ok ? "ok" : "diverged";
        if (!tr->message.empty()) j["message"] = tr->message;
        j["epochs_run"] = tr->epochs_run;
        j["split"] = {{"train", tr->split.train}, {"test", tr->split.test}};
    }
    auto last = [](const std::vector<double>& v) { return v.empty() ? nlohmann::json() : num(v.back()); };
    auto firstv = [](const std::vector<double>& v) { return v.empty() ? nlohmann::json() : num(v.front()); };
    j["loss"] = {{"data_first", firstv(m.curves.data)},
                 {"data_last", last(m.curves.data)},
                 {"degen_first", firstv(m.curves.degen)},
                 {"degen_last", last(m.curves.degen)},
                 {"total_last", last(m.curves.total)}};
    nlohmann::json ck = nlohmann::json::array();
    for (const auto& d : m.checkpoints) {
        ck.push_back({{"epoch", d.epoch}, {"degen_loss", num(d.degen_loss)}, {"median_energy_rate", num(d.median_energy_rate)}});
    }
    j["checkpoints"] = ck;
    std::vector<nlohmann::json> mse;
    for (Eigen::Index k = 0; k < m.mse_per_variable.size(); ++k) mse.push_back(num(m.mse_per_variable(k)));
    j["mse_per_variable"] = mse;
    j["median_mse"] = num(m.median_mse);
    j["median_energy_error"] = num(m.median_energy_error);
    j["median_dissipative"] = num(m.median_dissipative);
    j["median_reversible"] = num(m.median_reversible);
    j["trivial_solution"] = m.trivial_solution;
    j["failed_rollouts"] = m.failed_rollouts;
    j["test_trajectories"] = m.trajectories.size();
    for (const auto& [k, v] : m.scalars) j["scalars"][k] = num(v);
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

template <typename T>
std::vector<T> or_base(const std::vector<T>& v, const T& base) {
    return v.empty() ? std::vector<T>{base} : v;
}

std::string short_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string data_key(const DataSpec& d) {
    std::ostringstream os;
    os << data::system_name(d.system) << ':' << d.n_traj << ':' << d.snapshots << ':' << io::format_double(d.horizon)
       << ':' << io::format_double(d.Re) << ':' << io::format_double(d.We) << ':' << d.K << ':' << d.seed << ':'
       << io::format_double(d.max_step) << ':' << d.n_test;
    return os.str();
}

}  // namespace

std::vector<SweepCell> SweepSpec::cells() const {
    std::vector<SweepCell> out;
    const auto fs = formalisms.empty() ? std::vector<Formalism>{base_train.formalism} : formalisms;
    for (Formalism f : fs)
        for (long long ep : or_base(epochs, base_train.epochs))
            for (double lr : or_base(learning_rates, base_train.base_lr))
                for (Eigen::Index w : or_base(widths, base_train.hidden_width))
                    for (int ns : or_base(snapshots, base_data.snapshots))
                        for (int nt : or_base(trajectories, base_data.n_traj))
                            for (double re : or_base(reynolds, base_data.Re))
                                for (double we : or_base(weissenberg, base_data.We)) {
                                    SweepCell c;
                                    c.train = base_train;
                                    c.train.formalism = f;
                                    c.train.epochs = ep;
                                    c.train.base_lr = lr;
                                    c.train.hidden_width = w;
                                    c.data = base_data;
                                    c.data.snapshots = ns;
                                    c.data.n_traj = nt;
                                    c.data.Re = re;
                                    c.data.We = we;
                                    std::ostringstream id;
                                    id << bracket::formalism_name(f) << "_ep" << ep << "_lr" << short_double(lr) << "_w" << w
                                       << "_nt" << ns << "_ntraj" << nt;
                                    if (c.data.system == data::System::Couette) {
                                        id << "_Re" << short_double(re) << "_We" << short_double(we);
                                    }
                                    c.id = id.str();
                                    out.push_back(std::move(c));
                                }
    return out;
}

data::Dataset make_dataset(const DataSpec& spec, unsigned jobs) {
    if (spec.n_traj < 1 || spec.snapshots < 2) throw std::invalid_argument("data spec: need n_traj >= 1 and snapshots >= 2");
    if (spec.system == data::System::Pendulum) {
        pendulum::GenerateSpec g;
        g.n_traj = spec.n_traj + std::max(spec.n_test, 0);
        g.horizon = spec.horizon;
        g.dt_out = spec.horizon / spec.snapshots;
        if (!(spec.max_step > 0.0)) throw std::invalid_argument("data spec: max_step must be positive");
        g.substeps = static_cast<int>(std::ceil(g.dt_out / spec.max_step - 1e-9));
        g.seed = spec.seed;
        g.jobs = jobs;
        return pendulum::generate(pendulum::Params{}, g).dataset;
    }
    couette::Params p;
    p.Nx = spec.n_traj;
    p.snapshots = spec.snapshots;
    p.Re = spec.Re;
    p.We = spec.We;
    p.K = spec.K;
    return couette::generate(p, spec.seed, jobs).dataset;
}

data::Split cell_split(const DataSpec& spec, const data::Dataset& ds, const TrainConfig& cfg) {
    if (spec.system == data::System::Pendulum && spec.n_test > 0) {
        if (ds.n_traj != spec.n_test + spec.n_traj) throw std::invalid_argument("cell_split: dataset size mismatch");
        data::Split s;
        for (Eigen::Index i = 0; i < spec.n_test; ++i) s.test.push_back(i);
        for (Eigen::Index i = spec.n_test; i < ds.n_traj; ++i) s.train.push_back(i);
        return s;
    }
    return data::split(ds, {cfg.train_fraction, cfg.split_seed});
}

SweepRow run_cell(const SweepCell& cell, const data::Dataset* prebuilt) {
    SweepRow r;
    r.cell = cell;
    try {
        data::Dataset own;
        if (!prebuilt) own = make_dataset(cell.data);
        const data::Dataset& ds = prebuilt ? *prebuilt : own;
        const TrainResult tr = train(ds, cell.train, cell_split(cell.data, ds, cell.train));
        if (tr.status != TrainStatus::Ok) {
            r.error = "diverged: " + tr.message;
            r.metrics = tr.metrics;
            return r;
        }
        RunMetrics m = evaluate(tr.params, ds, tr.split.test, cell.train.formalism, system_energy(ds));
        m.curves = tr.metrics.curves;
        m.checkpoints = tr.metrics.checkpoints;
        for (const auto& t : m.trajectories) {
            r.test_mse.push_back(t.failure_step >= 0 ? std::numeric_limits<double>::infinity() : t.mse_total);
        }
        r.metrics = std::move(m);
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

std::vector<SweepRow> sweep(const SweepSpec& spec, unsigned jobs) {
    const auto cells = spec.cells();
    std::map<std::string, data::Dataset> datasets;
    std::map<std::string, std::string> data_errors;
    for (const auto& c : cells) {
        const std::string k = data_key(c.data);
        if (datasets.count(k) || data_errors.count(k)) continue;
        try {
            datasets.emplace(k, make_dataset(c.data, jobs));
        } catch (const std::exception& e) {
            data_errors.emplace(k, e.what());
        }
    }
    std::vector<SweepRow> rows(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const std::string k = data_key(cells[i].data);
        if (auto it = data_errors.find(k); it != data_errors.end()) {
            rows[i].cell = cells[i];
            rows[i].error = "dataset: " + it->second;
            return;
        }
        rows[i] = run_cell(cells[i], &datasets.at(k));
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "cell,formalism,epochs,lr,width,snapshots,trajectories,Re,We,status,metric,trajectory,value\n";
    for (const auto& r : rows) {
        const auto& c = r.cell;
        std::string prefix = quote(c.id) + ',' + bracket::formalism_name(c.train.formalism) + ',' +
                             std::to_string(c.train.epochs) + ',' + io::format_double(c.train.base_lr) + ',' +
                             std::to_string(c.train.hidden_width) + ',' + std::to_string(c.data.snapshots) + ',' +
                             std::to_string(c.data.n_traj) + ',' + io::format_double(c.data.Re) + ',' +
                             io::format_double(c.data.We) + ',' + (r.ok ? "ok" : "failed") + ',';
        if (!r.ok) {
            out += prefix + "error,," + quote(r.error) + '\n';
            continue;
        }
        for (std::size_t t = 0; t < r.test_mse.size(); ++t) {
            out += prefix + "test_mse," + std::to_string(r.metrics.trajectories[t].trajectory) + ',' +
                   io::format_double(r.test_mse[t]) + '\n';
        }
        out += prefix + "median_mse,," + io::format_double(r.metrics.median_mse) + '\n';
        out += prefix + "median_energy_error,," + io::format_double(r.metrics.median_energy_error) + '\n';
        out += prefix + "failed_rollouts,," + std::to_string(r.metrics.failed_rollouts) + '\n';
        out += prefix + "trivial_solution,," + (r.metrics.trivial_solution ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace spnn::harness
