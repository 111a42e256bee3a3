#include "cli.hpp"

#include "config.hpp"

#include "spnn/couette.hpp"
#include "spnn/dataset.hpp"
#include "spnn/harness.hpp"
#include "spnn/io.hpp"
#include "spnn/nn.hpp"
#include "spnn/pendulum.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>

namespace spnn::cli {

namespace fs = std::filesystem;

namespace {

// Raised when a run finished but hit a numerical failure (exit 2).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::string paper_defaults;
    std::vector<std::string> overrides;  // key=value
    std::optional<long long> seed;
    std::optional<unsigned> jobs;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, bool needs_out) {
    sub->add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--paper-defaults", c.paper_defaults, "published settings")
        ->check(CLI::IsMember({"pendulum", "couette"}));
    sub->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
    sub->add_option("--seed", c.seed, "random seed");
    auto* o = sub->add_option("--out", c.out, "output directory");
    if (needs_out) o->required();
}

Config resolve(const Common& c) {
    Config cfg = Config::defaults();
    if (!c.paper_defaults.empty()) cfg.merge(Config::paper_defaults(c.paper_defaults));
    if (!c.config_path.empty()) cfg.load_file(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(io::trim(kv.substr(0, eq)), io::trim(kv.substr(eq + 1)));
    }
    if (c.seed) cfg.set("seed", std::to_string(*c.seed));
    if (c.jobs) cfg.set("jobs", std::to_string(*c.jobs));
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

// Resolved config, seeds and content hashes of every input and output.
void write_run_record(const fs::path& dir, const std::string& command, const Config& cfg,
                      const std::vector<std::string>& inputs, const std::vector<fs::path>& outputs) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = cfg.values();
    j["seeds"] = {{"seed", cfg.integer("seed")}, {"split_seed", cfg.integer("train.split_seed")}};
    std::string digest_src;
    for (const auto& [k, v] : cfg.values()) digest_src += k + "=" + v + "\n";
    nlohmann::ordered_json in = nlohmann::ordered_json::array();
    for (const auto& path : inputs) {
        const std::string h = io::sha256_file(path);
        in.push_back({{"path", path}, {"sha256", h}});
        digest_src += h + "\n";
    }
    j["inputs"] = in;
    j["input_hash"] = io::sha256_hex(digest_src);
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const auto& p : outputs) outs.push_back({{"file", p.filename().string()}, {"sha256", io::sha256_file(p.string())}});
    j["outputs"] = outs;
    write_text(dir / "run_record.json", j.dump(2) + "\n");
}

std::string join(const std::vector<Eigen::Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<Eigen::Index> parse_indices(const std::string& s) {
    std::vector<Eigen::Index> out;
    for (const auto& part : io::split(s, ',')) {
        const std::string t = io::trim(part);
        if (!t.empty()) out.push_back(io::parse_int(t));
    }
    return out;
}

int cmd_gen_pendulum(const Common& c, std::ostream& out) {
    const Config cfg = resolve(c);
    const auto params = cfg.pendulum_params();
    const auto spec = cfg.pendulum_spec();
    const fs::path dir = prepare_out(c.out);
    const auto g = pendulum::generate(params, spec);
    const fs::path file = dir / "pendulum.dataset";
    data::save(g.dataset, file.string());
    write_run_record(dir, "gen-pendulum", cfg, {}, {file});
    out << "wrote " << file.string() << " shape " << g.dataset.shape_string() << " rejections " << g.rejections << "\n";
    return kExitOk;
}

int cmd_gen_couette(const Common& c, std::ostream& out) {
    const Config cfg = resolve(c);
    const auto params = cfg.couette_params();
    const fs::path dir = prepare_out(c.out);
    const auto g = couette::generate(params, static_cast<std::uint64_t>(cfg.integer("seed")),
                                     static_cast<unsigned>(cfg.integer("jobs")));
    const fs::path file = dir / "couette.dataset";
    data::save(g.dataset, file.string());
    write_run_record(dir, "gen-couette", cfg, {}, {file});
    out << "wrote " << file.string() << " shape " << g.dataset.shape_string() << "\n";
    return kExitOk;
}

std::map<std::string, std::string> checkpoint_manifest(const Config& cfg, const data::Dataset& ds,
                                                       const std::string& dataset_path, const data::Split& split,
                                                       long long epoch) {
    std::map<std::string, std::string> m;
    for (const auto& [k, v] : cfg.values()) {
        if (k.rfind("train.", 0) == 0) m[k] = v;
    }
    m["seed"] = cfg.str("seed");
    m["epoch"] = std::to_string(epoch);
    m["system"] = data::system_name(ds.system);
    m["dt"] = io::format_double(ds.dt);
    m["dataset_sha256"] = io::sha256_file(dataset_path);
    m["split.train"] = join(split.train);
    m["split.test"] = join(split.test);
    return m;
}

int cmd_train(const Common& c, const std::string& dataset_path, const std::string& formalism, std::ostream& out) {
    Config cfg = resolve(c);
    if (!formalism.empty()) cfg.set("train.formalism", formalism);
    const auto tc = cfg.train();
    const data::Dataset ds = data::load(dataset_path);
    ds.validate();
    const fs::path dir = prepare_out(c.out);

    const harness::TrainResult tr = harness::train(ds, tc);
    std::vector<fs::path> outputs;
    for (const auto& m : tr.milestones) {
        const fs::path p = m.epoch == tc.epochs ? dir / "model.ckpt" : dir / ("model_epoch" + std::to_string(m.epoch) + ".ckpt");
        nn::save_checkpoint(p.string(), m.params, checkpoint_manifest(cfg, ds, dataset_path, tr.split, m.epoch));
        outputs.push_back(p);
    }
    const std::string run_id = "train-" + bracket::formalism_name(tc.formalism) + "-seed" + cfg.str("seed");
    std::string csv = harness::csv_header();
    harness::append_csv(csv, run_id, "", tr.metrics);
    write_text(dir / "losses.csv", csv);
    write_text(dir / "summary.json", harness::summary_json(run_id, tc, tr.metrics, &tr));
    outputs.push_back(dir / "losses.csv");
    outputs.push_back(dir / "summary.json");
    write_run_record(dir, "train", cfg, {dataset_path}, outputs);
    if (tr.status != harness::TrainStatus::Ok) {
        throw NumericalFailure("training diverged after " + std::to_string(tr.epochs_run) + " epochs: " + tr.message);
    }
    out << "trained " << tc.epochs << " epochs; final data loss "
        << (tr.metrics.curves.data.empty() ? std::string("n/a") : io::format_double(tr.metrics.curves.data.back())) << "\n";
    return kExitOk;
}

int cmd_eval(const Common& c, const std::string& dataset_path, const std::string& ckpt_path, const std::string& subset,
             std::ostream& out) {
    Config cfg = resolve(c);
    const nn::Checkpoint ck = nn::load_checkpoint(ckpt_path);
    for (const auto& [k, v] : ck.manifest) {
        if (k.rfind("train.", 0) == 0) cfg.set(k, v);
    }
    const auto tc = cfg.train();
    const data::Dataset ds = data::load(dataset_path);
    ds.validate();
    if (ck.params.in_dim() != ds.dim) throw std::invalid_argument("checkpoint input size does not match the dataset dimension");

    std::vector<Eigen::Index> idx;
    auto from_manifest = [&](const char* key) {
        auto it = ck.manifest.find(key);
        return it == ck.manifest.end() ? std::vector<Eigen::Index>{} : parse_indices(it->second);
    };
    if (subset == "all") {
        for (Eigen::Index i = 0; i < ds.n_traj; ++i) idx.push_back(i);
    } else {
        idx = from_manifest(subset == "train" ? "split.train" : "split.test");
        if (idx.empty()) throw std::invalid_argument("checkpoint records no '" + subset + "' split; use --trajectories all");
    }
    const fs::path dir = prepare_out(c.out);
    const harness::RunMetrics m = harness::evaluate(ck.params, ds, idx, tc.formalism, harness::system_energy(ds));
    const std::string run_id = "eval-" + bracket::formalism_name(tc.formalism);
    std::string csv = harness::csv_header();
    harness::append_csv(csv, run_id, subset, m);
    write_text(dir / "metrics.csv", csv);
    write_text(dir / "summary.json", harness::summary_json(run_id, tc, m));
    write_run_record(dir, "eval", cfg, {dataset_path, ckpt_path}, {dir / "metrics.csv", dir / "summary.json"});
    out << "evaluated " << idx.size() << " trajectories; median MSE " << io::format_double(m.median_mse) << "; failed "
        << m.failed_rollouts << (m.trivial_solution ? "; trivial solution (M = 0) detected" : "") << "\n";
    return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& formalism, std::ostream& out) {
    Config cfg = resolve(c);
    if (!formalism.empty()) cfg.set("sweep.formalisms", formalism);
    const auto spec = cfg.sweep();
    const auto cells = spec.cells();
    const fs::path dir = prepare_out(c.out);
    const auto rows = harness::sweep(spec, static_cast<unsigned>(cfg.integer("jobs")));
    std::string long_csv = harness::csv_header();
    int failed = 0;
    for (const auto& r : rows) {
        if (!r.ok) ++failed;
        harness::append_csv(long_csv, "sweep", r.cell.id, r.metrics);
    }
    write_text(dir / "sweep.csv", harness::sweep_csv(rows));
    write_text(dir / "metrics.csv", long_csv);
    write_run_record(dir, "sweep", cfg, {}, {dir / "sweep.csv", dir / "metrics.csv"});
    out << "sweep: " << rows.size() << " cells, " << failed << " failed\n";
    return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::string first;
    std::getline(in, first);
    in.close();
    if (first.rfind("spnn-checkpoint", 0) == 0) {
        const auto ck = nn::load_checkpoint(path);
        out << "checkpoint " << path << "\n";
        for (const auto& [k, v] : ck.manifest) out << k << "=" << v << "\n";
        out << "parameters=" << ck.params.parameter_count() << "\n";
        return kExitOk;
    }
    const auto ds = data::load(path);
    out << "dataset " << path << "\n";
    out << "system=" << data::system_name(ds.system) << "\n";
    out << "shape=" << ds.shape_string() << "\n";
    out << "dt=" << io::format_double(ds.dt) << "\n";
    for (const auto& [k, v] : ds.manifest) out << k << "=" << v << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Structure-preserving neural networks: data generation, training, evaluation and sweeps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "spnn 0.1");

    Common gp, gc, tr, ev, sw;
    auto* gen_p = app.add_subcommand("gen-pendulum", "generate double thermoelastic pendulum trajectories");
    add_common(gen_p, gp, true);
    gen_p->add_option("--jobs", gp.jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* gen_c = app.add_subcommand("gen-couette", "generate Oldroyd-B startup Couette flow data");
    add_common(gen_c, gc, true);
    gen_c->add_option("--jobs", gc.jobs, "worker threads")->check(CLI::PositiveNumber);

    std::string train_dataset, train_formalism;
    auto* train = app.add_subcommand("train", "train a bracket network on a dataset");
    add_common(train, tr, true);
    train->add_option("--dataset", train_dataset, "dataset file")->required()->check(CLI::ExistingFile);
    train->add_option("--formalism", train_formalism, "generic|single")->check(CLI::IsMember({"generic", "single"}));

    std::string eval_dataset, eval_ckpt, eval_subset = "test";
    auto* eval = app.add_subcommand("eval", "roll out a checkpoint and compute metrics");
    add_common(eval, ev, true);
    eval->add_option("--dataset", eval_dataset, "dataset file")->required()->check(CLI::ExistingFile);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--trajectories", eval_subset, "test|train|all")->check(CLI::IsMember({"test", "train", "all"}));

    std::string sweep_formalism;
    auto* sweep = app.add_subcommand("sweep", "run a hyperparameter / data grid");
    add_common(sweep, sw, true);
    sweep->add_option("--jobs", sw.jobs, "parallel cells")->check(CLI::PositiveNumber);
    sweep->add_option("--formalism", sweep_formalism, "generic|single (default: both)")
        ->check(CLI::IsMember({"generic", "single"}));

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "print the manifest of a dataset or checkpoint");
    inspect->add_option("--dataset,path", inspect_path, "dataset or checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (gen_p->parsed()) return cmd_gen_pendulum(gp, out);
        if (gen_c->parsed()) return cmd_gen_couette(gc, out);
        if (train->parsed()) return cmd_train(tr, train_dataset, train_formalism, out);
        if (eval->parsed()) return cmd_eval(ev, eval_dataset, eval_ckpt, eval_subset, out);
        if (sweep->parsed()) return cmd_sweep(sw, sweep_formalism, out);
        if (inspect->parsed()) return cmd_inspect(inspect_path, out);
    } catch (const NumericalFailure& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NonFiniteError& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const pendulum::DomainError& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace spnn::cli
