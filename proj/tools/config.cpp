#include "config.hpp"

#include "spnn/io.hpp"

#include <fstream>

namespace spnn::cli {

Config Config::defaults() {
    Config c;
    c.kv_ = {
        {"seed", "0"},
        {"jobs", "1"},
        // pendulum physics
        {"pendulum.m1", "1"},
        {"pendulum.m2", "2"},
        {"pendulum.lam0_1", "2"},
        {"pendulum.lam0_2", "1"},
        {"pendulum.C1", "0.02"},
        {"pendulum.C2", "0.2"},
        {"pendulum.kappa", "300"},
        {"pendulum.k1", "1"},
        {"pendulum.k2", "1"},
        {"pendulum.theta_ref", "100"},
        {"pendulum.beta", "0.001"},
        // pendulum generation
        {"gen.n_traj", "50"},
        {"gen.horizon", "60"},
        {"gen.dt_out", "0.3"},
        {"gen.substeps", "20"},
        {"gen.preroll", "20"},
        {"gen.perturbation", "0.05"},
        // Couette
        {"couette.V", "1"},
        {"couette.Re", "0.1"},
        {"couette.We", "1"},
        {"couette.eps", "0.9"},
        {"couette.Nx", "100"},
        {"couette.K", "10000"},
        {"couette.snapshots", "150"},
        {"couette.dt", "0.0067"},
        {"couette.sde_substeps", "1"},
        {"couette.cfl_safety", "0.9"},
        // training
        {"train.formalism", "generic"},
        {"train.epochs", "12000"},
        {"train.base_lr", "0.0001"},
        {"train.milestones", ""},
        {"train.gamma", "0.1"},
        {"train.lambda_d", "100"},
        {"train.lambda_r", "1e-05"},
        {"train.hidden_layers", "5"},
        {"train.hidden_width", "200"},
        {"train.train_fraction", "0.8"},
        {"train.split_seed", "0"},
        {"train.monitor_degeneracy", "true"},
        {"train.divergence_threshold", "1e12"},
        // sweep grid; empty lists keep the base value
        {"sweep.formalisms", "generic,single"},
        {"sweep.epochs", ""},
        {"sweep.learning_rates", ""},
        {"sweep.widths", ""},
        {"sweep.snapshots", ""},
        {"sweep.trajectories", ""},
        {"sweep.reynolds", ""},
        {"sweep.weissenberg", ""},
        {"data.system", "pendulum"},
        {"data.n_traj", "50"},
        {"data.snapshots", "200"},
        {"data.horizon", "60"},
        {"data.Re", "0.1"},
        {"data.We", "1"},
        {"data.K", "10000"},
        {"data.max_step", "0.015"},
        {"data.n_test", "0"},
    };
    return c;
}

std::map<std::string, std::string> Config::paper_defaults(const std::string& which) {
    if (which == "pendulum") {
        return {{"gen.n_traj", "50"},          {"gen.horizon", "60"},         {"gen.dt_out", "0.3"},
                {"train.epochs", "12000"},     {"train.base_lr", "0.0001"},   {"train.milestones", "4000,8000"},
                {"train.gamma", "0.1"},        {"train.hidden_layers", "5"},  {"train.hidden_width", "200"},
                {"train.lambda_d", "100"},     {"train.lambda_r", "1e-05"},   {"train.train_fraction", "0.8"},
                {"data.system", "pendulum"},   {"data.n_traj", "50"},         {"data.snapshots", "200"},
                {"data.horizon", "60"}};
    }
    if (which == "couette") {
        return {{"couette.V", "1"},            {"couette.Re", "0.1"},         {"couette.We", "1"},
                {"couette.Nx", "100"},         {"couette.K", "10000"},        {"couette.snapshots", "150"},
                {"couette.dt", "0.0067"},      {"train.epochs", "6000"},      {"train.base_lr", "0.0001"},
                {"train.milestones", "2000,4000"}, {"train.gamma", "0.1"},    {"train.hidden_layers", "5"},
                {"train.hidden_width", "50"},  {"train.lambda_d", "100"},     {"train.lambda_r", "1e-05"},
                {"train.train_fraction", "0.8"}, {"data.system", "couette"},  {"data.n_traj", "100"},
                {"data.snapshots", "150"},     {"data.Re", "0.1"},            {"data.We", "1"}};
    }
    throw ConfigError("unknown paper defaults '" + which + "' (expected pendulum|couette)");
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
}

void Config::merge(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) set(k, v);
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = io::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        try {
            set(io::trim(t.substr(0, eq)), io::trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::string Config::str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

double Config::real(const std::string& key) const {
    try {
        return io::parse_double(str(key));
    } catch (const io::FormatError&) {
        throw ConfigError("config key '" + key + "' is not a number: '" + str(key) + "'");
    }
}

long long Config::integer(const std::string& key) const {
    try {
        return io::parse_int(str(key));
    } catch (const io::FormatError&) {
        throw ConfigError("config key '" + key + "' is not an integer: '" + str(key) + "'");
    }
}

bool Config::boolean(const std::string& key) const {
    const std::string v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> Config::list(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& part : io::split(str(key), ',')) {
        const std::string t = io::trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

namespace {

template <typename T, typename F>
std::vector<T> convert(const std::vector<std::string>& items, const std::string& key, F f) {
    std::vector<T> out;
    for (const auto& s : items) {
        try {
            out.push_back(static_cast<T>(f(s)));
        } catch (const io::FormatError&) {
            throw ConfigError("config key '" + key + "' has a bad entry '" + s + "'");
        }
    }
    return out;
}

double to_real(const std::string& s) { return io::parse_double(s); }
long long to_int(const std::string& s) { return io::parse_int(s); }

}  // namespace

pendulum::Params Config::pendulum_params() const {
    pendulum::Params p;
    p.m1 = real("pendulum.m1");
    p.m2 = real("pendulum.m2");
    p.lam0_1 = real("pendulum.lam0_1");
    p.lam0_2 = real("pendulum.lam0_2");
    p.C1 = real("pendulum.C1");
    p.C2 = real("pendulum.C2");
    p.kappa = real("pendulum.kappa");
    p.k1 = real("pendulum.k1");
    p.k2 = real("pendulum.k2");
    p.theta_ref = real("pendulum.theta_ref");
    p.beta = real("pendulum.beta");
    p.validate();
    return p;
}

pendulum::GenerateSpec Config::pendulum_spec() const {
    pendulum::GenerateSpec s;
    s.n_traj = static_cast<int>(integer("gen.n_traj"));
    s.horizon = real("gen.horizon");
    s.dt_out = real("gen.dt_out");
    s.substeps = static_cast<int>(integer("gen.substeps"));
    s.preroll = real("gen.preroll");
    s.perturbation = real("gen.perturbation");
    s.seed = static_cast<std::uint64_t>(integer("seed"));
    s.jobs = static_cast<unsigned>(integer("jobs"));
    if (s.n_traj < 1 || s.substeps < 1) throw ConfigError("gen.n_traj and gen.substeps must be >= 1");
    if (!(s.preroll >= 0.0) || !(s.perturbation >= 0.0)) throw ConfigError("gen.preroll and gen.perturbation must be >= 0");
    (void)s.snapshots();
    return s;
}

couette::Params Config::couette_params() const {
    couette::Params p;
    p.V = real("couette.V");
    p.Re = real("couette.Re");
    p.We = real("couette.We");
    p.eps = real("couette.eps");
    p.Nx = static_cast<int>(integer("couette.Nx"));
    p.K = static_cast<int>(integer("couette.K"));
    p.snapshots = static_cast<int>(integer("couette.snapshots"));
    p.dt = real("couette.dt");
    p.sde_substeps = static_cast<int>(integer("couette.sde_substeps"));
    p.cfl_safety = real("couette.cfl_safety");
    p.validate();
    return p;
}

harness::TrainConfig Config::train() const {
    harness::TrainConfig t;
    t.formalism = bracket::parse_formalism(str("train.formalism"));
    t.epochs = integer("train.epochs");
    t.base_lr = real("train.base_lr");
    t.milestones = convert<long long>(list("train.milestones"), "train.milestones", to_int);
    t.gamma = real("train.gamma");
    t.lambda_d = real("train.lambda_d");
    t.lambda_r = real("train.lambda_r");
    t.hidden_layers = static_cast<int>(integer("train.hidden_layers"));
    t.hidden_width = integer("train.hidden_width");
    t.seed = static_cast<std::uint64_t>(integer("seed"));
    t.train_fraction = real("train.train_fraction");
    t.split_seed = static_cast<std::uint64_t>(integer("train.split_seed"));
    t.monitor_degeneracy = boolean("train.monitor_degeneracy");
    t.divergence_threshold = real("train.divergence_threshold");
    t.validate();
    return t;
}

harness::SweepSpec Config::sweep() const {
    harness::SweepSpec s;
    s.base_train = train();
    auto& d = s.base_data;
    d.system = data::parse_system(str("data.system"));
    d.n_traj = static_cast<int>(integer("data.n_traj"));
    d.snapshots = static_cast<int>(integer("data.snapshots"));
    d.horizon = real("data.horizon");
    d.Re = real("data.Re");
    d.We = real("data.We");
    d.K = static_cast<int>(integer("data.K"));
    d.seed = static_cast<std::uint64_t>(integer("seed"));
    d.max_step = real("data.max_step");
    d.n_test = static_cast<int>(integer("data.n_test"));
    s.formalisms.clear();
    for (const auto& f : list("sweep.formalisms")) s.formalisms.push_back(bracket::parse_formalism(f));
    s.epochs = convert<long long>(list("sweep.epochs"), "sweep.epochs", to_int);
    s.learning_rates = convert<double>(list("sweep.learning_rates"), "sweep.learning_rates", to_real);
    s.widths = convert<Eigen::Index>(list("sweep.widths"), "sweep.widths", to_int);
    s.snapshots = convert<int>(list("sweep.snapshots"), "sweep.snapshots", to_int);
    s.trajectories = convert<int>(list("sweep.trajectories"), "sweep.trajectories", to_int);
    s.reynolds = convert<double>(list("sweep.reynolds"), "sweep.reynolds", to_real);
    s.weissenberg = convert<double>(list("sweep.weissenberg"), "sweep.weissenberg", to_real);
    return s;
}

}  // namespace spnn::cli
