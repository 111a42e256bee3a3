#include "spnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spnn::data {

std::string system_name(System s) { return s == System::Pendulum ? "pendulum" : "couette"; }

System parse_system(const std::string& s) {
    if (s == "pendulum") return System::Pendulum;
    if (s == "couette") return System::Couette;
    throw std::invalid_argument("unknown system '" + s + "'");
}

Dataset::Dataset(System sys, double dt_, Eigen::Index n_traj_, Eigen::Index n_time_,
                 Eigen::Index dim_)
    : system(sys), dt(dt_), n_traj(n_traj_), n_time(n_time_), dim(dim_),
      values(static_cast<std::size_t>(n_traj_ * n_time_ * dim_), 0.0) {}

Eigen::Map<const Matrix> Dataset::trajectory(Eigen::Index i) const {
    if (i < 0 || i >= n_traj) throw std::out_of_range("trajectory index out of range");
    return {values.data() + i * n_time * dim, dim, n_time};
}

Eigen::Map<Matrix> Dataset::trajectory(Eigen::Index i) {
    if (i < 0 || i >= n_traj) throw std::out_of_range("trajectory index out of range");
    return {values.data() + i * n_time * dim, dim, n_time};
}

std::string Dataset::shape_string() const {
    std::ostringstream os;
    os << n_traj << 'x' << n_time << 'x' << dim;
    return os.str();
}

void Dataset::validate() const {
    if (n_time < 2) throw std::invalid_argument("dataset needs at least 2 snapshots");
    if (n_traj < 1) throw std::invalid_argument("dataset has no trajectories");
    if (!(dt > 0.0)) throw std::invalid_argument("dataset dt must be positive");
    const Eigen::Index want = system == System::Pendulum ? 10 : 5;
    if (dim != want) {
        throw std::invalid_argument("system " + system_name(system) + " expects dimension " +
                                    std::to_string(want));
    }
    if (values.size() != static_cast<std::size_t>(n_traj * n_time * dim)) {
        throw std::invalid_argument("dataset payload size does not match its shape");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("dataset contains non-finite values");
    }
}

namespace {
constexpr std::string_view kMagic = "spnn-dataset";

std::map<std::string, std::string> read_head(std::istream& in, const std::string& path) {
    std::string first;
    if (!std::getline(in, first)) throw TruncatedError("'" + path + "' is empty");
    std::istringstream ls(first);
    std::string magic;
    int version = -1;
    ls >> magic >> version;
    if (magic != kMagic) throw io::FormatError("'" + path + "' is not a dataset file");
    if (version != kFormatVersion) {
        throw VersionError("'" + path + "' has format version " + std::to_string(version) +
                           ", expected " + std::to_string(kFormatVersion));
    }
    try {
        return io::read_header(in, "end");
    } catch (const io::FormatError& e) {
        throw TruncatedError(std::string("dataset header: ") + e.what());
    }
}
}  // namespace

void save(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::vector<std::byte> payload;
    io::append_f64_le(payload, ds.values);
    std::map<std::string, std::string> kv = ds.manifest;
    kv["system"] = system_name(ds.system);
    kv["shape"] = ds.shape_string();
    kv["dt"] = io::format_double(ds.dt);
    kv["payload_sha256"] = io::sha256_hex(std::span<const std::byte>(payload));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
    out << kMagic << ' ' << kFormatVersion << '\n';
    for (const auto& [k, v] : kv) {
        if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
            v.find('\n') != std::string::npos) {
            throw std::invalid_argument("manifest entry '" + k + "' is not representable");
        }
        out << k << '=' << v << '\n';
    }
    out << "end\n";
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
    return read_head(in, path);
}

Dataset load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
    auto kv = read_head(in, path);
    for (const char* key : {"system", "shape", "dt", "payload_sha256"}) {
        if (!kv.count(key)) throw io::FormatError(std::string("dataset manifest lacks '") + key + "'");
    }
    const auto dims = io::split(kv["shape"], 'x');
    if (dims.size() != 3) throw io::FormatError("bad shape '" + kv["shape"] + "'");
    Dataset ds(parse_system(kv["system"]), io::parse_double(kv["dt"]), io::parse_int(dims[0]),
               io::parse_int(dims[1]), io::parse_int(dims[2]));
    const auto payload = io::read_rest(in);
    if (payload.size() != ds.values.size() * 8) {
        throw TruncatedError("dataset payload has " + std::to_string(payload.size()) +
                             " bytes, expected " + std::to_string(ds.values.size() * 8));
    }
    if (io::sha256_hex(std::span<const std::byte>(payload)) != kv["payload_sha256"]) {
        throw ChecksumError("dataset payload checksum mismatch in '" + path + "'");
    }
    ds.values = io::read_f64_le(payload);
    for (const char* key : {"system", "shape", "dt", "payload_sha256"}) kv.erase(key);
    ds.manifest = std::move(kv);
    ds.validate();
    return ds;
}

Split split(Eigen::Index n_traj, const SplitSpec& spec) {
    if (n_traj < 2) throw std::invalid_argument("split needs at least 2 trajectories");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    }
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_traj));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(spec.seed);
    // Fisher-Yates with an explicit draw so the permutation does not depend
    // on the standard library's shuffle implementation.
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(idx[i], idx[j]);
    }
    auto n_train = static_cast<Eigen::Index>(std::floor(spec.train_fraction * static_cast<double>(n_traj)));
    n_train = std::clamp<Eigen::Index>(n_train, 1, n_traj - 1);
    Split s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.test.assign(idx.begin() + n_train, idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& trajectories, Eigen::Index n_time) {
    if (n_time < 0) n_time = ds.n_time;
    if (n_time > ds.n_time) throw std::invalid_argument("subset: more snapshots than available");
    Dataset out(ds.system, ds.dt, static_cast<Eigen::Index>(trajectories.size()), n_time, ds.dim);
    out.manifest = ds.manifest;
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        out.trajectory(static_cast<Eigen::Index>(k)) =
            ds.trajectory(trajectories[k]).leftCols(n_time);
    }
    return out;
}

}  // namespace spnn::data
