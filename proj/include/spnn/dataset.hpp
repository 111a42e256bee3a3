#pragma once

// Trajectory container and its on-disk format.
//
//   spnn-dataset <version>
//   key=value            (manifest; includes system, shape, dt, payload digest)
//   ...
//   end
//   <little-endian float64 payload, [trajectory][time][component]>

#include "spnn/autodiff.hpp"
#include "spnn/io.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spnn::data {

enum class System { Pendulum, Couette };

std::string system_name(System s);
System parse_system(const std::string& s);

class ChecksumError : public io::FormatError {
public:
    using io::FormatError::FormatError;
};
class VersionError : public io::FormatError {
public:
    using io::FormatError::FormatError;
};
class TruncatedError : public io::FormatError {
public:
    using io::FormatError::FormatError;
};

inline constexpr int kFormatVersion = 1;

struct Dataset {
    System system = System::Pendulum;
    double dt = 0.0;
    Eigen::Index n_traj = 0;
    Eigen::Index n_time = 0;
    Eigen::Index dim = 0;
    std::vector<double> values;  // n_traj * n_time * dim
    std::map<std::string, std::string> manifest;

    Dataset() = default;
    Dataset(System sys, double dt, Eigen::Index n_traj, Eigen::Index n_time, Eigen::Index dim);

    // dim x n_time view, one snapshot per column.
    Eigen::Map<const Matrix> trajectory(Eigen::Index i) const;
    Eigen::Map<Matrix> trajectory(Eigen::Index i);

    std::string shape_string() const;
    // Throws std::invalid_argument when an invariant does not hold.
    void validate() const;
};

void save(const Dataset& ds, const std::string& path);
Dataset load(const std::string& path);

// Manifest-only read; does not touch the payload.
std::map<std::string, std::string> read_manifest(const std::string& path);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

// Seeded shuffle of [0, n); floor(fraction * n) train indices, rest test.
Split split(Eigen::Index n_traj, const SplitSpec& spec);
inline Split split(const Dataset& ds, const SplitSpec& spec) { return split(ds.n_traj, spec); }

// Copies a subset of trajectories (and optionally a prefix of snapshots).
Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& trajectories,
               Eigen::Index n_time = -1);

}  // namespace spnn::data
