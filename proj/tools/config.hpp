#pragma once

// Flat key=value run configuration with dotted keys (train.epochs,
// pendulum.kappa, ...). Lines starting with '#' are comments.

#include "spnn/couette.hpp"
#include "spnn/harness.hpp"
#include "spnn/pendulum.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace spnn::cli {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Config {
public:
    // Every known key with its built-in default.
    static Config defaults();
    // Values for "pendulum" or "couette" taken from the published setups.
    static std::map<std::string, std::string> paper_defaults(const std::string& which);

    void set(const std::string& key, const std::string& value);
    void merge(const std::map<std::string, std::string>& kv);
    void load_file(const std::string& path);

    const std::map<std::string, std::string>& values() const { return kv_; }
    std::string str(const std::string& key) const;
    double real(const std::string& key) const;
    long long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;

    pendulum::Params pendulum_params() const;
    pendulum::GenerateSpec pendulum_spec() const;
    couette::Params couette_params() const;
    harness::TrainConfig train() const;
    harness::SweepSpec sweep() const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace spnn::cli
