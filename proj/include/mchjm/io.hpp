#pragma once

// Configuration files, dataset CSV serialization and deterministic output.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mchjm/calibration.hpp"

namespace mchjm {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat key=value lines, '#' starts a comment, blank lines ignored.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "config");
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    // positive real (tolerances, step sizes)
    double get_positive(const std::string& key, double def) const;
    long long get_int(const std::string& key, long long def) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& def) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const;

private:
    std::map<std::string, std::string> values_;
};

// Shortest text that reads back to the same double.
std::string format_double(double x);

// Dataset CSV: a bond section with header date_index,curve_id,maturity_years,bond_price
// followed by a spreads section with header date_index,tenor_id,log_spread.
std::string write_dataset(const Dataset& data);
Dataset parse_dataset(const std::string& text);
Dataset read_dataset(const std::string& path);

std::string read_file(const std::string& path);
// Write to a temporary file in the same directory, then rename over `path`.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace mchjm
