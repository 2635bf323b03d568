#include "mchjm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace mchjm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto r = std::from_chars(first, t.data() + t.size(), out);
    return r.ec == std::errc() && r.ptr == t.data() + t.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, long long& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
    return r.ec == std::errc() && r.ptr == t.data() + t.size();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return parse(text, path);
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    double v = 0.0;
    if (!parse_double(it->second, v)) throw ConfigError("config key '" + key + "': not a number: " + it->second);
    return v;
}

double Config::get_positive(const std::string& key, double def) const {
    const double v = get_double(key, def);
    if (!(v > 0.0)) throw ConfigError("config key '" + key + "' must be positive");
    return v;
}

long long Config::get_int(const std::string& key, long long def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    long long v = 0;
    if (!parse_int(it->second, v)) throw ConfigError("config key '" + key + "': not an integer: " + it->second);
    return v;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<double> out;
    for (const auto& tok : split(it->second, ',')) {
        double v = 0.0;
        if (!parse_double(tok, v)) throw ConfigError("config key '" + key + "': bad list entry '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& key, const std::vector<int>& def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<int> out;
    for (const auto& tok : split(it->second, ',')) {
        long long v = 0;
        if (!parse_int(tok, v)) throw ConfigError("config key '" + key + "': bad list entry '" + tok + "'");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

namespace {

const char* kBondHeader = "date_index,curve_id,maturity_years,bond_price";
const char* kSpreadHeader = "date_index,tenor_id,log_spread";

}  // namespace

std::string write_dataset(const Dataset& data) {
    data.validate();
    std::string out = std::string(kBondHeader) + "\n";
    for (const auto& s : data.days)
        for (int j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < s.maturities.size(); ++k)
                out += std::to_string(s.date) + "," + std::to_string(j) + "," + format_double(s.maturities[k]) + "," +
                       format_double(s.bonds[static_cast<std::size_t>(j)][k]) + "\n";
    out += std::string(kSpreadHeader) + "\n";
    for (const auto& s : data.days)
        for (int j = 1; j <= 2; ++j)
            out += std::to_string(s.date) + "," + std::to_string(j) + "," +
                   format_double(s.log_spreads[static_cast<std::size_t>(j - 1)]) + "\n";
    return out;
}

Dataset parse_dataset(const std::string& text) {
    struct Row {
        int line;
        double x, p;
    };
    std::map<long long, std::array<std::vector<Row>, 3>> bonds;
    std::map<long long, std::array<double, 2>> spreads;
    std::map<long long, std::array<bool, 2>> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    int section = 0;  // 0 before header, 1 bonds, 2 spreads
    auto fail = [&](const std::string& msg) -> DataError {
        return DataError("line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == kBondHeader) {
            if (section != 0) throw fail("unexpected bond header");
            section = 1;
            continue;
        }
        if (t == kSpreadHeader) {
            if (section != 1) throw fail("spreads section must follow the bond section");
            section = 2;
            continue;
        }
        if (section == 0) throw fail("expected header '" + std::string(kBondHeader) + "'");
        const auto f = split(t, ',');
        long long date = 0, id = 0;
        if (section == 1) {
            double x = 0.0, p = 0.0;
            if (f.size() != 4) throw fail("expected 4 fields");
            if (!parse_int(f[0], date)) throw fail("bad date_index");
            if (!parse_int(f[1], id) || id < 0 || id > 2) throw fail("curve_id must be 0, 1 or 2");
            if (!parse_double(f[2], x) || !(x > 0.0)) throw fail("maturity must be a positive number");
            if (!parse_double(f[3], p) || !(p > 0.0)) throw fail("bond price must be a positive number");
            bonds[date][static_cast<std::size_t>(id)].push_back({lineno, x, p});
        } else {
            double y = 0.0;
            if (f.size() != 3) throw fail("expected 3 fields");
            if (!parse_int(f[0], date)) throw fail("bad date_index");
            if (!parse_int(f[1], id) || id < 1 || id > 2) throw fail("tenor_id must be 1 or 2");
            if (!parse_double(f[2], y)) throw fail("bad log_spread");
            auto& s = seen[date];
            if (s[static_cast<std::size_t>(id - 1)]) throw fail("duplicate log-spread");
            s[static_cast<std::size_t>(id - 1)] = true;
            spreads[date][static_cast<std::size_t>(id - 1)] = y;
        }
    }
    if (section == 0) throw DataError("line " + std::to_string(lineno) + ": missing bond section");
    if (section == 1) throw DataError("line " + std::to_string(lineno) + ": missing spreads section");
    if (bonds.empty()) throw DataError("dataset has no bond rows");

    Dataset data;
    std::vector<double> ref;
    long long prev = 0;
    for (auto& [date, rows] : bonds) {
        if (!data.days.empty() && date != prev + 1)
            throw DataError("date " + std::to_string(date) + ": dates must be contiguous");
        prev = date;
        MarketSnapshot s;
        s.date = static_cast<int>(date);
        for (int j = 0; j < 3; ++j) {
            auto r = rows[static_cast<std::size_t>(j)];
            std::sort(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.x < b.x; });
            std::vector<double> xs;
            for (const auto& e : r) xs.push_back(e.x);
            if (j == 0) {
                if (ref.empty()) ref = xs;
                s.maturities = xs;
            }
            if (xs.empty() || xs != ref) {
                const int at = r.empty() ? 0 : r.back().line;
                throw DataError("line " + std::to_string(at) + ": date " + std::to_string(date) + ", curve " +
                                std::to_string(j) + ": incomplete or inconsistent maturity set");
            }
            for (std::size_t k = 1; k < r.size(); ++k)
                if (r[k].x == r[k - 1].x) throw DataError("line " + std::to_string(r[k].line) + ": duplicate maturity");
            for (const auto& e : r) s.bonds[static_cast<std::size_t>(j)].push_back(e.p);
        }
        const auto it = seen.find(date);
        if (it == seen.end() || !it->second[0] || !it->second[1])
            throw DataError("date " + std::to_string(date) + ": missing log-spreads");
        s.log_spreads = spreads[date];
        data.days.push_back(std::move(s));
    }
    for (const auto& [date, flags] : seen)
        if (!bonds.count(date)) throw DataError("date " + std::to_string(date) + ": log-spreads without bond rows");
    return data;
}

Dataset read_dataset(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    return parse_dataset(text);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = fs::path(path + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace mchjm
