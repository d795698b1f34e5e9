#pragma once

// Reader for the "key = v1 v2 ..." fixture files; '#' lines are derivation
// comments and are skipped.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fixture {

using Values = std::map<std::string, std::vector<double>>;

inline Values load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fixture " + path);
    Values out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(' ') + 1);
        std::istringstream vs(line.substr(eq + 1));
        std::vector<double> v;
        for (double x; vs >> x;) v.push_back(x);
        out[key] = v;
    }
    return out;
}

inline const std::vector<double>& get(const Values& f, const std::string& key) {
    const auto it = f.find(key);
    if (it == f.end()) throw std::runtime_error("fixture key missing: " + key);
    return it->second;
}

inline double scalar(const Values& f, const std::string& key) { return get(f, key).at(0); }

}  // namespace fixture
