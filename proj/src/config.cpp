#include "sdlab/config.hpp"

#include "sdlab/csv.hpp"
#include "sdlab/error.hpp"

#include <json.hpp>

#include <sstream>

namespace sdlab {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

RunConfig::RunConfig(std::string subcommand, std::vector<KeySpec> schema)
    : subcommand_(std::move(subcommand)), schema_(std::move(schema)) {
    for (const auto& k : schema_) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end())
        throw InvalidInput("unknown key '" + key + "' for " + subcommand_);
    it->second = trim(value);
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
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
            throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (!values_.count(key))
            throw InvalidInput(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        set(key, line.substr(eq + 1));
    }
}

void RunConfig::load_file(const std::string& path) { load_text(read_text_file(path), path); }

const std::string& RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InvalidInput("unknown key '" + key + "'");
    return it->second;
}

double RunConfig::num(const std::string& key) const {
    try {
        return parse_double(str(key));
    } catch (const InvalidInput&) {
        throw InvalidInput("key '" + key + "' expects a number, got '" + str(key) + "'");
    }
}

long long RunConfig::integer(const std::string& key) const {
    const std::string& s = str(key);
    try {
        std::size_t used = 0;
        long long v = std::stoll(s, &used);
        if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw InvalidInput("key '" + key + "' expects an integer, got '" + s + "'");
}

std::uint64_t RunConfig::u64(const std::string& key) const {
    const std::string& s = str(key);
    try {
        std::size_t used = 0;
        if (!s.empty() && s[0] != '-') {
            unsigned long long v = std::stoull(s, &used);
            if (used == s.size()) return v;
        }
    } catch (const std::logic_error&) {
    }
    throw InvalidInput("key '" + key + "' expects an unsigned integer, got '" + s + "'");
}

std::vector<double> RunConfig::nums(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(str(key))) {
        try {
            out.push_back(parse_double(item));
        } catch (const InvalidInput&) {
            throw InvalidInput("key '" + key + "' expects numbers, got '" + item + "'");
        }
    }
    return out;
}

std::vector<std::string> RunConfig::strs(const std::string& key) const { return split_list(str(key)); }

std::string RunConfig::to_text() const {
    std::string out = "# " + subcommand_ + "\n";
    for (const auto& k : schema_) {
        if (!k.help.empty()) out += "# " + k.help + "\n";
        out += k.name + " = " + values_.at(k.name) + "\n";
    }
    return out;
}

std::string RunConfig::to_json_text() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& k : schema_) j[k.name] = values_.at(k.name);
    return j.dump();
}

}  // namespace sdlab
