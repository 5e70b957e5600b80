#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sdlab {

struct KeySpec {
    std::string name;
    std::string default_value;
    std::string help;
    bool list = false;  // comma-separated values; repeated flags accumulate
};

/// Resolved key/value parameters for one subcommand.
/// Precedence: schema defaults, then the config file, then flags.
class RunConfig {
public:
    RunConfig(std::string subcommand, std::vector<KeySpec> schema);

    const std::string& subcommand() const noexcept { return subcommand_; }
    const std::vector<KeySpec>& schema() const noexcept { return schema_; }

    /// Throws InvalidInput for a key outside the schema.
    void set(const std::string& key, const std::string& value);
    /// Flat `key = value` lines, `#` starts a comment.
    void load_file(const std::string& path);
    void load_text(const std::string& text, const std::string& origin = "<config>");

    const std::string& str(const std::string& key) const;
    double num(const std::string& key) const;
    long long integer(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    std::vector<double> nums(const std::string& key) const;
    std::vector<std::string> strs(const std::string& key) const;

    /// Config-file text that reproduces this configuration.
    std::string to_text() const;
    /// JSON object text of the resolved parameters.
    std::string to_json_text() const;

private:
    std::string subcommand_;
    std::vector<KeySpec> schema_;
    std::map<std::string, std::string> values_;
};

std::string trim(const std::string& s);
std::vector<std::string> split_list(const std::string& s);

}  // namespace sdlab
