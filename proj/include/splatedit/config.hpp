#pragma once

#include <map>
#include <string>
#include <vector>

#include "splatedit/errors.hpp"

namespace splatedit {

/// Plain key-value config file: one `key = value` per line, `#` comments,
/// values optionally quoted. Unknown keys are rejected by validate_keys so
/// typos fail loudly.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

    /// Throws ConfigError when the file contains a key outside `known`.
    void validate_keys(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace splatedit
