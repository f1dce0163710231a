#pragma once

// Minimal TOML-compatible configuration reader: [section] headers,
// key = value pairs, '#' comments, strings, booleans, numbers and flat
// arrays. Keys are flattened to "section.key". Errors carry file:line.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crookslab {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigValue {
    enum class Kind { boolean, integer, real, string, array };
    Kind kind = Kind::string;
    bool boolean_value = false;
    long long integer_value = 0;
    double real_value = 0.0;
    std::string string_value;
    std::vector<ConfigValue> array_value;

    double as_double() const {
        switch (kind) {
            case Kind::integer:
                return static_cast<double>(integer_value);
            case Kind::real:
                return real_value;
            default:
                throw ConfigError("config value is not a number");
        }
    }
};

class Config {
public:
    static Config parse_string(const std::string& text, const std::string& source_name = "<config>") {
        Config cfg;
        cfg.source_ = source_name;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = strip(strip_comment(line));
            if (stripped.empty()) {
                continue;
            }
            if (stripped.front() == '[') {
                if (stripped.back() != ']' || stripped.size() < 3) {
                    cfg.fail(line_no, "malformed section header");
                }
                section = strip(stripped.substr(1, stripped.size() - 2));
                if (section.empty()) {
                    cfg.fail(line_no, "empty section name");
                }
                continue;
            }
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos) {
                cfg.fail(line_no, "expected 'key = value'");
            }
            const std::string key = strip(stripped.substr(0, eq));
            const std::string value = strip(stripped.substr(eq + 1));
            if (key.empty()) {
                cfg.fail(line_no, "empty key");
            }
            if (value.empty()) {
                cfg.fail(line_no, "missing value for key '" + key + "'");
            }
            const std::string full_key = section.empty() ? key : section + "." + key;
            if (cfg.values_.count(full_key) != 0) {
                cfg.fail(line_no, "duplicate key '" + full_key + "'");
            }
            cfg.values_[full_key] = cfg.parse_value(value, line_no);
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError(path + ": cannot open config file");
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_string(buf.str(), path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        return require_number(it->second, key);
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        if (it->second.kind != ConfigValue::Kind::integer) {
            throw ConfigError(source_ + ": key '" + key + "' must be an integer");
        }
        return it->second.integer_value;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        if (it->second.kind != ConfigValue::Kind::boolean) {
            throw ConfigError(source_ + ": key '" + key + "' must be a boolean");
        }
        return it->second.boolean_value;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        if (it->second.kind != ConfigValue::Kind::string) {
            throw ConfigError(source_ + ": key '" + key + "' must be a string");
        }
        return it->second.string_value;
    }

    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        if (it->second.kind != ConfigValue::Kind::array) {
            return {require_number(it->second, key)};
        }
        std::vector<double> out;
        out.reserve(it->second.array_value.size());
        for (const auto& v : it->second.array_value) {
            out.push_back(require_number(v, key));
        }
        return out;
    }

    const std::map<std::string, ConfigValue>& items() const { return values_; }
    const std::string& source() const { return source_; }

private:
    [[noreturn]] void fail(int line_no, const std::string& message) const {
        throw ConfigError(source_ + ":" + std::to_string(line_no) + ": " + message);
    }

    double require_number(const ConfigValue& v, const std::string& key) const {
        if (v.kind != ConfigValue::Kind::integer && v.kind != ConfigValue::Kind::real) {
            throw ConfigError(source_ + ": key '" + key + "' must be a number");
        }
        return v.as_double();
    }

    static std::string strip(const std::string& s) {
        std::size_t b = 0;
        std::size_t e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
            ++b;
        }
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
            --e;
        }
        return s.substr(b, e - b);
    }

    static std::string strip_comment(const std::string& s) {
        bool in_string = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') {
                in_string = !in_string;
            } else if (s[i] == '#' && !in_string) {
                return s.substr(0, i);
            }
        }
        return s;
    }

    ConfigValue parse_value(const std::string& text, int line_no) const {
        ConfigValue v;
        if (text.front() == '[') {
            if (text.back() != ']') {
                fail(line_no, "unterminated array");
            }
            v.kind = ConfigValue::Kind::array;
            const std::string inner = strip(text.substr(1, text.size() - 2));
            if (inner.empty()) {
                return v;
            }
            std::size_t pos = 0;
            while (pos <= inner.size()) {
                std::size_t comma = inner.find(',', pos);
                const std::string elem =
                    strip(comma == std::string::npos ? inner.substr(pos) : inner.substr(pos, comma - pos));
                if (elem.empty()) {
                    fail(line_no, "empty array element");
                }
                v.array_value.push_back(parse_scalar(elem, line_no));
                if (comma == std::string::npos) {
                    break;
                }
                pos = comma + 1;
            }
            return v;
        }
        return parse_scalar(text, line_no);
    }

    ConfigValue parse_scalar(const std::string& text, int line_no) const {
        ConfigValue v;
        if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
            v.kind = ConfigValue::Kind::string;
            v.string_value = text.substr(1, text.size() - 2);
            return v;
        }
        if (text == "true" || text == "false") {
            v.kind = ConfigValue::Kind::boolean;
            v.boolean_value = (text == "true");
            return v;
        }
        const bool looks_integer = text.find_first_of(".eE") == std::string::npos;
        try {
            std::size_t used = 0;
            if (looks_integer) {
                v.kind = ConfigValue::Kind::integer;
                v.integer_value = std::stoll(text, &used);
                v.real_value = static_cast<double>(v.integer_value);
            } else {
                v.kind = ConfigValue::Kind::real;
                v.real_value = std::stod(text, &used);
            }
            if (used != text.size()) {
                fail(line_no, "malformed value '" + text + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail(line_no, "malformed value '" + text + "'");
        }
        return v;
    }

    std::map<std::string, ConfigValue> values_;
    std::string source_ = "<config>";
};

}  // namespace crookslab
