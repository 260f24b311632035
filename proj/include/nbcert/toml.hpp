#pragma once

// Minimal TOML subset sufficient for run configs and model files:
// [table] / [table.sub] headers, [[array-of-table]] headers, bare keys,
// strings, booleans, integers, floats, and (nested, multi-line) arrays.
// Inline tables, dates, and dotted keys are not supported.

#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nbcert/io.hpp"

namespace nbcert::toml {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : std::runtime_error("TOML parse error at line " + std::to_string(line) + ": " + msg),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct Value {
    enum class Kind { boolean, integer, floating, string, array, table };

    Kind kind = Kind::table;
    bool b = false;
    std::int64_t i = 0;
    double d = 0.0;
    std::string s;
    std::vector<Value> arr;
    std::vector<std::pair<std::string, Value>> tbl;

    bool is_table() const { return kind == Kind::table; }
    bool is_array() const { return kind == Kind::array; }
    bool is_number() const { return kind == Kind::integer || kind == Kind::floating; }

    bool as_bool() const {
        require(Kind::boolean, "boolean");
        return b;
    }
    std::int64_t as_int() const {
        require(Kind::integer, "integer");
        return i;
    }
    double as_double() const {
        if (kind == Kind::integer) return static_cast<double>(i);
        require(Kind::floating, "number");
        return d;
    }
    const std::string& as_string() const {
        require(Kind::string, "string");
        return s;
    }
    const std::vector<Value>& as_array() const {
        require(Kind::array, "array");
        return arr;
    }

    std::vector<double> as_double_array() const {
        std::vector<double> out;
        for (const auto& v : as_array()) out.push_back(v.as_double());
        return out;
    }

    std::vector<std::vector<double>> as_double_matrix() const {
        std::vector<std::vector<double>> out;
        for (const auto& v : as_array()) out.push_back(v.as_double_array());
        return out;
    }

    const Value* find(const std::string& key) const {
        if (kind != Kind::table) return nullptr;
        for (const auto& [k, v] : tbl)
            if (k == key) return &v;
        return nullptr;
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    const Value& at(const std::string& key) const {
        const Value* v = find(key);
        if (!v) throw std::runtime_error("missing TOML key: " + key);
        return *v;
    }

    // Typed getters with defaults, for optional config knobs.
    double number_or(const std::string& key, double dflt) const {
        const Value* v = find(key);
        return v ? v->as_double() : dflt;
    }
    std::int64_t int_or(const std::string& key, std::int64_t dflt) const {
        const Value* v = find(key);
        return v ? v->as_int() : dflt;
    }
    bool bool_or(const std::string& key, bool dflt) const {
        const Value* v = find(key);
        return v ? v->as_bool() : dflt;
    }
    std::string string_or(const std::string& key, const std::string& dflt) const {
        const Value* v = find(key);
        return v ? v->as_string() : dflt;
    }

    Value& subtable(const std::string& key) {
        for (auto& [k, v] : tbl)
            if (k == key) return v;
        tbl.emplace_back(key, Value{});
        return tbl.back().second;
    }

private:
    void require(Kind k, const char* what) const {
        if (kind != k) throw std::runtime_error(std::string("TOML value is not a ") + what);
    }
};

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& p) {
    while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
}

inline std::string parse_basic_string(const std::string& s, std::size_t& p, std::size_t line) {
    std::string out;
    ++p;  // opening quote
    while (p < s.size() && s[p] != '"') {
        if (s[p] == '\\') {
            ++p;
            if (p >= s.size()) throw ParseError(line, "dangling escape in string");
            switch (s[p]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: throw ParseError(line, "unsupported escape in string");
            }
        } else {
            out += s[p];
        }
        ++p;
    }
    if (p >= s.size()) throw ParseError(line, "unterminated string");
    ++p;  // closing quote
    return out;
}

inline Value parse_value(const std::string& s, std::size_t& p, std::size_t line);

inline Value parse_array(const std::string& s, std::size_t& p, std::size_t line) {
    Value v;
    v.kind = Value::Kind::array;
    ++p;  // '['
    for (;;) {
        skip_ws(s, p);
        if (p >= s.size()) throw ParseError(line, "unterminated array");
        if (s[p] == ']') {
            ++p;
            return v;
        }
        v.arr.push_back(parse_value(s, p, line));
        skip_ws(s, p);
        if (p < s.size() && s[p] == ',') {
            ++p;
            continue;
        }
        if (p < s.size() && s[p] == ']') {
            ++p;
            return v;
        }
        throw ParseError(line, "expected ',' or ']' in array");
    }
}

inline Value parse_scalar(const std::string& s, std::size_t& p, std::size_t line) {
    std::size_t start = p;
    while (p < s.size() && s[p] != ',' && s[p] != ']' && s[p] != ' ' && s[p] != '\t' && s[p] != '#')
        ++p;
    std::string tok = s.substr(start, p - start);
    if (tok.empty()) throw ParseError(line, "expected a value");
    Value v;
    if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::boolean;
        v.b = (tok == "true");
        return v;
    }
    const bool looks_float = tok.find_first_of(".eE") != std::string::npos ||
                             tok == "inf" || tok == "-inf" || tok == "nan";
    try {
        std::size_t used = 0;
        if (looks_float) {
            v.kind = Value::Kind::floating;
            v.d = std::stod(tok, &used);
        } else {
            v.kind = Value::Kind::integer;
            v.i = std::stoll(tok, &used);
        }
        if (used != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ParseError(line, "cannot parse value '" + tok + "'");
    }
    return v;
}

inline Value parse_value(const std::string& s, std::size_t& p, std::size_t line) {
    skip_ws(s, p);
    if (p >= s.size()) throw ParseError(line, "expected a value");
    if (s[p] == '"') {
        Value v;
        v.kind = Value::Kind::string;
        v.s = parse_basic_string(s, p, line);
        return v;
    }
    if (s[p] == '[') return parse_array(s, p, line);
    return parse_scalar(s, p, line);
}

inline std::vector<std::string> split_path(const std::string& s, std::size_t line) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == '.') {
            if (cur.empty()) throw ParseError(line, "empty table-name component");
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (cur.empty()) throw ParseError(line, "empty table name");
    parts.push_back(cur);
    return parts;
}

// Strip comments outside of strings.
inline std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

// Net bracket depth outside strings, to join multi-line arrays.
inline int bracket_balance(const std::string& s) {
    bool in_str = false;
    int depth = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
        if (in_str) continue;
        if (s[i] == '[') ++depth;
        if (s[i] == ']') --depth;
    }
    return depth;
}

}  // namespace detail

inline Value parse(const std::string& text) {
    Value root;
    Value* current = &root;

    std::vector<std::string> lines;
    {
        std::string cur;
        for (char c : text) {
            if (c == '\n') {
                lines.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        lines.push_back(cur);
    }

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        std::string line = detail::strip_comment(lines[li]);
        std::size_t p = 0;
        detail::skip_ws(line, p);
        if (p >= line.size()) continue;

        if (line[p] == '[') {
            const bool array_table = p + 1 < line.size() && line[p + 1] == '[';
            const std::size_t open = p + (array_table ? 2 : 1);
            const std::string closer = array_table ? "]]" : "]";
            const std::size_t close = line.find(closer, open);
            if (close == std::string::npos) throw ParseError(line_no, "unterminated table header");
            auto path = detail::split_path(line.substr(open, close - open), line_no);

            Value* node = &root;
            for (std::size_t d = 0; d < path.size(); ++d) {
                const bool last = (d + 1 == path.size());
                if (last && array_table) {
                    Value& slot = node->subtable(path[d]);
                    if (slot.kind == Value::Kind::table && slot.tbl.empty() && slot.arr.empty())
                        slot.kind = Value::Kind::array;
                    if (slot.kind != Value::Kind::array)
                        throw ParseError(line_no, "key '" + path[d] + "' is not an array of tables");
                    slot.arr.emplace_back();
                    node = &slot.arr.back();
                } else {
                    Value& slot = node->subtable(path[d]);
                    if (slot.kind == Value::Kind::array) {
                        if (slot.arr.empty()) throw ParseError(line_no, "empty array of tables");
                        node = &slot.arr.back();
                    } else if (slot.is_table()) {
                        node = &slot;
                    } else {
                        throw ParseError(line_no, "key '" + path[d] + "' is not a table");
                    }
                }
            }
            current = node;
            continue;
        }

        // key = value; join following lines while an array stays open
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
        std::string key = line.substr(0, eq);
        // trim
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
        std::size_t ks = 0;
        while (ks < key.size() && std::isspace(static_cast<unsigned char>(key[ks]))) ++ks;
        key = key.substr(ks);
        if (key.empty()) throw ParseError(line_no, "empty key");

        std::string rhs = line.substr(eq + 1);
        while (detail::bracket_balance(rhs) > 0) {
            if (++li >= lines.size()) throw ParseError(line_no, "unterminated multi-line array");
            rhs += ' ';
            rhs += detail::strip_comment(lines[li]);
        }

        std::size_t vp = 0;
        Value v = detail::parse_value(rhs, vp, line_no);
        detail::skip_ws(rhs, vp);
        if (vp != rhs.size()) throw ParseError(line_no, "trailing characters after value");
        if (current->has(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
        current->tbl.emplace_back(key, std::move(v));
    }
    return root;
}

inline Value parse_file(const std::string& path) { return parse(read_file(path)); }

}  // namespace nbcert::toml
