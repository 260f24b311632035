#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbcert {

/// Shortest round-trip decimal form of a double. Deterministic, so emitted
/// CSV files are byte-identical across runs and thread counts.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

/// Row-oriented CSV builder with a fixed header.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) body_ += ',';
            body_ += header[i];
        }
        body_ += '\n';
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_) throw std::invalid_argument("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ += ',';
            body_ += format_double(values[i]);
        }
        body_ += '\n';
    }

    const std::string& str() const { return body_; }
    void save(const std::string& path) const { write_file(path, body_); }

private:
    std::size_t columns_;
    std::string body_;
};

}  // namespace nbcert
