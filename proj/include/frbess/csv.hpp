// Minimal CSV reading/writing. Doubles are printed with std::to_chars so a
// written file parses back to bit-identical values and output is locale-free.
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace frbess::csv {

inline std::string fmt(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(long x) { return std::to_string(x); }
inline std::string fmt(std::size_t x) { return std::to_string(x); }
inline const std::string& fmt(const std::string& s) { return s; }

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }

    template <typename... Ts>
    void row(const Ts&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ","), first = false, out_ << fmt(fields)), ...);
        out_ << '\n';
    }

    void raw_line(const std::string& line) { out_ << line << '\n'; }

    void close() {
        out_.flush();
        if (!out_) throw std::runtime_error("csv write failed");
        out_.close();
    }

  private:
    std::ofstream out_;
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_double(const std::string& s) {
    // std::from_chars(double) round-trips what fmt() wrote.
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw std::runtime_error("bad numeric cell: '" + s + "'");
    return v;
}

// Reads all rows of a CSV file, skipping the first line when it matches the
// expected header.
inline std::vector<std::vector<std::string>> read_rows(const std::string& path,
                                                       const std::string& expect_header = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first && !expect_header.empty() && line == expect_header) {
            first = false;
            continue;
        }
        first = false;
        rows.push_back(split_line(line));
    }
    return rows;
}

}  // namespace frbess::csv
