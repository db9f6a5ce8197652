#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "melc/harness.hpp"

namespace melc {

namespace {

struct RawPoint {
    double label;
    Vec coords;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);  // from_chars rejects a leading +
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

LabeledDataset assemble(std::vector<RawPoint> raw, std::size_t dim,
                        const std::string& path) {
    std::map<double, std::size_t> label_counts;
    for (const RawPoint& p : raw) ++label_counts[p.label];
    if (label_counts.size() != 2) {
        throw NotBinary(path + ": expected exactly 2 distinct labels, found " +
                        std::to_string(label_counts.size()));
    }
    const double neg_label = label_counts.begin()->first;  // smaller -> -1
    std::size_t n_neg = label_counts.begin()->second;
    std::size_t n_pos = label_counts.rbegin()->second;
    if (n_neg < 2 || n_pos < 2) {
        throw TooSmallClass(path + ": each class needs at least 2 points");
    }
    PointMatrix neg(n_neg, dim), pos(n_pos, dim);
    std::size_t i_neg = 0, i_pos = 0;
    for (const RawPoint& p : raw) {
        auto row = (p.label == neg_label) ? neg.row(i_neg++) : pos.row(i_pos++);
        std::copy(p.coords.begin(), p.coords.end(), row.begin());
    }
    return LabeledDataset(std::move(neg), std::move(pos));
}

}  // namespace

LabeledDataset load_libsvm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);

    std::vector<RawPoint> raw;
    std::vector<std::vector<std::pair<std::size_t, double>>> sparse;
    std::size_t max_index = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;  // blank line
        const auto label = parse_double(tok);
        if (!label) throw ParseError(path, line_no, "bad label '" + tok + "'");
        std::vector<std::pair<std::size_t, double>> entries;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw ParseError(path, line_no, "expected idx:val, got '" + tok + "'");
            const auto idx = parse_double(tok.substr(0, colon));
            const auto val = parse_double(tok.substr(colon + 1));
            if (!idx || !val || *idx < 1.0 || *idx != std::floor(*idx))
                throw ParseError(path, line_no, "bad feature '" + tok + "'");
            const auto index = static_cast<std::size_t>(*idx);
            entries.emplace_back(index, *val);
            max_index = std::max(max_index, index);
        }
        raw.push_back({*label, {}});
        sparse.push_back(std::move(entries));
    }
    if (raw.empty()) throw ParseError(path, 0, "empty file");
    if (max_index == 0) throw ParseError(path, 0, "no features found");

    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i].coords.assign(max_index, 0.0);
        for (const auto& [idx, val] : sparse[i]) raw[i].coords[idx - 1] = val;
    }
    return assemble(std::move(raw), max_index, path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

LabeledDataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw ParseError(path, 0, "empty file");

    const std::size_t width = rows.front().size();
    if (width < 2) throw ParseError(path, 1, "need at least 2 columns");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width)
            throw RaggedRows(path + ":" + std::to_string(r + 1) + ": expected " +
                             std::to_string(width) + " fields, got " +
                             std::to_string(rows[r].size()));
    }

    // Header detection: any non-numeric cell in the first row.
    bool has_header = false;
    for (const std::string& cell : rows.front()) {
        if (!parse_double(cell)) {
            has_header = true;
            break;
        }
    }

    std::size_t label_idx = width;
    if (has_header) {
        for (std::size_t c = 0; c < width; ++c) {
            if (std::string(trim(rows.front()[c])) == label_column) {
                label_idx = c;
                break;
            }
        }
    }
    if (label_idx == width) {
        const auto as_index = parse_double(label_column);
        if (!as_index || *as_index < 0 || *as_index >= static_cast<double>(width))
            throw ParseError(path, 0, "label column '" + label_column +
                                          "' not found");
        label_idx = static_cast<std::size_t>(*as_index);
    }

    std::vector<RawPoint> raw;
    for (std::size_t r = has_header ? 1 : 0; r < rows.size(); ++r) {
        RawPoint p;
        p.coords.reserve(width - 1);
        for (std::size_t c = 0; c < width; ++c) {
            const auto value = parse_double(rows[r][c]);
            if (!value)
                throw ParseError(path, r + 1,
                                 "non-numeric field '" + rows[r][c] + "'");
            if (c == label_idx) {
                p.label = *value;
            } else {
                p.coords.push_back(*value);
            }
        }
        raw.push_back(std::move(p));
    }
    return assemble(std::move(raw), width - 1, path);
}

}  // namespace melc
