#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ridgescan/common.hpp"

namespace ridgescan {

//! An n x d point cloud with immutable, stable row ordering. Resampling
//! indices always refer to this ordering.
class Sample {
public:
    /// points: one row per observation. Requires n >= 2, d >= 2, all finite.
    explicit Sample(Eigen::MatrixXd points) : points_(std::move(points)) {
        if (points_.rows() < 2)
            throw input_error("Sample requires at least 2 points, got " +
                              std::to_string(points_.rows()));
        if (points_.cols() < 2)
            throw input_error("Sample requires ambient dimension >= 2 (1-ridges need d >= 2), got d=" +
                              std::to_string(points_.cols()));
        if (!points_.allFinite())
            throw input_error("Sample contains non-finite coordinates");
    }

    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }
    const Eigen::MatrixXd& points() const { return points_; }
    Eigen::VectorXd point(Eigen::Index i) const { return points_.row(i).transpose(); }

private:
    Eigen::MatrixXd points_;
};

namespace detail {

inline double parse_double(std::string_view token, std::size_t line_no) {
    // trim ASCII whitespace
    std::size_t b = token.find_first_not_of(" \t\r");
    std::size_t e = token.find_last_not_of(" \t\r");
    if (b == std::string_view::npos)
        throw input_error("empty numeric field on line " + std::to_string(line_no));
    token = token.substr(b, e - b + 1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw input_error("cannot parse '" + std::string(token) + "' as a number on line " +
                          std::to_string(line_no));
    return value;
}

} // namespace detail

/// CSV ingestion: one point per row, d comma-separated columns, no header by
/// default. All values parsed as 64-bit doubles.
inline Sample load_sample_csv(const std::string& path, bool header = false) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open input file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool skip = header;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip) {
            skip = false;
            continue;
        }
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            std::string_view tok(line.data() + pos,
                                 (comma == std::string::npos ? line.size() : comma) - pos);
            row.push_back(detail::parse_double(tok, line_no));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw input_error("inconsistent column count on line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw input_error("no data rows in " + path);
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return Sample(std::move(m));
}

/// JSON ingestion: a top-level array of arrays of numbers.
inline Sample load_sample_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open input file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    if (!j.is_array() || j.empty())
        throw input_error("expected a non-empty JSON array of arrays in " + path);
    const std::size_t n = j.size();
    if (!j[0].is_array()) throw input_error("expected array-of-arrays in " + path);
    const std::size_t d = j[0].size();
    Eigen::MatrixXd m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != d)
            throw input_error("row " + std::to_string(i) + " has inconsistent length in " + path);
        for (std::size_t k = 0; k < d; ++k) {
            if (!j[i][k].is_number())
                throw input_error("non-numeric entry in row " + std::to_string(i));
            m(i, k) = j[i][k].get<double>();
        }
    }
    return Sample(std::move(m));
}

enum class SampleFormat { Auto, Csv, Json };

inline Sample load_sample(const std::string& path, SampleFormat format = SampleFormat::Auto,
                          bool csv_header = false) {
    if (format == SampleFormat::Auto) {
        auto dot = path.rfind('.');
        std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
        format = (ext == "json") ? SampleFormat::Json : SampleFormat::Csv;
    }
    return format == SampleFormat::Json ? load_sample_json(path)
                                        : load_sample_csv(path, csv_header);
}

} // namespace ridgescan
