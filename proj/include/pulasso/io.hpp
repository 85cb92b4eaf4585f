#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pulasso/groups.hpp"
#include "pulasso/model.hpp"

namespace pulasso::io {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

inline double parse_double(const std::string& s) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("cannot parse number: '" + s + "'");
    }
    if (pos != s.size()) throw std::runtime_error("cannot parse number: '" + s + "'");
    return v;
}

/// Shortest exact decimal representation (round-trips through strtod).
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// CSV with a header line; '#'-prefixed lines are comments.
inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, ',');
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else {
            if (fields.size() != t.header.size())
                throw std::runtime_error(path + ": row has " + std::to_string(fields.size()) +
                                         " fields, header has " + std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (!have_header) throw std::runtime_error(path + ": empty file");
    return t;
}

struct NamedMatrix {
    MatrixXd x;
    std::vector<std::string> col_names;
};

inline NamedMatrix read_csv_matrix(const std::string& path) {
    CsvTable t = read_csv_table(path);
    NamedMatrix out;
    out.col_names = t.header;
    out.x.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < t.header.size(); ++j)
            out.x(static_cast<Index>(i), static_cast<Index>(j)) = parse_double(t.rows[i][j]);
    return out;
}

/// Single numeric column; a non-numeric first line is treated as a header.
inline VectorXd read_csv_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<double> vals;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (first) {
            first = false;
            try {
                vals.push_back(parse_double(line));
            } catch (const std::exception&) {
                // header
            }
            continue;
        }
        vals.push_back(parse_double(line));
    }
    return Eigen::Map<VectorXd>(vals.data(), static_cast<Index>(vals.size()));
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows,
                      const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    if (!comment.empty()) out << "# " << comment << "\n";
    for (std::size_t j = 0; j < header.size(); ++j)
        out << header[j] << (j + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows)
        for (std::size_t j = 0; j < row.size(); ++j)
            out << row[j] << (j + 1 < row.size() ? "," : "\n");
}

// ---------------------------------------------------------------------------
// MatrixMarket coordinate format
// ---------------------------------------------------------------------------

inline SparseMatrixd read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket" || object != "matrix" || format != "coordinate")
        throw std::runtime_error(path + ": expected a MatrixMarket coordinate header");
    const bool pattern = field == "pattern";
    if (field != "real" && field != "integer" && !pattern)
        throw std::runtime_error(path + ": unsupported MatrixMarket field '" + field + "'");
    if (symmetry != "general")
        throw std::runtime_error(path + ": only general symmetry is supported");

    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream dims(line);
    Index nrow = 0, ncol = 0;
    long long nnz = 0;
    if (!(dims >> nrow >> ncol >> nnz)) throw std::runtime_error(path + ": bad size line");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated entries");
        std::istringstream es(line);
        Index i = 0, j = 0;
        double v = 1.0;
        if (!(es >> i >> j)) throw std::runtime_error(path + ": bad entry line");
        if (!pattern && !(es >> v)) throw std::runtime_error(path + ": bad entry line");
        if (i < 1 || i > nrow || j < 1 || j > ncol)
            throw std::runtime_error(path + ": entry index out of range");
        trips.emplace_back(i - 1, j - 1, v);
    }
    SparseMatrixd x(nrow, ncol);
    x.setFromTriplets(trips.begin(), trips.end());
    x.makeCompressed();
    return x;
}

inline void write_matrix_market(const std::string& path, const SparseMatrixd& x,
                                const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    out << x.rows() << " " << x.cols() << " " << x.nonZeros() << "\n";
    for (int c = 0; c < x.outerSize(); ++c)
        for (SparseMatrixd::InnerIterator it(x, c); it; ++it)
            out << (it.row() + 1) << " " << (it.col() + 1) << " " << format_double(it.value())
                << "\n";
}

// ---------------------------------------------------------------------------
// Group specification: TSV of (column_name, group_id, optional weight)
// ---------------------------------------------------------------------------

inline GroupSpec read_group_tsv(const std::string& path, const std::vector<std::string>& col_names) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open group spec: " + path);
    std::map<std::string, Index> col_index;
    for (std::size_t c = 0; c < col_names.size(); ++c)
        col_index[col_names[c]] = static_cast<Index>(c);

    std::map<long, std::vector<Index>> by_id; // raw id -> user column indices
    std::map<long, double> weight_by_id;
    std::vector<char> listed(col_names.size(), 0);

    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, '\t');
        if (fields.size() < 2 || fields.size() > 3)
            throw std::runtime_error("malformed group spec line: '" + line + "'");
        auto it = col_index.find(fields[0]);
        if (it == col_index.end())
            throw std::runtime_error("group spec names unknown column '" + fields[0] + "'");
        if (listed[static_cast<std::size_t>(it->second)])
            throw std::runtime_error("column '" + fields[0] + "' listed twice in group spec");
        listed[static_cast<std::size_t>(it->second)] = 1;
        long id;
        try {
            id = std::stol(fields[1]);
        } catch (const std::exception&) {
            throw std::runtime_error("malformed group id: '" + fields[1] + "'");
        }
        by_id[id].push_back(it->second);
        if (fields.size() == 3 && !fields[2].empty()) {
            const double w = parse_double(fields[2]);
            if (!(w > 0.0)) throw std::runtime_error("group weights must be > 0");
            auto wit = weight_by_id.find(id);
            if (wit != weight_by_id.end() && wit->second != w)
                throw std::runtime_error("conflicting weights for group " + std::to_string(id));
            weight_by_id[id] = w;
        }
    }
    for (std::size_t c = 0; c < col_names.size(); ++c)
        if (!listed[c])
            throw std::runtime_error("group spec does not cover column '" + col_names[c] + "'");

    std::vector<int> id_per_col(col_names.size(), 0);
    std::vector<double> weights;
    int next = 1;
    for (const auto& [id, cols] : by_id) {
        for (Index c : cols) id_per_col[static_cast<std::size_t>(c)] = next;
        weights.push_back(weight_by_id.count(id)
                              ? weight_by_id[id]
                              : std::sqrt(static_cast<double>(cols.size())));
        ++next;
    }
    return GroupSpec::from_ids(id_per_col, weights);
}

// ---------------------------------------------------------------------------
// Categorical ingestion: one-hot against a reference level, rare levels
// merged into a per-column "other" indicator.
// ---------------------------------------------------------------------------

struct IngestResult {
    SparseMatrixd x;
    std::vector<std::string> col_names;
};

/// threshold = min(100, 1% of the column's non-reference count); levels with
/// fewer occurrences are aggregated.
inline IngestResult ingest_categorical(const CsvTable& table,
                                       const std::vector<std::string>& reference) {
    const std::size_t ncol = table.header.size();
    if (reference.size() != ncol)
        throw std::runtime_error("reference row must have one level per column");
    const Index n = static_cast<Index>(table.rows.size());

    IngestResult out;
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t c = 0; c < ncol; ++c) {
        std::map<std::string, Index> counts;
        for (const auto& row : table.rows)
            if (row[c] != reference[c]) ++counts[row[c]];
        Index non_ref = 0;
        for (const auto& [level, cnt] : counts) non_ref += cnt;
        const double threshold = std::min(100.0, 0.01 * static_cast<double>(non_ref));

        std::map<std::string, Index> level_col; // level -> output column
        Index other_col = -1;
        bool has_rare = false;
        for (const auto& [level, cnt] : counts)
            if (static_cast<double>(cnt) < threshold) has_rare = true;
        for (const auto& [level, cnt] : counts) {
            if (static_cast<double>(cnt) < threshold) continue;
            level_col[level] = static_cast<Index>(out.col_names.size());
            out.col_names.push_back(table.header[c] + "=" + level);
        }
        if (has_rare) {
            other_col = static_cast<Index>(out.col_names.size());
            out.col_names.push_back(table.header[c] + "=__other__");
        }
        for (Index i = 0; i < n; ++i) {
            const std::string& level = table.rows[static_cast<std::size_t>(i)][c];
            if (level == reference[c]) continue;
            auto it = level_col.find(level);
            trips.emplace_back(i, it != level_col.end() ? it->second : other_col, 1.0);
        }
    }
    out.x.resize(n, static_cast<Index>(out.col_names.size()));
    out.x.setFromTriplets(trips.begin(), trips.end());
    out.x.makeCompressed();
    return out;
}

} // namespace pulasso::io
