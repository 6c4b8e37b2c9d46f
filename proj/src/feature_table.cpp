#include "cardiofeat/feature_table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"

namespace cardiofeat {

std::string_view to_string(FeatureSet set) {
    switch (set) {
        case FeatureSet::Radiomic: return "radiomic";
        case FeatureSet::Geometric: return "geometric";
        case FeatureSet::Combined: return "combined";
    }
    return "?";
}

FeatureSet parse_feature_set(std::string_view text) {
    if (text == "radiomic" || text == "radiomics") return FeatureSet::Radiomic;
    if (text == "geometric" || text == "geom") return FeatureSet::Geometric;
    if (text == "combined") return FeatureSet::Combined;
    throw Error(ErrorCode::ConfigError, "unknown feature set '" + std::string(text) + "'");
}

FeatureTable::FeatureTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (const auto &c : columns_) {
        if (!seen.insert(c).second) throw Error(ErrorCode::InvalidArgument, "duplicate column " + c);
    }
}

void FeatureTable::add_row(std::string subject_id, std::span<const double> values, int label) {
    if (values.size() != columns_.size()) {
        throw Error(ErrorCode::ColumnMismatch, "row for " + subject_id + " has " + std::to_string(values.size()) +
                                                   " values, expected " + std::to_string(columns_.size()));
    }
    if (label != 0 && label != 1) throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1 for " + subject_id);
    if (std::find(ids_.begin(), ids_.end(), subject_id) != ids_.end()) {
        throw Error(ErrorCode::InvalidArgument, "duplicate subject id " + subject_id);
    }
    for (double v : values) {
        if (std::isinf(v)) throw Error(ErrorCode::InvalidArgument, "infinite feature value for " + subject_id);
    }
    ids_.push_back(std::move(subject_id));
    values_.insert(values_.end(), values.begin(), values.end());
    labels_.push_back(label);
}

void FeatureTable::add_row(std::string subject_id, const FeatureVector &features, int label) {
    if (features.names() != columns_) {
        throw Error(ErrorCode::ColumnMismatch, "feature names for " + subject_id + " do not match table columns");
    }
    const auto v = features.values();
    add_row(std::move(subject_id), v, label);
}

std::size_t FeatureTable::row_of(std::string_view subject_id) const {
    auto it = std::find(ids_.begin(), ids_.end(), subject_id);
    if (it == ids_.end()) throw Error(ErrorCode::InvalidArgument, "unknown subject " + std::string(subject_id));
    return static_cast<std::size_t>(it - ids_.begin());
}

FeatureTable FeatureTable::subset_rows(std::span<const std::size_t> rows) const {
    FeatureTable out(columns_);
    for (std::size_t r : rows) out.add_row(ids_.at(r), row(r), labels_[r]);
    return out;
}

FeatureTable FeatureTable::subset_columns(std::span<const std::size_t> cols) const {
    std::vector<std::string> names;
    for (std::size_t c : cols) names.push_back(columns_.at(c));
    FeatureTable out(std::move(names));
    out.ids_ = ids_;
    out.labels_ = labels_;
    out.values_.reserve(rows() * cols.size());
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c : cols) out.values_.push_back(at(r, c));
    }
    return out;
}

bool operator==(const FeatureTable &a, const FeatureTable &b) {
    if (a.columns_ != b.columns_ || a.ids_ != b.ids_ || a.labels_ != b.labels_) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        const double x = a.values_[i], y = b.values_[i];
        if (!(x == y || (is_missing(x) && is_missing(y)))) return false;
    }
    return true;
}

FeatureTable join_columns(const FeatureTable &a, const FeatureTable &b) {
    std::vector<std::string> names = a.columns();
    names.insert(names.end(), b.columns().begin(), b.columns().end());
    FeatureTable out(std::move(names));
    if (a.rows() != b.rows()) throw Error(ErrorCode::InvalidArgument, "joined tables have different subject counts");
    std::vector<double> buf;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const std::size_t rb = b.row_of(a.subject_ids()[r]);
        if (b.labels()[rb] != a.labels()[r]) {
            throw Error(ErrorCode::InvalidArgument, "label disagreement for " + a.subject_ids()[r]);
        }
        buf.assign(a.row(r).begin(), a.row(r).end());
        buf.insert(buf.end(), b.row(rb).begin(), b.row(rb).end());
        out.add_row(a.subject_ids()[r], buf, a.labels()[r]);
    }
    return out;
}

bool is_geometric_column(std::string_view name) { return name.find("_geom_") != std::string_view::npos; }

std::vector<std::size_t> feature_set_columns(const FeatureTable &table, FeatureSet set, int n_svd) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const std::string &name = table.columns()[c];
        const bool geom = is_geometric_column(name);
        if (set == FeatureSet::Radiomic && geom) continue;
        if (set == FeatureSet::Geometric && !geom) continue;
        if (geom) {
            const auto pos = name.rfind("_geom_sv");
            if (pos != std::string::npos) {
                const int k = std::atoi(name.c_str() + pos + 8);
                if (k > n_svd) continue;
            }
        }
        out.push_back(c);
    }
    return out;
}

FeatureTable select_feature_set(const FeatureTable &table, FeatureSet set, int n_svd) {
    const auto cols = feature_set_columns(table, set, n_svd);
    if (cols.empty()) {
        throw Error(ErrorCode::ColumnMismatch, "table has no columns for feature set " + std::string(to_string(set)));
    }
    return table.subset_columns(cols);
}

void write_feature_table(const FeatureTable &table, std::ostream &out) {
    out << "subject_id";
    for (const auto &c : table.columns()) out << ',' << c;
    out << ",label\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << table.subject_ids()[r];
        for (double v : table.row(r)) out << ',' << csv::format_double(v);
        out << ',' << table.labels()[r] << '\n';
    }
}

void write_feature_table(const FeatureTable &table, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    write_feature_table(table, out);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

FeatureTable read_feature_table(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "empty feature table");
    auto header = csv::split(line);
    if (header.size() < 2 || header.front() != "subject_id" || header.back() != "label") {
        throw Error(ErrorCode::MalformedHeader, "feature table header must be subject_id,...,label");
    }
    FeatureTable table(std::vector<std::string>(header.begin() + 1, header.end() - 1));
    std::vector<double> row;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = csv::split(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::ColumnMismatch, "line " + std::to_string(lineno) + " has " +
                                                       std::to_string(cells.size()) + " cells");
        }
        row.clear();
        for (std::size_t c = 1; c + 1 < cells.size(); ++c) row.push_back(csv::parse_double(cells[c]));
        const double label = csv::parse_double(cells.back());
        if (label != 0.0 && label != 1.0) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(lineno) + ": label must be 0 or 1");
        }
        table.add_row(cells.front(), row, static_cast<int>(label));
    }
    return table;
}

FeatureTable read_feature_table(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    return read_feature_table(in);
}

}  // namespace cardiofeat
