#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cardiofeat/error.hpp"
#include "cardiofeat/feature_vector.hpp"

namespace cardiofeat {

enum class FeatureSet { Radiomic, Geometric, Combined };

std::string_view to_string(FeatureSet set);
/// "radiomic" | "geometric" | "combined"; throws ConfigError otherwise.
FeatureSet parse_feature_set(std::string_view text);

/// Subjects x features, row-major, kMissing allowed; label 0 healthy / 1 diseased.
class FeatureTable {
public:
    FeatureTable() = default;
    explicit FeatureTable(std::vector<std::string> columns);

    /// Throws ColumnMismatch on a wrong row length, InvalidArgument on a
    /// duplicate id or a non-binary label.
    void add_row(std::string subject_id, std::span<const double> values, int label);
    void add_row(std::string subject_id, const FeatureVector &features, int label);

    std::size_t rows() const noexcept { return ids_.size(); }
    std::size_t cols() const noexcept { return columns_.size(); }
    const std::vector<std::string> &columns() const noexcept { return columns_; }
    const std::vector<std::string> &subject_ids() const noexcept { return ids_; }
    const std::vector<int> &labels() const noexcept { return labels_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    double &at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    /// Row index of a subject; throws InvalidArgument when absent.
    std::size_t row_of(std::string_view subject_id) const;

    FeatureTable subset_rows(std::span<const std::size_t> rows) const;
    FeatureTable subset_columns(std::span<const std::size_t> cols) const;

    friend bool operator==(const FeatureTable &a, const FeatureTable &b);

private:
    std::vector<std::string> columns_;
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::vector<int> labels_;
};

/// Columns of `b` appended to `a`, matched by subject id (order of `a`).
/// Throws InvalidArgument when ids or labels disagree or a column name repeats.
FeatureTable join_columns(const FeatureTable &a, const FeatureTable &b);

/// Geometric columns contain "_geom_"; singular-value columns "_geom_svK"
/// with K > n_svd are dropped.
bool is_geometric_column(std::string_view name);
std::vector<std::size_t> feature_set_columns(const FeatureTable &table, FeatureSet set, int n_svd);
FeatureTable select_feature_set(const FeatureTable &table, FeatureSet set, int n_svd);

/// Header: subject_id,<columns...>,label. Missing values are empty cells.
void write_feature_table(const FeatureTable &table, std::ostream &out);
void write_feature_table(const FeatureTable &table, const std::filesystem::path &path);
FeatureTable read_feature_table(std::istream &in);
FeatureTable read_feature_table(const std::filesystem::path &path);

}  // namespace cardiofeat
