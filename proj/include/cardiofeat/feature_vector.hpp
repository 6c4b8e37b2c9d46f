#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cardiofeat {

/// Quiet "not available" marker for features of absent structures. Serialized as
/// an empty CSV cell and imputed at training time.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Ordered (name, value) list with unique names.
class FeatureVector {
public:
    struct Entry {
        std::string name;
        double value;
        friend bool operator==(const Entry &a, const Entry &b) {
            return a.name == b.name && (a.value == b.value || (is_missing(a.value) && is_missing(b.value)));
        }
    };

    /// Throws InvalidArgument on duplicate names or non-finite values.
    void add(std::string name, double value);
    void add_missing(std::string name);
    /// Appends every entry of `other` with `prefix` prepended to its name.
    void append(std::string_view prefix, const FeatureVector &other);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<Entry> &entries() const noexcept { return entries_; }
    const Entry &operator[](std::size_t i) const { return entries_[i]; }

    std::optional<double> find(std::string_view name) const;
    /// Throws InvalidArgument when absent.
    double at(std::string_view name) const;
    std::vector<std::string> names() const;
    std::vector<double> values() const;

    friend bool operator==(const FeatureVector &, const FeatureVector &) = default;

private:
    void check_unique(const std::string &name) const;
    std::vector<Entry> entries_;
};

}  // namespace cardiofeat
