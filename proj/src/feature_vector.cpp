#include "cardiofeat/feature_vector.hpp"

#include <algorithm>

#include "cardiofeat/error.hpp"

namespace cardiofeat {

void FeatureVector::check_unique(const std::string &name) const {
    // Linear scan; vectors hold at most a few hundred entries.
    for (const auto &e : entries_) {
        if (e.name == name) {
            throw Error(ErrorCode::InvalidArgument, "duplicate feature name " + name);
        }
    }
}

void FeatureVector::add(std::string name, double value) {
    if (!std::isfinite(value)) {
        throw Error(ErrorCode::InvalidArgument, "non-finite value for feature " + name);
    }
    check_unique(name);
    entries_.push_back({std::move(name), value});
}

void FeatureVector::add_missing(std::string name) {
    check_unique(name);
    entries_.push_back({std::move(name), kMissing});
}

void FeatureVector::append(std::string_view prefix, const FeatureVector &other) {
    for (const auto &e : other.entries_) {
        std::string name = std::string(prefix) + e.name;
        if (is_missing(e.value)) {
            add_missing(std::move(name));
        } else {
            add(std::move(name), e.value);
        }
    }
}

std::optional<double> FeatureVector::find(std::string_view name) const {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry &e) { return e.name == name; });
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->value;
}

double FeatureVector::at(std::string_view name) const {
    auto v = find(name);
    if (!v) {
        throw Error(ErrorCode::InvalidArgument, "no feature named " + std::string(name));
    }
    return *v;
}

std::vector<std::string> FeatureVector::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto &e : entries_) out.push_back(e.name);
    return out;
}

std::vector<double> FeatureVector::values() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto &e : entries_) out.push_back(e.value);
    return out;
}

}  // namespace cardiofeat
