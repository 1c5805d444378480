#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace voteboost {

/// Precondition violated by the caller (bad shape, empty class, p at 0 or 1, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input file could not be turned into a Dataset.
class IngestionError : public std::runtime_error {
public:
    IngestionError(const std::string& what, std::size_t row, std::string column)
        : std::runtime_error(what), row_(row), column_(std::move(column)) {}
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// Internal invariant broken; indicates a bug rather than bad input.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using Label = int;  // -1 or +1

/// Immutable N x D table of finite reals with binary labels.
class Dataset {
public:
    Dataset(std::size_t n_features, std::vector<double> features, std::vector<Label> labels,
            std::vector<std::string> attribute_names = {})
        : d_(n_features), x_(std::move(features)), y_(std::move(labels)),
          names_(std::move(attribute_names)) {
        if (d_ == 0) throw DomainError("dataset needs at least one attribute");
        if (y_.empty()) throw DomainError("dataset needs at least one instance");
        if (x_.size() != y_.size() * d_) throw DomainError("feature matrix size does not match N x D");
        if (!names_.empty() && names_.size() != d_)
            throw DomainError("attribute_names length differs from D");
        for (Label l : y_)
            if (l != 1 && l != -1) throw DomainError("labels must be -1 or +1");
        for (double v : x_)
            if (!std::isfinite(v)) throw DomainError("feature values must be finite");
    }

    std::size_t size() const { return y_.size(); }
    std::size_t dim() const { return d_; }

    std::span<const double> row(std::size_t i) const { return {x_.data() + i * d_, d_}; }
    double at(std::size_t i, std::size_t j) const { return x_[i * d_ + j]; }
    Label label(std::size_t i) const { return y_[i]; }

    const std::vector<Label>& labels() const { return y_; }
    const std::vector<double>& features() const { return x_; }
    const std::vector<std::string>& attribute_names() const { return names_; }

    std::size_t count(Label c) const {
        return static_cast<std::size_t>(std::count(y_.begin(), y_.end(), c));
    }

    /// Rows picked by index (repeats allowed), in the given order.
    Dataset subset(std::span<const std::size_t> idx) const {
        if (idx.empty()) throw DomainError("subset must be nonempty");
        std::vector<double> x;
        std::vector<Label> y;
        x.reserve(idx.size() * d_);
        y.reserve(idx.size());
        for (auto i : idx) {
            auto r = row(i);
            x.insert(x.end(), r.begin(), r.end());
            y.push_back(y_[i]);
        }
        return Dataset(d_, std::move(x), std::move(y), names_);
    }

    Dataset with_labels(std::vector<Label> labels) const {
        return Dataset(d_, x_, std::move(labels), names_);
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::size_t d_;
    std::vector<double> x_;
    std::vector<Label> y_;
    std::vector<std::string> names_;
};

/// Nonnegative per-instance weights summing to one.
class WeightVector {
public:
    static WeightVector uniform(std::size_t n) {
        if (n == 0) throw DomainError("weight vector must be nonempty");
        return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)), Normalized{});
    }

    /// Normalizes raw nonnegative masses.
    static WeightVector from_masses(std::vector<double> m) {
        if (m.empty()) throw DomainError("weight vector must be nonempty");
        double z = 0.0;
        for (double v : m) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("weights must be finite and nonnegative");
            z += v;
        }
        if (z <= 0.0) throw DomainError("all-zero weight vector cannot be normalized");
        for (double& v : m) v /= z;
        return WeightVector(std::move(m), Normalized{});
    }

    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    std::span<const double> values() const { return w_; }

    friend bool operator==(const WeightVector&, const WeightVector&) = default;

private:
    struct Normalized {};
    WeightVector(std::vector<double> w, Normalized) : w_(std::move(w)) {}
    std::vector<double> w_;
};

}  // namespace voteboost
