#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covr/error.hpp"

namespace covr {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

/// Dense row-major tensor of doubles, rank 1 to 3.
///
/// Matrix kernels treat a rank-1 tensor of length n as a 1 x n row.
class Tensor {
   public:
    Tensor() = default;

    explicit Tensor(Shape dims) : dims_(std::move(dims)) {
        validate_dims();
        data_.assign(element_count(dims_), 0.0);
    }

    Tensor(Shape dims, std::vector<double> values) : dims_(std::move(dims)), data_(std::move(values)) {
        validate_dims();
        if (data_.size() != element_count(dims_)) {
            throw shape_error("tensor " + shape_string(dims_) + " given " + std::to_string(data_.size()) +
                              " values");
        }
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> values;
        values.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw shape_error("ragged rows");
            values.insert(values.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(values));
    }

    /// 1 x n matrix holding a copy of `values`.
    static Tensor row(std::span<const double> values) {
        return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims_); }

    const Shape& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const {
        if (dims_.size() == 1) return 1;
        if (dims_.size() == 2) return dims_[0];
        throw shape_error("rank-3 tensor " + shape_string(dims_) + " used as a matrix");
    }
    std::size_t cols() const {
        if (dims_.size() == 1) return dims_[0];
        if (dims_.size() == 2) return dims_[1];
        throw shape_error("rank-3 tensor " + shape_string(dims_) + " used as a matrix");
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row_span(std::size_t r) {
        const std::size_t c = cols();
        return std::span<double>(data_).subspan(r * c, c);
    }
    std::span<const double> row_span(std::size_t r) const {
        const std::size_t c = cols();
        return std::span<const double>(data_).subspan(r * c, c);
    }

    bool same_shape(const Tensor& o) const noexcept { return dims_ == o.dims_; }

    /// Exact element-wise equality (shape included).
    friend bool operator==(const Tensor&, const Tensor&) = default;

   private:
    static std::size_t element_count(const Shape& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }

    void validate_dims() const {
        if (dims_.empty() || dims_.size() > 3) {
            throw shape_error("tensor rank must be 1..3, got " + std::to_string(dims_.size()));
        }
        for (auto d : dims_) {
            if (d == 0) throw shape_error("zero extent in " + shape_string(dims_));
        }
    }

    Shape dims_;
    std::vector<double> data_;
};

inline bool all_finite(const Tensor& t) {
    return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw shape_error(std::string(op) + ": " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
    }
}

inline void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() > 2) throw shape_error(std::string(op) + " expects a matrix, got " + shape_string(t.dims()));
}

// ---------------------------------------------------------------------------
// Plain tensor kernels. The autodiff layer calls these for both passes.
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw shape_error("matmul: " + shape_string(a.dims()) + " x " + shape_string(b.dims()));
    }
    Tensor out({m, n});
    auto o = out.values();
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + p * n;
            double* orow = o.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

/// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    Tensor out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            total += v;
        }
        for (double& v : row) v /= total;
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw shape_error("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace covr
