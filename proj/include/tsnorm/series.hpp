#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsnorm/error.hpp"

namespace tsnorm {

// Dense row-major matrix of doubles. Rows are time steps, columns are
// channels throughout the library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
        return out;
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// A raw multivariate series: T x C values plus channel names and (optionally)
// the timestamp strings of the source file, kept only for round-tripping.
struct SeriesMatrix {
    std::vector<std::string> channel_names;
    std::vector<std::string> timestamps; // empty when the source had none
    Matrix values;                       // T x C

    std::size_t length() const noexcept { return values.rows(); }
    std::size_t channels() const noexcept { return values.cols(); }
};

// One (lookback, target) window pair cut from a series.
struct Instance {
    Matrix lookback;          // L x C
    Matrix target;            // H x C; may be empty at pure-inference time
    std::string dataset_id;
    std::size_t window_index = 0; // start offset of the lookback in the series

    std::size_t lookback_length() const noexcept { return lookback.rows(); }
    std::size_t horizon() const noexcept { return target.rows(); }
    std::size_t channels() const noexcept { return lookback.cols(); }
};

} // namespace tsnorm
