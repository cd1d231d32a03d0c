#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lumisplat {

// Error with a stable code name; what() is "Code: detail".
class Error : public std::runtime_error {
   public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

   private:
    std::string code_;
};

// Row-major, channel-interleaved image of doubles.
class Image {
   public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : h_(height), w_(width), c_(channels), data_(static_cast<size_t>(height) * width * channels, fill) {}

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int r, int c, int ch = 0) { return data_[(static_cast<size_t>(r) * w_ + c) * c_ + ch]; }
    double at(int r, int c, int ch = 0) const { return data_[(static_cast<size_t>(r) * w_ + c) * c_ + ch]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(int r) { return data_.data() + static_cast<size_t>(r) * w_ * c_; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * w_ * c_; }

    bool same_shape(const Image& o) const { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }

    double mean() const {
        if (data_.empty()) return 0.0;
        double s = 0.0;
        for (double v : data_) s += v;
        return s / static_cast<double>(data_.size());
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    Image clamped01() const {
        Image out = *this;
        for (double& v : out.data_) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        return out;
    }

   private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> data_;
};

}  // namespace lumisplat
