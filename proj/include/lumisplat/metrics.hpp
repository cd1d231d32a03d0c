#pragma once

#include <string>
#include <vector>

#include "lumisplat/image.hpp"

namespace lumisplat {

inline constexpr double kPsnrCap = 100.0;

// 10*log10(1/MSE) over masked pixels with values clamped to [0, 1];
// identical images report the 100 dB cap. A null mask evaluates everywhere.
// Throws Error("EmptyMask") when the mask excludes every pixel.
double psnr(const Image& a, const Image& b, const Image* mask = nullptr);

// Standard single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01,
// K2=0.03, L=1, mean over valid window positions; multichannel inputs are
// averaged to gray first. Throws Error("TooSmall") below 11x11.
double ssim(const Image& a, const Image& b);

struct EvalReport {
    std::vector<std::string> names;
    std::vector<double> psnr_values;
    std::vector<double> ssim_values;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    bool masked = false;

    void add(const std::string& name, double p, double s);
    void finalize();
    std::string to_tsv() const;
    std::string to_json() const;
};

}  // namespace lumisplat
