#include "lumisplat/metrics.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "lumisplat/vec.hpp"

namespace lumisplat {

double psnr(const Image& a, const Image& b, const Image* mask) {
    if (!a.same_shape(b)) throw Error("ShapeMismatch", "psnr inputs differ in shape");

    double se = 0.0;
    size_t n = 0;
    for (int r = 0; r < a.height(); ++r)
        for (int c = 0; c < a.width(); ++c) {
            if (mask && mask->at(r, c) < 0.5) continue;
            for (int k = 0; k < a.channels(); ++k) {
                const double d = clamp01(a.at(r, c, k)) - clamp01(b.at(r, c, k));
                se += d * d;
                ++n;
            }
        }
    if (n == 0) throw Error("EmptyMask", "psnr over an all-zero mask");

    const double mse = se / static_cast<double>(n);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

Image to_gray(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.height(), img.width(), 1);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            double s = 0.0;
            for (int k = 0; k < img.channels(); ++k) s += img.at(r, c, k);
            out.at(r, c) = s / img.channels();
        }
    return out;
}

}  // namespace

double ssim(const Image& a_in, const Image& b_in) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2
    constexpr double kC2 = 0.03 * 0.03;

    if (a_in.height() < kWin || a_in.width() < kWin)
        throw Error("TooSmall", "ssim needs at least an 11x11 image");
    if (!a_in.same_shape(b_in)) throw Error("ShapeMismatch", "ssim inputs differ in shape");

    const Image a = to_gray(a_in);
    const Image b = to_gray(b_in);

    double window[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double di = i - kWin / 2, dj = j - kWin / 2;
            window[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
            wsum += window[i][j];
        }
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) window[i][j] /= wsum;

    double total = 0.0;
    size_t count = 0;
    for (int r = 0; r + kWin <= a.height(); ++r)
        for (int c = 0; c + kWin <= a.width(); ++c) {
            double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double w = window[i][j];
                    const double va = a.at(r + i, c + j);
                    const double vb = b.at(r + i, c + j);
                    mu_a += w * va;
                    mu_b += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
            const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
            total += num / den;
            ++count;
        }
    return total / static_cast<double>(count);
}

void EvalReport::add(const std::string& name, double p, double s) {
    names.push_back(name);
    psnr_values.push_back(p);
    ssim_values.push_back(s);
}

void EvalReport::finalize() {
    mean_psnr = mean_ssim = 0.0;
    if (names.empty()) return;
    for (size_t i = 0; i < names.size(); ++i) {
        mean_psnr += psnr_values[i];
        mean_ssim += ssim_values[i];
    }
    mean_psnr /= static_cast<double>(names.size());
    mean_ssim /= static_cast<double>(names.size());
}

std::string EvalReport::to_tsv() const {
    std::ostringstream os;
    os << "frame\tpsnr\tssim\n";
    os.precision(6);
    os << std::fixed;
    for (size_t i = 0; i < names.size(); ++i)
        os << names[i] << "\t" << psnr_values[i] << "\t" << ssim_values[i] << "\n";
    os << "mean\t" << mean_psnr << "\t" << mean_ssim << "\n";
    return os.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["frames"] = nlohmann::json::array();
    for (size_t i = 0; i < names.size(); ++i)
        j["frames"].push_back({{"name", names[i]}, {"psnr", psnr_values[i]}, {"ssim", ssim_values[i]}});
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    j["masked"] = masked;
    j["frame_count"] = names.size();
    j["lpips"] = nullptr;  // unavailable: needs a pretrained network
    return j.dump(2);
}

}  // namespace lumisplat
