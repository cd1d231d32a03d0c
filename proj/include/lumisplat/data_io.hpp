#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/illumination.hpp"
#include "lumisplat/image.hpp"
#include "lumisplat/model.hpp"

namespace lumisplat {

// One observation.
struct Frame {
    Image image;  // H x W x 3 in [0, 1]
    Image depth;  // H x W, scene units, 0 = invalid
    Image mask;   // H x W, 1 = tissue, 0 = tool/ignore
    Camera camera;
    double time = 0.0;  // in [0, 1], nondecreasing across the sequence
    ICLabel ic = ICLabel::Dark;
    double mean_prior = 0.0;
};

struct FrameRecord {
    std::string image, depth, mask;
    double time = 0.0;
    std::optional<std::string> ic;  // "bright" | "dark"
    std::optional<double> mean_prior;
    std::optional<double> ev_true;
    std::array<double, 16> w2c{};  // row-major 4x4
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
};

struct DatasetManifest {
    int version = 1;
    int width = 0, height = 0;
    double depth_scale = 1.0;  // scene units per 16-bit count
    std::vector<FrameRecord> frames;
    std::vector<int> train_idx, test_idx;
};

struct Dataset {
    std::filesystem::path root;
    DatasetManifest manifest;
    std::vector<Frame> frames;
};

// Reads manifest.json plus the referenced images. IC labels and prior means
// missing from the manifest are computed and written back, so a second load
// sees identical data. Throws Error("MissingFile"), Error("ShapeMismatch")
// or Error("BadManifest").
Dataset load_dataset(const std::filesystem::path& dir);

struct SynthSpec {
    int frames = 21;
    int width = 64, height = 64;
    std::vector<double> ev_levels{-2.0, 0.0, 2.0};  // under, normal, over
    double ev_jitter = 0.5;
    int block = 7;  // frames per exposure level
    bool tool = false;
    uint64_t seed = 1;
};

// Deterministic synthetic dataset: a textured sinusoidal surface swept in
// time, viewed by a fixed pinhole camera, with gain-model exposure
// corruption I' = clamp(I * 2^EV). Uncorrupted frames land in images_gt/.
// Throws Error("BadSpec") for unusable parameters.
void synth_dataset(const SynthSpec& spec, const std::filesystem::path& dir);

// PNG io (8-bit RGB, 16-bit grayscale depth, 8-bit masks).
void write_png_rgb8(const std::filesystem::path& path, const Image& img);
Image read_png_rgb8(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const Image& img, double scale);
Image read_png_gray16(const std::filesystem::path& path, double scale);
void write_png_mask(const std::filesystem::path& path, const Image& mask);
Image read_png_mask(const std::filesystem::path& path);

struct Checkpoint {
    ModelState state;
    std::string config_echo;
};

// Little-endian binary container, magic "E4GX", version 1; model arrays as
// 32-bit floats. Round-trips byte-exactly. Throws Error("BadMagic"),
// Error("VersionUnsupported") or Error("Truncated").
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lumisplat
