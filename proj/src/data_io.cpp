#include "lumisplat/data_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace lumisplat {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// PNG io
// ---------------------------------------------------------------------------

namespace {

struct PngFile {
    FILE* fp = nullptr;
    ~PngFile() {
        if (fp) std::fclose(fp);
    }
};

uint8_t to_byte(double v) { return static_cast<uint8_t>(std::lround(clamp01(v) * 255.0)); }

void write_png(const fs::path& path, const std::vector<uint8_t>& bytes, int width, int height, int bit_depth,
               int color_type, size_t row_bytes) {
    PngFile file;
    file.fp = std::fopen(path.string().c_str(), "wb");
    if (!file.fp) throw Error("MissingFile", "cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(height);
    for (int r = 0; r < height; ++r) rows[r] = const_cast<png_bytep>(bytes.data() + r * row_bytes);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("BadImage", "png write failed: " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // buffers are little-endian in memory
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngData {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<uint8_t> bytes;  // row-major, 16-bit values little-endian
};

PngData read_png(const fs::path& path) {
    PngFile file;
    file.fp = std::fopen(path.string().c_str(), "rb");
    if (!file.fp) throw Error("MissingFile", path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);

    PngData out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("BadImage", "png read failed: " + path.string());
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = static_cast<int>(png_get_channels(png, info));
    out.bit_depth = static_cast<int>(png_get_bit_depth(png, info));

    const size_t row_bytes = png_get_rowbytes(png, info);
    out.bytes.resize(row_bytes * out.height);
    rows.resize(out.height);
    for (int r = 0; r < out.height; ++r) rows[r] = out.bytes.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

void write_png_rgb8(const fs::path& path, const Image& img) {
    const int h = img.height(), w = img.width();
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * 3);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < 3; ++k)
                bytes[(static_cast<size_t>(r) * w + c) * 3 + k] = to_byte(img.at(r, c, img.channels() == 3 ? k : 0));
    write_png(path, bytes, w, h, 8, PNG_COLOR_TYPE_RGB, static_cast<size_t>(w) * 3);
}

Image read_png_rgb8(const fs::path& path) {
    const PngData data = read_png(path);
    if (data.bit_depth != 8) throw Error("BadImage", "expected 8-bit png: " + path.string());
    Image img(data.height, data.width, 3);
    for (int r = 0; r < data.height; ++r)
        for (int c = 0; c < data.width; ++c)
            for (int k = 0; k < 3; ++k) {
                const int src = data.channels == 1 ? 0 : k;
                img.at(r, c, k) =
                    data.bytes[(static_cast<size_t>(r) * data.width + c) * data.channels + src] / 255.0;
            }
    return img;
}

void write_png_gray16(const fs::path& path, const Image& img, double scale) {
    const int h = img.height(), w = img.width();
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * 2);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double counts = std::lround(img.at(r, c) / scale);
            const uint16_t v = static_cast<uint16_t>(std::min(65535.0, std::max(0.0, counts)));
            std::memcpy(&bytes[(static_cast<size_t>(r) * w + c) * 2], &v, 2);
        }
    write_png(path, bytes, w, h, 16, PNG_COLOR_TYPE_GRAY, static_cast<size_t>(w) * 2);
}

Image read_png_gray16(const fs::path& path, double scale) {
    const PngData data = read_png(path);
    if (data.bit_depth != 16 || data.channels != 1)
        throw Error("BadImage", "expected 16-bit grayscale png: " + path.string());
    Image img(data.height, data.width, 1);
    for (int r = 0; r < data.height; ++r)
        for (int c = 0; c < data.width; ++c) {
            uint16_t v;
            std::memcpy(&v, &data.bytes[(static_cast<size_t>(r) * data.width + c) * 2], 2);
            img.at(r, c) = v * scale;
        }
    return img;
}

void write_png_mask(const fs::path& path, const Image& mask) {
    const int h = mask.height(), w = mask.width();
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            bytes[static_cast<size_t>(r) * w + c] = mask.at(r, c) >= 0.5 ? 255 : 0;
    write_png(path, bytes, w, h, 8, PNG_COLOR_TYPE_GRAY, static_cast<size_t>(w));
}

Image read_png_mask(const fs::path& path) {
    const PngData data = read_png(path);
    if (data.bit_depth != 8) throw Error("BadImage", "expected 8-bit mask png: " + path.string());
    Image img(data.height, data.width, 1);
    for (int r = 0; r < data.height; ++r)
        for (int c = 0; c < data.width; ++c)
            img.at(r, c) =
                data.bytes[(static_cast<size_t>(r) * data.width + c) * data.channels] >= 128 ? 1.0 : 0.0;
    return img;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

ordered_json manifest_to_json(const DatasetManifest& m) {
    ordered_json j;
    j["version"] = m.version;
    j["width"] = m.width;
    j["height"] = m.height;
    j["depth_scale"] = m.depth_scale;
    j["frames"] = ordered_json::array();
    for (const FrameRecord& f : m.frames) {
        ordered_json r;
        r["image"] = f.image;
        r["depth"] = f.depth;
        r["mask"] = f.mask;
        r["time"] = f.time;
        if (f.ic) r["ic"] = *f.ic;
        if (f.mean_prior) r["mean_prior"] = *f.mean_prior;
        if (f.ev_true) r["ev_true"] = *f.ev_true;
        r["w2c"] = f.w2c;
        r["fx"] = f.fx;
        r["fy"] = f.fy;
        r["cx"] = f.cx;
        r["cy"] = f.cy;
        j["frames"].push_back(std::move(r));
    }
    j["train_idx"] = m.train_idx;
    j["test_idx"] = m.test_idx;
    return j;
}

DatasetManifest manifest_from_json(const ordered_json& j) {
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw Error("BadManifest", "unsupported manifest version");
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.depth_scale = j.at("depth_scale").get<double>();
    for (const auto& r : j.at("frames")) {
        FrameRecord f;
        f.image = r.at("image").get<std::string>();
        f.depth = r.at("depth").get<std::string>();
        f.mask = r.at("mask").get<std::string>();
        f.time = r.at("time").get<double>();
        if (r.contains("ic")) f.ic = r.at("ic").get<std::string>();
        if (r.contains("mean_prior")) f.mean_prior = r.at("mean_prior").get<double>();
        if (r.contains("ev_true")) f.ev_true = r.at("ev_true").get<double>();
        const auto w2c = r.at("w2c");
        if (w2c.size() != 16) throw Error("BadManifest", "w2c must have 16 entries");
        for (size_t i = 0; i < 16; ++i) f.w2c[i] = w2c[i].get<double>();
        f.fx = r.at("fx").get<double>();
        f.fy = r.at("fy").get<double>();
        f.cx = r.at("cx").get<double>();
        f.cy = r.at("cy").get<double>();
        m.frames.push_back(std::move(f));
    }
    m.train_idx = j.at("train_idx").get<std::vector<int>>();
    m.test_idx = j.at("test_idx").get<std::vector<int>>();
    return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& dir) {
    std::ofstream out(dir / "manifest.json");
    out << manifest_to_json(m).dump(2) << "\n";
}

Camera camera_from_record(const FrameRecord& f, int width, int height) {
    Camera cam;
    cam.fx = f.fx;
    cam.fy = f.fy;
    cam.cx = f.cx;
    cam.cy = f.cy;
    cam.width = width;
    cam.height = height;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = f.w2c[r * 4 + c];
        cam.translation[r] = f.w2c[r * 4 + 3];
    }
    return cam;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw Error("MissingFile", manifest_path.string());

    ordered_json j;
    try {
        std::ifstream in(manifest_path);
        in >> j;
    } catch (const std::exception& e) {
        throw Error("BadManifest", e.what());
    }

    Dataset ds;
    ds.root = dir;
    try {
        ds.manifest = manifest_from_json(j);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error("BadManifest", e.what());
    }

    const int n = static_cast<int>(ds.manifest.frames.size());
    for (int idx : ds.manifest.train_idx)
        if (idx < 0 || idx >= n) throw Error("BadManifest", "train index out of range");
    for (int idx : ds.manifest.test_idx) {
        if (idx < 0 || idx >= n) throw Error("BadManifest", "test index out of range");
        for (int t : ds.manifest.train_idx)
            if (t == idx) throw Error("BadManifest", "train and test splits overlap");
    }

    bool manifest_dirty = false;
    double prev_time = -1.0;
    for (FrameRecord& rec : ds.manifest.frames) {
        for (const std::string* name : {&rec.image, &rec.depth, &rec.mask})
            if (!fs::exists(dir / *name)) throw Error("MissingFile", (dir / *name).string());

        Frame frame;
        frame.image = read_png_rgb8(dir / rec.image);
        frame.depth = read_png_gray16(dir / rec.depth, ds.manifest.depth_scale);
        frame.mask = read_png_mask(dir / rec.mask);
        if (frame.image.height() != ds.manifest.height || frame.image.width() != ds.manifest.width ||
            !frame.depth.same_shape(frame.mask) || frame.depth.height() != ds.manifest.height ||
            frame.depth.width() != ds.manifest.width)
            throw Error("ShapeMismatch", "frame shapes disagree with the manifest: " + rec.image);

        frame.camera = camera_from_record(rec, ds.manifest.width, ds.manifest.height);
        frame.time = rec.time;
        if (frame.time < prev_time) throw Error("BadManifest", "frame times must be nondecreasing");
        prev_time = frame.time;

        if (!rec.ic || !rec.mean_prior) {
            const IlluminationPrior prior = estimate_prior(frame.image);
            rec.mean_prior = prior.mean_prior;
            rec.ic = classify_ic(frame.image, prior) == ICLabel::Bright ? "bright" : "dark";
            manifest_dirty = true;
        }
        frame.mean_prior = *rec.mean_prior;
        if (*rec.ic == "bright")
            frame.ic = ICLabel::Bright;
        else if (*rec.ic == "dark")
            frame.ic = ICLabel::Dark;
        else
            throw Error("BadManifest", "ic must be 'bright' or 'dark'");

        ds.frames.push_back(std::move(frame));
    }

    if (manifest_dirty) write_manifest(ds.manifest, dir);
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

namespace {

Vec3 surface_texture(double x, double y) {
    return {0.65 + 0.25 * std::sin(2.0 * M_PI * (1.3 * x + 0.7 * y)),
            0.60 + 0.25 * std::sin(2.0 * M_PI * (0.9 * x - 1.1 * y) + 1.0),
            0.55 + 0.20 * std::sin(2.0 * M_PI * (1.9 * x + 0.3 * y) + 2.0)};
}

// Depth along the pixel ray to the surface z = z0 + a*sin(2*pi*(x + t)).
// The fixed-point iteration contracts because 2*pi*a*|u| < 1 over the fov.
double surface_depth(double u, double t) {
    constexpr double kZ0 = 2.0, kAmp = 0.15;
    double z = kZ0;
    for (int it = 0; it < 60; ++it) z = kZ0 + kAmp * std::sin(2.0 * M_PI * (z * u + t));
    return z;
}

std::string frame_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d.png", i);
    return buf;
}

}  // namespace

void synth_dataset(const SynthSpec& spec, const fs::path& dir) {
    if (spec.frames < 1 || spec.width < 16 || spec.height < 16 || spec.block < 1 || spec.ev_levels.empty() ||
        spec.ev_jitter < 0.0)
        throw Error("BadSpec", "frames >= 1, size >= 16x16, block >= 1, nonempty EV levels required");

    fs::create_directories(dir / "images");
    fs::create_directories(dir / "images_gt");
    fs::create_directories(dir / "depth");
    fs::create_directories(dir / "masks");

    Camera cam;
    cam.width = spec.width;
    cam.height = spec.height;
    cam.fx = cam.fy = 1.2 * spec.width;
    cam.cx = (spec.width - 1) / 2.0;
    cam.cy = (spec.height - 1) / 2.0;

    constexpr double kDepthScale = 6.25e-5;  // ~4.1 units full range

    DatasetManifest manifest;
    manifest.width = spec.width;
    manifest.height = spec.height;
    manifest.depth_scale = kDepthScale;

    Rng rng(spec.seed);

    for (int i = 0; i < spec.frames; ++i) {
        const double t = static_cast<double>(i) / spec.frames;
        Image gt(spec.height, spec.width, 3);
        Image depth(spec.height, spec.width, 1);
        Image mask(spec.height, spec.width, 1, 1.0);

        for (int r = 0; r < spec.height; ++r)
            for (int c = 0; c < spec.width; ++c) {
                const double u = (c - cam.cx) / cam.fx;
                const double v = (r - cam.cy) / cam.fy;
                const double z = surface_depth(u, t);
                depth.at(r, c) = z;
                const Vec3 color = surface_texture(z * u, z * v);
                for (int k = 0; k < 3; ++k) gt.at(r, c, k) = clamp01(color[k]);
            }

        if (spec.tool) {
            const int rw = spec.width / 5, rh = spec.height / 5;
            const int x0 = static_cast<int>(std::lround(t * (spec.width - rw)));
            const int y0 = (spec.height - rh) / 2;
            for (int r = y0; r < y0 + rh; ++r)
                for (int c = x0; c < x0 + rw; ++c) mask.at(r, c) = 0.0;
        }

        const size_t level_idx = (static_cast<size_t>(i) / spec.block) % spec.ev_levels.size();
        const double ev = spec.ev_levels[level_idx] + rng.uniform(-spec.ev_jitter, spec.ev_jitter);
        const double gain = std::pow(2.0, ev);
        Image corrupted(spec.height, spec.width, 3);
        for (int r = 0; r < spec.height; ++r)
            for (int c = 0; c < spec.width; ++c)
                for (int k = 0; k < 3; ++k) corrupted.at(r, c, k) = clamp01(gt.at(r, c, k) * gain);

        const std::string name = frame_name(i);
        write_png_rgb8(dir / "images" / name, corrupted);
        write_png_rgb8(dir / "images_gt" / name, gt);
        write_png_gray16(dir / "depth" / name, depth, kDepthScale);
        write_png_mask(dir / "masks" / name, mask);

        // Labels come from the quantized file contents so that loading is
        // idempotent.
        const Image stored = read_png_rgb8(dir / "images" / name);
        const IlluminationPrior prior = estimate_prior(stored);

        FrameRecord rec;
        rec.image = "images/" + name;
        rec.depth = "depth/" + name;
        rec.mask = "masks/" + name;
        rec.time = t;
        rec.ev_true = ev;
        rec.mean_prior = prior.mean_prior;
        rec.ic = classify_ic(stored, prior) == ICLabel::Bright ? "bright" : "dark";
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) rec.w2c[r * 4 + c] = (r == c) ? 1.0 : 0.0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rec.w2c[r * 4 + c] = cam.rotation(r, c);
        rec.fx = cam.fx;
        rec.fy = cam.fy;
        rec.cx = cam.cx;
        rec.cy = cam.cy;
        manifest.frames.push_back(std::move(rec));

        if (i % 8 == 7)
            manifest.test_idx.push_back(i);
        else
            manifest.train_idx.push_back(i);
    }

    write_manifest(manifest, dir);
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

namespace {

struct BinWriter {
    std::ofstream out;

    explicit BinWriter(const fs::path& path) : out(path, std::ios::binary) {
        if (!out) throw Error("MissingFile", "cannot open for writing: " + path.string());
    }
    void bytes(const void* p, size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32_array(const std::vector<double>& v) {
        std::vector<float> tmp(v.begin(), v.end());
        bytes(tmp.data(), tmp.size() * 4);
    }
};

struct BinReader {
    std::ifstream in;
    fs::path path;

    explicit BinReader(const fs::path& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw Error("MissingFile", p.string());
    }
    void bytes(void* p, size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n) throw Error("Truncated", path.string());
    }
    uint8_t u8() {
        uint8_t v;
        bytes(&v, 1);
        return v;
    }
    uint32_t u32() {
        uint32_t v;
        bytes(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        bytes(&v, 8);
        return v;
    }
    std::vector<double> f32_array(size_t n) {
        std::vector<float> tmp(n);
        if (n) bytes(tmp.data(), n * 4);
        return {tmp.begin(), tmp.end()};
    }
};

void write_net(BinWriter& w, const Mlp& net) {
    w.u32(static_cast<uint32_t>(net.layers.size()));
    for (const DenseLayer& l : net.layers) {
        w.u32(static_cast<uint32_t>(l.in));
        w.u32(static_cast<uint32_t>(l.out));
        w.u8(static_cast<uint8_t>(l.act));
        w.f32_array(l.weights);
        w.f32_array(l.biases);
    }
}

Mlp read_net(BinReader& r) {
    Mlp net;
    const uint32_t layers = r.u32();
    for (uint32_t i = 0; i < layers; ++i) {
        DenseLayer l;
        l.in = static_cast<int>(r.u32());
        l.out = static_cast<int>(r.u32());
        const uint8_t act = r.u8();
        if (act > 3) throw Error("Truncated", "invalid activation code");
        l.act = static_cast<Activation>(act);
        l.weights = r.f32_array(static_cast<size_t>(l.in) * l.out);
        l.biases = r.f32_array(l.out);
        net.layers.push_back(std::move(l));
    }
    return net;
}

constexpr char kMagic[4] = {'E', '4', 'G', 'X'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    const ModelState& s = ckpt.state;
    const size_t n = s.set.count();
    const size_t v = s.embedding_rows();
    const int b = s.field.order;

    BinWriter w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u64(n);
    w.u64(v);
    w.u32(static_cast<uint32_t>(s.embed_dim));
    w.u32(static_cast<uint32_t>(b));
    w.f32_array(s.set.means);
    w.f32_array(s.set.rot_raw);
    w.f32_array(s.set.log_scales);
    w.f32_array(s.set.opacity_logits);
    w.f32_array(s.set.color_logits);
    w.f32_array(s.field.mean_coeffs);
    w.f32_array(s.field.scale_coeffs);
    w.f32_array(s.field.opacity_coeffs);
    w.f32_array(s.embeddings);
    write_net(w, s.concealing.bright);
    write_net(w, s.concealing.dark);
    write_net(w, s.spatial);
    w.u64(ckpt.config_echo.size());
    w.bytes(ckpt.config_echo.data(), ckpt.config_echo.size());
}

Checkpoint load_checkpoint(const fs::path& path) {
    BinReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw Error("BadMagic", path.string());
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw Error("VersionUnsupported", "checkpoint version " + std::to_string(version));

    const size_t n = r.u64();
    const size_t v = r.u64();
    const uint32_t k = r.u32();
    const uint32_t b = r.u32();

    Checkpoint ckpt;
    ModelState& s = ckpt.state;
    s.embed_dim = static_cast<int>(k);
    s.field.order = static_cast<int>(b);
    s.set.means = r.f32_array(n * 3);
    s.set.rot_raw = r.f32_array(n * 4);
    s.set.log_scales = r.f32_array(n * 3);
    s.set.opacity_logits = r.f32_array(n);
    s.set.color_logits = r.f32_array(n * 3);
    s.field.mean_coeffs = r.f32_array(n * 3 * 2 * b);
    s.field.scale_coeffs = r.f32_array(n * 3 * 2 * b);
    s.field.opacity_coeffs = r.f32_array(n * 2 * b);
    s.embeddings = r.f32_array(v * k);
    s.concealing.bright = read_net(r);
    s.concealing.dark = read_net(r);
    s.spatial = read_net(r);
    const uint64_t echo_len = r.u64();
    ckpt.config_echo.resize(echo_len);
    if (echo_len) r.bytes(ckpt.config_echo.data(), echo_len);
    return ckpt;
}

}  // namespace lumisplat
