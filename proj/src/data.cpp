#include "evosynth/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>

#include "evosynth/errors.hpp"
#include "evosynth/image_io.hpp"
#include "evosynth/rng.hpp"

namespace fs = std::filesystem;

namespace evo {

namespace {

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_open01(rng);
}

// Coarse uniform noise grid blown up bilinearly: cheap smooth background.
std::vector<float> smooth_background(std::mt19937_64& rng, int h, int w) {
    const int cell = 8;
    int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (auto& v : grid) v = uniform_in(rng, 0.15, 0.45);
    std::vector<float> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        double gy = static_cast<double>(y) / cell;
        int y0 = static_cast<int>(gy);
        double fy = gy - y0;
        for (int x = 0; x < w; ++x) {
            double gx = static_cast<double>(x) / cell;
            int x0 = static_cast<int>(gx);
            double fx = gx - x0;
            double v00 = grid[y0 * gw + x0];
            double v01 = grid[y0 * gw + x0 + 1];
            double v10 = grid[(y0 + 1) * gw + x0];
            double v11 = grid[(y0 + 1) * gw + x0 + 1];
            out[y * w + x] = static_cast<float>(
                v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx +
                v10 * fy * (1 - fx) + v11 * fy * fx);
        }
    }
    return out;
}

struct ShapeStamp {
    std::vector<std::uint8_t> hit;  // h*w
    double intensity = 0.8;
};

ShapeStamp random_shape(std::mt19937_64& rng, int h, int w) {
    ShapeStamp s;
    s.hit.assign(static_cast<std::size_t>(h) * w, 0);
    s.intensity = uniform_in(rng, 0.65, 0.95);
    int m = std::min(h, w);
    int kind = static_cast<int>(uniform_index(rng, 3));
    if (kind == 0) {
        // ellipse, fully inside the canvas
        double rx = uniform_in(rng, 0.10 * m, 0.22 * m);
        double ry = uniform_in(rng, 0.10 * m, 0.22 * m);
        double cx = uniform_in(rng, rx + 1, w - rx - 2);
        double cy = uniform_in(rng, ry + 1, h - ry - 2);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double dx = (x - cx) / rx, dy = (y - cy) / ry;
                if (dx * dx + dy * dy <= 1.0) s.hit[y * w + x] = 1;
            }
    } else if (kind == 1) {
        // axis-aligned rectangle
        int rw = static_cast<int>(uniform_in(rng, 0.18 * m, 0.40 * m));
        int rh = static_cast<int>(uniform_in(rng, 0.18 * m, 0.40 * m));
        int x0 = static_cast<int>(uniform_in(rng, 1, w - rw - 2));
        int y0 = static_cast<int>(uniform_in(rng, 1, h - rh - 2));
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) s.hit[y * w + x] = 1;
    } else {
        // triangle via sign tests against the three edges
        double px[3], py[3];
        for (int i = 0; i < 3; ++i) {
            px[i] = uniform_in(rng, 2, w - 3);
            py[i] = uniform_in(rng, 2, h - 3);
        }
        auto edge = [](double ax, double ay, double bx, double by, double cx,
                       double cy) {
            return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        };
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double d0 = edge(px[0], py[0], px[1], py[1], x, y);
                double d1 = edge(px[1], py[1], px[2], py[2], x, y);
                double d2 = edge(px[2], py[2], px[0], py[0], x, y);
                bool neg = d0 < 0 || d1 < 0 || d2 < 0;
                bool pos = d0 > 0 || d1 > 0 || d2 > 0;
                if (!(neg && pos)) s.hit[y * w + x] = 1;
            }
    }
    return s;
}

Sample synth_sample(std::mt19937_64& rng, int h, int w, int index) {
    Sample sample;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn_%05d", index);
    sample.name = buf;
    std::vector<float> bg = smooth_background(rng, h, w);

    std::vector<ShapeStamp> shapes;
    for (int attempt = 0;; ++attempt) {
        shapes.clear();
        int n_shapes = 1 + static_cast<int>(uniform_index(rng, 3));
        for (int k = 0; k < n_shapes; ++k) shapes.push_back(random_shape(rng, h, w));
        std::int64_t fg = 0;
        for (int i = 0; i < h * w; ++i) {
            bool any = false;
            for (const auto& s : shapes) any |= (s.hit[i] != 0);
            fg += any ? 1 : 0;
        }
        double frac = static_cast<double>(fg) / (h * w);
        if (frac >= 0.05 && frac <= 0.5) break;
        if (attempt > 200)
            throw std::runtime_error("shape rejection sampling did not converge");
    }

    sample.image = Tensor({1, h, w});
    sample.mask = Tensor({h, w});
    for (int i = 0; i < h * w; ++i) sample.image[i] = bg[i];
    for (const auto& s : shapes) {
        for (int i = 0; i < h * w; ++i) {
            if (!s.hit[i]) continue;
            double v = s.intensity + uniform_in(rng, -0.04, 0.04);
            sample.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            sample.mask[i] = 1.0f;
        }
    }
    return sample;
}

void split_counts(int count, double tf, double vf, int* n_train, int* n_val) {
    *n_train = static_cast<int>(std::floor(tf * count));
    *n_val = static_cast<int>(std::floor(vf * count));
}

}  // namespace

DatasetSplit generate_synthetic(std::uint64_t seed, int count, int height,
                                int width) {
    if (count < 3) throw std::invalid_argument("count must be >= 3");
    if (height < 16 || width < 16)
        throw std::invalid_argument("dimensions must be >= 16");
    std::mt19937_64 rng(seed);
    DatasetSplit split;
    split.provenance = "synthetic seed " + std::to_string(seed);
    int n_train, n_val;
    split_counts(count, 0.5, 0.1, &n_train, &n_val);
    for (int i = 0; i < count; ++i) {
        Sample s = synth_sample(rng, height, width, i);
        if (i < n_train) split.train.push_back(std::move(s));
        else if (i < n_train + n_val) split.validation.push_back(std::move(s));
        else split.test.push_back(std::move(s));
    }
    return split;
}

namespace {

Sample load_pair(const fs::path& image_path, const fs::path& mask_path) {
    Sample s;
    s.name = image_path.stem().string();
    ImageU8 img = read_image(image_path.string());
    ImageU8 msk = read_image(mask_path.string());
    if (img.width != msk.width || img.height != msk.height)
        throw IngestionError("image/mask size mismatch for '" + s.name + "'");
    s.image = Tensor({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                s.image[(c * img.height + y) * img.width + x] =
                    img.pixels[(y * img.width + x) * img.channels + c] / 255.0f;
    s.mask = Tensor({msk.height, msk.width});
    for (int y = 0; y < msk.height; ++y)
        for (int x = 0; x < msk.width; ++x) {
            int v;
            if (msk.channels == 1) {
                v = msk.pixels[y * msk.width + x];
            } else {
                const std::uint8_t* p = &msk.pixels[(y * msk.width + x) * 3];
                v = static_cast<int>(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] + 0.5);
            }
            s.mask[y * msk.width + x] = v >= 128 ? 1.0f : 0.0f;
        }
    return s;
}

}  // namespace

DatasetSplit load_directory(const std::string& images_dir,
                            const std::string& masks_dir, double train_frac,
                            double val_frac, double test_frac) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
        train_frac + val_frac + test_frac > 1.0 + 1e-9)
        throw std::invalid_argument("split fractions must be nonnegative and sum to at most 1");
    if (!fs::is_directory(images_dir))
        throw IngestionError("not a directory: '" + images_dir + "'");
    if (!fs::is_directory(masks_dir))
        throw IngestionError("not a directory: '" + masks_dir + "'");

    std::map<std::string, fs::path> images, masks;
    for (const auto& e : fs::directory_iterator(images_dir))
        if (e.is_regular_file()) images[e.path().stem().string()] = e.path();
    for (const auto& e : fs::directory_iterator(masks_dir))
        if (e.is_regular_file()) masks[e.path().stem().string()] = e.path();

    for (const auto& [stem, p] : images)
        if (!masks.count(stem))
            throw IngestionError("no mask for image '" + p.filename().string() + "'");
    for (const auto& [stem, p] : masks)
        if (!images.count(stem))
            throw IngestionError("no image for mask '" + p.filename().string() + "'");

    DatasetSplit split;
    split.provenance = "directory " + images_dir;
    int count = static_cast<int>(images.size());
    int n_train, n_val;
    split_counts(count, train_frac, val_frac, &n_train, &n_val);
    int n_test = static_cast<int>(std::floor(test_frac * count));
    if (n_train + n_val + n_test > count) n_test = count - n_train - n_val;

    int i = 0;
    for (const auto& [stem, p] : images) {  // std::map iterates alphabetically
        Sample s = load_pair(p, masks[stem]);
        if (i < n_train) split.train.push_back(std::move(s));
        else if (i < n_train + n_val) split.validation.push_back(std::move(s));
        else if (i < n_train + n_val + n_test) split.test.push_back(std::move(s));
        ++i;
    }
    return split;
}

std::vector<Example> to_examples(const std::vector<Sample>& samples) {
    std::vector<Example> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) {
        Example e;
        e.input = s.image;
        e.target = Tensor({1, s.mask.shape[0], s.mask.shape[1]}, s.mask.data);
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

void write_gray(const fs::path& path, int h, int w, const float* p) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h * w; ++i) {
        float v = std::clamp(p[i], 0.0f, 1.0f);
        bytes[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    write_png_gray(path.string(), bytes.data(), w, h);
}

}  // namespace

void write_dataset(const DatasetSplit& split, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");
    auto dump = [&](const std::vector<Sample>& samples) {
        for (const Sample& s : samples) {
            if (s.image.shape[0] != 1)
                throw std::invalid_argument("write_dataset expects single-channel images");
            int h = s.image.shape[1], w = s.image.shape[2];
            write_gray(fs::path(dir) / "images" / (s.name + ".png"), h, w,
                       s.image.ptr());
            write_gray(fs::path(dir) / "masks" / (s.name + ".png"), h, w,
                       s.mask.ptr());
        }
    };
    dump(split.train);
    dump(split.validation);
    dump(split.test);
}

}  // namespace evo
