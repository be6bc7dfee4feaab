#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "evosynth/data.hpp"
#include "evosynth/errors.hpp"
#include "evosynth/image_io.hpp"

using namespace evo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("evosynth_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

double foreground_fraction(const Tensor& mask) {
    double n = 0;
    for (float v : mask.data) n += v;
    return n / static_cast<double>(mask.numel());
}

}  // namespace

TEST_CASE("generate_synthetic: deterministic per seed") {
    DatasetSplit a = generate_synthetic(33, 12, 32, 32);
    DatasetSplit b = generate_synthetic(33, 12, 32, 32);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].image.data == b.train[i].image.data);
        CHECK(a.train[i].mask.data == b.train[i].mask.data);
    }
    DatasetSplit c = generate_synthetic(34, 12, 32, 32);
    CHECK(a.train[0].image.data != c.train[0].image.data);
}

TEST_CASE("generate_synthetic: split sizes follow the 50/10/40 rule") {
    DatasetSplit s = generate_synthetic(1, 10, 16, 16);
    CHECK(s.train.size() == 5);
    CHECK(s.validation.size() == 1);
    CHECK(s.test.size() == 4);

    DatasetSplit t = generate_synthetic(1, 3, 16, 16);
    CHECK(t.train.size() + t.validation.size() + t.test.size() == 3);
}

TEST_CASE("generate_synthetic: splits are disjoint by sample name") {
    DatasetSplit s = generate_synthetic(9, 20, 16, 16);
    std::set<std::string> names;
    for (const auto* part : {&s.train, &s.validation, &s.test})
        for (const Sample& sample : *part) CHECK(names.insert(sample.name).second);
    CHECK(names.size() == 20);
}

TEST_CASE("generate_synthetic: rejects bad parameters") {
    CHECK_THROWS_AS(generate_synthetic(0, 2, 32, 32), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic(0, 10, 8, 32), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic(0, 10, 32, 15), std::invalid_argument);
}

TEST_CASE("generate_synthetic: masks are binary and foreground stays in [0.05, 0.5]") {
    // 1,000 samples scanned against the generator's rejection bound
    DatasetSplit s = generate_synthetic(123, 1000, 24, 24);
    int scanned = 0;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
        for (const Sample& sample : *part) {
            for (float v : sample.mask.data) CHECK((v == 0.0f || v == 1.0f));
            double frac = foreground_fraction(sample.mask);
            CHECK(frac >= 0.05);
            CHECK(frac <= 0.5);
            for (float v : sample.image.data) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
            ++scanned;
        }
    }
    CHECK(scanned == 1000);
}

TEST_CASE("write_dataset + load_directory: round trip with 0.5/0.1/0.4 split") {
    TempDir tmp("roundtrip");
    DatasetSplit generated = generate_synthetic(71, 10, 16, 16);
    write_dataset(generated, tmp.path.string());

    DatasetSplit loaded =
        load_directory((tmp.path / "images").string(), (tmp.path / "masks").string(),
                       0.5, 0.1, 0.4);
    CHECK(loaded.train.size() == 5);
    CHECK(loaded.validation.size() == 1);
    CHECK(loaded.test.size() == 4);
    // 8-bit quantization keeps images within half a step of the source
    for (std::size_t i = 0; i < loaded.train.size(); ++i) {
        const Sample& a = generated.train[i];
        const Sample& b = loaded.train[i];
        CHECK(a.name == b.name);
        CHECK(a.mask.data == b.mask.data);
        for (std::int64_t j = 0; j < a.image.numel(); ++j)
            CHECK(std::abs(a.image[j] - b.image[j]) <= 0.5f / 255.0f + 1e-6f);
    }
}

TEST_CASE("load_directory: mask binarization threshold sits at 128") {
    TempDir tmp("threshold");
    fs::create_directories(tmp.path / "images");
    fs::create_directories(tmp.path / "masks");
    std::vector<std::uint8_t> img(16 * 16, 100);
    std::vector<std::uint8_t> msk(16 * 16, 0);
    msk[0] = 127;
    msk[1] = 128;
    msk[2] = 129;
    msk[3] = 255;
    write_png_gray((tmp.path / "images" / "a.png").string(), img.data(), 16, 16);
    write_png_gray((tmp.path / "masks" / "a.png").string(), msk.data(), 16, 16);

    DatasetSplit s = load_directory((tmp.path / "images").string(),
                                    (tmp.path / "masks").string(), 1.0, 0.0, 0.0);
    REQUIRE(s.train.size() == 1);
    const Tensor& mask = s.train[0].mask;
    CHECK(mask[0] == 0.0f);
    CHECK(mask[1] == 1.0f);
    CHECK(mask[2] == 1.0f);
    CHECK(mask[3] == 1.0f);
    CHECK(s.train[0].image[0] == doctest::Approx(100.0 / 255.0).epsilon(1e-6));
}

TEST_CASE("load_directory: unmatched basenames are reported by name") {
    TempDir tmp("unmatched");
    fs::create_directories(tmp.path / "images");
    fs::create_directories(tmp.path / "masks");
    std::vector<std::uint8_t> px(16 * 16, 10);
    write_png_gray((tmp.path / "images" / "one.png").string(), px.data(), 16, 16);
    write_png_gray((tmp.path / "masks" / "one.png").string(), px.data(), 16, 16);
    write_png_gray((tmp.path / "images" / "stray.png").string(), px.data(), 16, 16);

    try {
        load_directory((tmp.path / "images").string(),
                       (tmp.path / "masks").string(), 0.5, 0.1, 0.4);
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(std::string(e.what()).find("stray") != std::string::npos);
    }
}

TEST_CASE("load_directory: unreadable file is an ingestion error") {
    TempDir tmp("garbage");
    fs::create_directories(tmp.path / "images");
    fs::create_directories(tmp.path / "masks");
    std::ofstream((tmp.path / "images" / "bad.png").string()) << "not a png";
    std::ofstream((tmp.path / "masks" / "bad.png").string()) << "not a png";
    CHECK_THROWS_AS(load_directory((tmp.path / "images").string(),
                                   (tmp.path / "masks").string(), 1.0, 0.0, 0.0),
                    IngestionError);
}

TEST_CASE("to_examples: target carries the mask as a 1xHxW map") {
    DatasetSplit s = generate_synthetic(5, 4, 16, 16);
    std::vector<Example> ex = to_examples(s.train);
    REQUIRE(ex.size() == s.train.size());
    CHECK(ex[0].input.shape == std::vector<int>{1, 16, 16});
    CHECK(ex[0].target.shape == std::vector<int>{1, 16, 16});
    CHECK(ex[0].target.data == s.train[0].mask.data);
}
