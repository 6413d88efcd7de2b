#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "helpers.hpp"
#include "win/data.hpp"

using win::Image;
using win::Rng;
using win::Shape;
using win::Tensor4;

namespace {

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image checker(std::int64_t h, std::int64_t w) {
    Image img;
    img.h = h;
    img.w = w;
    img.pixels.resize(h * w);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) img.at(y, x) = ((x + y) % 2) ? 1.0 : 0.0;
    return img;
}

}  // namespace

TEST_CASE("pgm load scales bytes by 1/255") {
    testutil::TempDir dir("pgm");
    const std::string path = dir.file("t.pgm");
    write_bytes(path, std::string("P5\n2 2\n255\n") + '\x00' + '\x80' + '\xff' + '\x40');
    Image img = win::load_pgm(path);
    REQUIRE(img.w == 2);
    REQUIRE(img.h == 2);
    REQUIRE(img.pixels[0] == 0.0);
    REQUIRE(img.pixels[1] == Catch::Approx(0.50196).margin(1e-5));
    REQUIRE(img.pixels[2] == 1.0);
    REQUIRE(img.pixels[3] == Catch::Approx(0.25098).margin(1e-5));
}

TEST_CASE("pgm header comments are skipped") {
    testutil::TempDir dir("pgmc");
    const std::string path = dir.file("t.pgm");
    write_bytes(path, std::string("P5\n# a comment\n2 1 # trailing\n255\n") + '\x10' + '\x20');
    Image img = win::load_pgm(path);
    REQUIRE(img.w == 2);
    REQUIRE(img.h == 1);
}

TEST_CASE("pgm loader rejects broken files") {
    testutil::TempDir dir("pgmbad");
    const std::string trunc = dir.file("trunc.pgm");
    write_bytes(trunc, std::string("P5\n4 4\n255\n") + "ab");  // raster too short
    REQUIRE_THROWS_AS(win::load_pgm(trunc), win::IoError);

    const std::string deep = dir.file("deep.pgm");
    write_bytes(deep, std::string("P5\n1 1\n65535\n") + "ab");
    REQUIRE_THROWS_AS(win::load_pgm(deep), win::IoError);

    const std::string magic = dir.file("magic.pgm");
    write_bytes(magic, "P6\n1 1\n255\nabc");
    REQUIRE_THROWS_AS(win::load_pgm(magic), win::IoError);

    REQUIRE_THROWS_AS(win::load_pgm(dir.file("missing.pgm")), win::IoError);
}

TEST_CASE("pgm save/load round trip is bit-identical") {
    testutil::TempDir dir("pgmrt");
    Image original = checker(5, 7);
    original.at(2, 3) = 100.0 / 255.0;
    const std::string p1 = dir.file("a.pgm"), p2 = dir.file("b.pgm");
    win::save_pgm(original, p1);
    Image loaded = win::load_pgm(p1);
    win::save_pgm(loaded, p2);
    Image reloaded = win::load_pgm(p2);
    REQUIRE(loaded.pixels == reloaded.pixels);
    REQUIRE(testutil::read_file(p1) == testutil::read_file(p2));
}

TEST_CASE("png and pgm of the same image load identically") {
    testutil::TempDir dir("png");
    Image img = checker(6, 9);
    img.at(0, 0) = 0.42;
    const std::string pgm = dir.file("x.pgm"), png = dir.file("x.png");
    win::save_pgm(img, pgm);
    win::save_png(img, png);
    Image from_pgm = win::load_pgm(pgm);
    Image from_png = win::load_png(png);
    REQUIRE(from_pgm.pixels == from_png.pixels);
}

TEST_CASE("png loader rejects garbage") {
    testutil::TempDir dir("pngbad");
    const std::string path = dir.file("bad.png");
    write_bytes(path, "definitely not a png");
    REQUIRE_THROWS_AS(win::load_png(path), win::IoError);
}

TEST_CASE("color png is converted with the 0.299/0.587/0.114 luma weights") {
    testutil::TempDir dir("pngrgb");
    const std::string path = dir.file("rgb.png");
    {
        png_image png{};
        png.version = PNG_IMAGE_VERSION;
        png.width = 3;
        png.height = 1;
        png.format = PNG_FORMAT_RGB;
        const unsigned char rgb[9] = {255, 0, 0, 0, 255, 0, 0, 0, 255};
        REQUIRE(png_image_write_to_file(&png, path.c_str(), 0, rgb, 0, nullptr) != 0);
    }
    win::Image img = win::load_png(path);
    REQUIRE(img.w == 3);
    REQUIRE(img.pixels[0] == Catch::Approx(0.299).margin(1e-12));
    REQUIRE(img.pixels[1] == Catch::Approx(0.587).margin(1e-12));
    REQUIRE(img.pixels[2] == Catch::Approx(0.114).margin(1e-12));
}

TEST_CASE("16-bit png is rejected as an unsupported bit depth") {
    testutil::TempDir dir("png16");
    const std::string path = dir.file("deep.png");
    {
        png_image png{};
        png.version = PNG_IMAGE_VERSION;
        png.width = 2;
        png.height = 1;
        png.format = PNG_FORMAT_LINEAR_Y;  // 16-bit grayscale
        const png_uint_16 pixels[2] = {0, 65535};
        REQUIRE(png_image_write_to_file(&png, path.c_str(), 0, pixels, 0, nullptr) != 0);
    }
    REQUIRE_THROWS_AS(win::load_png(path), win::IoError);
}

TEST_CASE("load_image dispatches on extension") {
    testutil::TempDir dir("dispatch");
    Image img = checker(3, 3);
    win::save_image(img, dir.file("a.pgm"));
    win::save_image(img, dir.file("a.png"));
    REQUIRE(win::load_image(dir.file("a.pgm")).pixels == win::load_image(dir.file("a.png")).pixels);
    REQUIRE_THROWS_AS(win::load_image(dir.file("a.bmp")), win::IoError);
}

TEST_CASE("patch grid arithmetic") {
    Image big;
    big.h = 481;
    big.w = 321;
    big.pixels.assign(481 * 321, 0.5);
    win::PatchSet set = win::extract_patches(big, 41, 14);
    REQUIRE(set.patches.size() == 672);  // (floor(440/14)+1) * (floor(280/14)+1) = 32*21

    Image exact = checker(41, 41);
    win::PatchSet one = win::extract_patches(exact, 41, 14);
    REQUIRE(one.patches.size() == 1);
    REQUIRE(win::max_abs_diff(one.patches[0].tensor, exact.to_tensor()) == 0.0);

    Image tiny = checker(3, 3);
    win::PatchSet single = win::extract_patches(tiny, 3, 1);
    REQUIRE(single.patches.size() == 1);

    REQUIRE_THROWS_AS(win::extract_patches(tiny, 4, 1), std::invalid_argument);
}

TEST_CASE("every patch is bitwise present at its recorded offset") {
    Rng rng(3);
    Image img;
    img.h = 20;
    img.w = 23;
    img.pixels.resize(img.h * img.w);
    for (double& v : img.pixels) v = rng.uniform();
    win::PatchSet set = win::extract_patches(img, 7, 5);
    REQUIRE(set.patches.size() ==
            static_cast<std::size_t>(((20 - 7) / 5 + 1) * ((23 - 7) / 5 + 1)));
    for (const win::Patch& p : set.patches) {
        for (std::int64_t y = 0; y < 7; ++y)
            for (std::int64_t x = 0; x < 7; ++x) {
                REQUIRE(p.tensor.at(0, 0, y, x) == img.at(p.row + y, p.col + x));
            }
    }
}

TEST_CASE("augment produces the 8 dihedral variants") {
    Image constant;
    constant.h = 4;
    constant.w = 4;
    constant.pixels.assign(16, 0.3);
    std::vector<Image> variants = win::augment(constant);
    REQUIRE(variants.size() == 8);
    for (const Image& v : variants) REQUIRE(v.pixels == constant.pixels);

    Rng rng(5);
    Image img;
    img.h = 2;
    img.w = 3;
    img.pixels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    Image r180 = win::rotate90(win::rotate90(img));
    Image back = win::rotate90(win::rotate90(r180));
    REQUIRE(back.pixels == img.pixels);
    REQUIRE(back.h == img.h);

    std::vector<Image> all = win::augment(img);
    REQUIRE(all[2].h == 3);  // 90 degrees swaps dimensions
    REQUIRE(all[2].w == 2);
    REQUIRE(all[4].h == 2);  // 180 degrees keeps them
}

TEST_CASE("batch stream shapes and partial final batch") {
    Image img = checker(64, 64);
    // 13x10 grid of 5x5 patches = 130
    win::PatchSet set = win::extract_patches(img, 5, 5);
    set.patches.resize(130);
    win::NoiseSampler sampler(win::NoiseConfig::fixed(0.0));
    win::BatchStream stream(set, sampler, 64, 1);
    win::Batch batch;
    std::vector<std::int64_t> sizes;
    while (stream.next(batch)) {
        sizes.push_back(batch.x.shape().n);
        REQUIRE(win::max_abs_diff(batch.y, batch.x) == 0.0);  // sigma 0
    }
    REQUIRE(sizes == std::vector<std::int64_t>{64, 64, 2});
}

TEST_CASE("batch stream shuffling is deterministic in the seed") {
    Image img = checker(32, 32);
    win::PatchSet set = win::extract_patches(img, 5, 3);
    for (std::size_t i = 0; i < set.patches.size(); ++i) {
        set.patches[i].tensor.at(0, 0, 0, 0) = static_cast<double>(i);  // tag each patch
    }
    auto collect = [&](std::uint64_t seed) {
        win::NoiseSampler sampler(win::NoiseConfig::fixed(0.0));
        win::BatchStream stream(set, sampler, 8, seed);
        std::vector<double> tags;
        win::Batch b;
        while (stream.next(b)) {
            for (std::int64_t n = 0; n < b.x.shape().n; ++n) tags.push_back(b.x.at(n, 0, 0, 0));
        }
        return tags;
    };
    REQUIRE(collect(9) == collect(9));
    REQUIRE(collect(9) != collect(10));
}

TEST_CASE("empty patch set is rejected") {
    win::PatchSet set;
    set.patch_size = 5;
    set.stride = 5;
    win::NoiseSampler sampler(win::NoiseConfig::fixed(0.0));
    REQUIRE_THROWS_AS(win::BatchStream(set, sampler, 4, 0), std::invalid_argument);
}

TEST_CASE("dataset listing is lexicographic and filtered") {
    testutil::TempDir dir("dataset");
    Image img = checker(8, 8);
    win::save_pgm(img, dir.file("b.pgm"));
    win::save_pgm(img, dir.file("a.pgm"));
    win::save_png(img, dir.file("c.png"));
    write_bytes(dir.file("notes.txt"), "ignore me");
    const std::vector<std::string> files = win::list_images(dir.str());
    REQUIRE(files.size() == 3);
    REQUIRE(files[0] < files[1]);
    REQUIRE(files[1] < files[2]);
    REQUIRE_THROWS_AS(win::list_images(dir.file("nope")), win::IoError);
}
