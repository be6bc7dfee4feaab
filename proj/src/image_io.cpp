#include "evosynth/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "evosynth/errors.hpp"

namespace evo {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageU8 read_png(std::FILE* f, const std::string& path) {
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestionError("libpng init failed for '" + path + "'");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IngestionError("libpng init failed for '" + path + "'");
    }
    std::vector<png_bytep> rows;
    ImageU8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestionError("failed to decode PNG '" + path + "'");
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestionError("unsupported channel count in '" + path + "'");
    }
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height *
                      img.channels);
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] =
            img.pixels.data() +
            static_cast<std::size_t>(y) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

int pnm_next_int(std::FILE* f, const std::string& path) {
    int c;
    // skip whitespace and '#' comment lines
    for (;;) {
        c = std::fgetc(f);
        if (c == '#') {
            while (c != '\n' && c != EOF) c = std::fgetc(f);
        } else if (c != ' ' && c != '\t' && c != '\n' && c != '\r') {
            break;
        }
    }
    int v = 0;
    bool any = false;
    while (c >= '0' && c <= '9') {
        v = v * 10 + (c - '0');
        any = true;
        c = std::fgetc(f);
    }
    if (!any) throw IngestionError("malformed PNM header in '" + path + "'");
    return v;
}

ImageU8 read_pnm(std::FILE* f, int channels, const std::string& path) {
    ImageU8 img;
    img.channels = channels;
    img.width = pnm_next_int(f, path);
    img.height = pnm_next_int(f, path);
    int maxval = pnm_next_int(f, path);
    if (maxval != 255)
        throw IngestionError("only 8-bit PNM supported: '" + path + "'");
    std::size_t n =
        static_cast<std::size_t>(img.width) * img.height * channels;
    img.pixels.resize(n);
    if (std::fread(img.pixels.data(), 1, n, f) != n)
        throw IngestionError("truncated PNM data in '" + path + "'");
    return img;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IngestionError("cannot open '" + path + "'");
    unsigned char magic[8] = {0};
    std::size_t got = std::fread(magic, 1, 8, f.get());
    std::rewind(f.get());
    if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return read_png(f.get(), path);
    if (got >= 2 && magic[0] == 'P' && magic[1] == '5') {
        std::fseek(f.get(), 2, SEEK_SET);
        return read_pnm(f.get(), 1, path);
    }
    if (got >= 2 && magic[0] == 'P' && magic[1] == '6') {
        std::fseek(f.get(), 2, SEEK_SET);
        return read_pnm(f.get(), 3, path);
    }
    throw IngestionError("unsupported raster format in '" + path + "'");
}

void write_png_gray(const std::string& path, const std::uint8_t* data,
                    int width, int height) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IngestionError("cannot open '" + path + "' for writing");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestionError("libpng init failed for '" + path + "'");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IngestionError("libpng init failed for '" + path + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IngestionError("failed to encode PNG '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace evo
