#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evo {

// Interleaved 8-bit raster, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

// Reads a PNG or binary PGM/PPM file, sniffing the format from the magic
// bytes. 16-bit, palette and alpha variants are folded down to 8-bit
// gray/RGB. Throws IngestionError on anything unreadable.
ImageU8 read_image(const std::string& path);

// 8-bit grayscale PNG, deterministic byte output for identical input.
void write_png_gray(const std::string& path, const std::uint8_t* data,
                    int width, int height);

}  // namespace evo
