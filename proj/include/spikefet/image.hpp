#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spikefet {

// 8-bit grayscale image, row-major.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pix;

    Image() = default;
    Image(int h, int w) : height(h), width(w), pix(static_cast<size_t>(h) * w, 0) {}
    uint8_t& at(int y, int x) { return pix[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return pix[static_cast<size_t>(y) * width + x]; }
};

// Grayscale-8 PNG (color type 0). The writer emits filter-0 scanlines; the
// reader handles all five PNG filters.
void png_write(const std::string& path, const Image& img);
Image png_read(const std::string& path);

Image bilinear_resize(const Image& src, int out_h, int out_w);

// Crop [y0, y0+h) x [x0, x0+w); pixels outside the source are zero.
Image crop_with_pad(const Image& src, int y0, int x0, int h, int w);

}  // namespace spikefet
