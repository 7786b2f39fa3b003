#include "spikefet/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spikefet {

namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
    put_u32be(out, static_cast<uint32_t>(payload.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32be(out, static_cast<uint32_t>(crc));
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expect) {
    std::vector<uint8_t> out(expect);
    uLongf len = static_cast<uLongf>(expect);
    int rc = uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK || len != expect) throw std::runtime_error("png: inflate failed");
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

const uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

void png_write(const std::string& path, const Image& img) {
    if (img.height <= 0 || img.width <= 0) throw std::invalid_argument("png_write: empty image");
    std::vector<uint8_t> file(kSig, kSig + 8);

    std::vector<uint8_t> ihdr;
    put_u32be(ihdr, static_cast<uint32_t>(img.width));
    put_u32be(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(file, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.height) * (img.width + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), img.pix.begin() + static_cast<size_t>(y) * img.width,
                   img.pix.begin() + static_cast<size_t>(y + 1) * img.width);
    }
    append_chunk(file, "IDAT", zlib_deflate(raw));
    append_chunk(file, "IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("png_write: cannot open " + path);
    os.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!os) throw std::runtime_error("png_write: write failed for " + path);
}

Image png_read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("png_read: cannot open " + path);
    std::vector<uint8_t> file((std::istreambuf_iterator<char>(is)),
                              std::istreambuf_iterator<char>());
    if (file.size() < 8 || std::memcmp(file.data(), kSig, 8) != 0)
        throw std::runtime_error("png_read: not a PNG: " + path);

    int w = 0, h = 0;
    bool have_ihdr = false;
    std::vector<uint8_t> idat;
    size_t at = 8;
    while (at + 8 <= file.size()) {
        uint32_t len = get_u32be(&file[at]);
        if (at + 12 + len > file.size()) throw std::runtime_error("png_read: truncated chunk");
        std::string type(reinterpret_cast<const char*>(&file[at + 4]), 4);
        const uint8_t* payload = &file[at + 8];
        if (type == "IHDR") {
            if (len != 13) throw std::runtime_error("png_read: bad IHDR");
            w = static_cast<int>(get_u32be(payload));
            h = static_cast<int>(get_u32be(payload + 4));
            int depth = payload[8], color = payload[9], interlace = payload[12];
            if (depth != 8 || color != 0)
                throw std::runtime_error("png_read: only 8-bit grayscale supported: " + path);
            if (interlace != 0) throw std::runtime_error("png_read: interlace unsupported");
            have_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        at += 12 + len;
    }
    if (!have_ihdr || w <= 0 || h <= 0) throw std::runtime_error("png_read: missing IHDR");

    size_t stride = static_cast<size_t>(w) + 1;
    std::vector<uint8_t> raw = zlib_inflate(idat, stride * h);

    Image img(h, w);
    std::vector<uint8_t> prev(static_cast<size_t>(w), 0);
    for (int y = 0; y < h; ++y) {
        uint8_t filter = raw[y * stride];
        const uint8_t* line = &raw[y * stride + 1];
        uint8_t* out = &img.pix[static_cast<size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
            int a = x > 0 ? out[x - 1] : 0;
            int b = prev[x];
            int c = x > 0 ? prev[x - 1] : 0;
            int v = line[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("png_read: bad filter byte");
            }
            out[x] = static_cast<uint8_t>(v & 0xff);
        }
        std::copy(out, out + w, prev.begin());
    }
    return img;
}

Image bilinear_resize(const Image& src, int out_h, int out_w) {
    if (src.height <= 0 || src.width <= 0) throw std::invalid_argument("resize of empty image");
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y1 = std::min(y0 + 1, src.height - 1);
        y0 = std::max(y0, 0);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x1 = std::min(x0 + 1, src.width - 1);
            x0 = std::max(x0, 0);
            double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
            double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
            double v = (1.0 - wy) * top + wy * bot;
            dst.at(y, x) = static_cast<uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)));
        }
    }
    return dst;
}

Image crop_with_pad(const Image& src, int y0, int x0, int h, int w) {
    Image dst(h, w);
    for (int y = 0; y < h; ++y) {
        int sy = y0 + y;
        if (sy < 0 || sy >= src.height) continue;
        for (int x = 0; x < w; ++x) {
            int sx = x0 + x;
            if (sx < 0 || sx >= src.width) continue;
            dst.at(y, x) = src.at(sy, sx);
        }
    }
    return dst;
}

}  // namespace spikefet
