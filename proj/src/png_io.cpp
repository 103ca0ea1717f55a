#include "patchforge/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "patchforge/errors.hpp"

namespace patchforge::png {

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_chunk(std::vector<std::uint8_t>& out, const char type[4],
                 const std::uint8_t* data, std::size_t len) {
    put_u32(out, static_cast<std::uint32_t>(len));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data, data + len);
    std::uint32_t crc = crc32(0L, out.data() + start, static_cast<uInt>(4 + len));
    put_u32(out, crc);
}

std::vector<std::uint8_t> zlib_compress(const std::vector<std::uint8_t>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK)
        throw Error("png: zlib compression failed");
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_decompress(const std::vector<std::uint8_t>& in,
                                          std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf len = static_cast<uLongf>(expected);
    int rc = uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK || len != expected) throw Error("png: zlib decompression failed");
    return out;
}

int color_type_for(std::size_t channels) {
    switch (channels) {
        case 1: return 0;
        case 2: return 4;
        case 3: return 2;
        case 4: return 6;
    }
    throw ConfigError("png: unsupported channel count");
}

std::size_t channels_for(int color_type) {
    switch (color_type) {
        case 0: return 1;
        case 2: return 3;
        case 4: return 2;
        case 6: return 4;
    }
    throw Error("png: unsupported color type");
}

std::uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

}  // namespace

std::vector<std::uint8_t> encode(const Image& img) {
    if (img.width == 0 || img.height == 0) throw ConfigError("png: empty image");
    if (img.bit_depth != 1 && img.bit_depth != 8 && img.bit_depth != 16)
        throw ConfigError("png: unsupported bit depth");
    if (img.bit_depth == 1 && img.channels != 1)
        throw ConfigError("png: 1-bit images must be grayscale");
    if (img.samples.size() != img.width * img.height * img.channels)
        throw ConfigError("png: sample buffer does not match dimensions");

    const std::size_t row_bytes =
        img.bit_depth == 1 ? (img.width + 7) / 8
                           : img.width * img.channels * (img.bit_depth / 8);

    std::vector<std::uint8_t> raw;
    raw.reserve(img.height * (row_bytes + 1));
    for (std::size_t y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        if (img.bit_depth == 1) {
            std::uint8_t byte = 0;
            int bits = 0;
            for (std::size_t x = 0; x < img.width; ++x) {
                byte = static_cast<std::uint8_t>((byte << 1) | (img.samples[y * img.width + x] ? 1 : 0));
                if (++bits == 8) {
                    raw.push_back(byte);
                    byte = 0;
                    bits = 0;
                }
            }
            if (bits) raw.push_back(static_cast<std::uint8_t>(byte << (8 - bits)));
        } else {
            for (std::size_t x = 0; x < img.width * img.channels; ++x) {
                std::uint16_t s = img.samples[y * img.width * img.channels + x];
                if (img.bit_depth == 16) {
                    raw.push_back(static_cast<std::uint8_t>(s >> 8));
                    raw.push_back(static_cast<std::uint8_t>(s & 0xff));
                } else {
                    raw.push_back(static_cast<std::uint8_t>(s & 0xff));
                }
            }
        }
    }

    std::vector<std::uint8_t> out(kSignature, kSignature + 8);
    std::uint8_t ihdr[13];
    ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
    ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
    ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
    ihdr[3] = static_cast<std::uint8_t>(img.width);
    ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
    ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
    ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
    ihdr[7] = static_cast<std::uint8_t>(img.height);
    ihdr[8] = static_cast<std::uint8_t>(img.bit_depth);
    ihdr[9] = static_cast<std::uint8_t>(color_type_for(img.channels));
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter method
    ihdr[12] = 0;  // no interlace
    write_chunk(out, "IHDR", ihdr, 13);
    auto idat = zlib_compress(raw);
    write_chunk(out, "IDAT", idat.data(), idat.size());
    write_chunk(out, "IEND", nullptr, 0);
    return out;
}

Image decode(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || std::memcmp(data, kSignature, 8) != 0)
        throw ProtocolError("png: bad signature");

    std::size_t pos = 8;
    Image img;
    int color_type = -1;
    std::vector<std::uint8_t> idat;
    bool seen_iend = false;
    while (pos + 8 <= size && !seen_iend) {
        std::uint32_t len = get_u32(data + pos);
        if (pos + 12 + len > size) throw ProtocolError("png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(data + pos + 4);
        const std::uint8_t* payload = data + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ProtocolError("png: bad IHDR");
            img.width = get_u32(payload);
            img.height = get_u32(payload + 4);
            img.bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw ProtocolError("png: interlaced images unsupported");
            img.channels = channels_for(color_type);
            if (img.bit_depth != 1 && img.bit_depth != 8 && img.bit_depth != 16)
                throw ProtocolError("png: unsupported bit depth");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (img.width == 0 || img.height == 0 || idat.empty())
        throw ProtocolError("png: missing IHDR or IDAT");

    const std::size_t bpp_bits = img.channels * img.bit_depth;
    const std::size_t row_bytes = (img.width * bpp_bits + 7) / 8;
    const std::size_t filter_bpp = std::max<std::size_t>(1, bpp_bits / 8);
    auto raw = zlib_decompress(idat, img.height * (row_bytes + 1));

    // undo per-row filters in place
    std::vector<std::uint8_t> prev(row_bytes, 0);
    std::vector<std::uint8_t> cur(row_bytes);
    std::vector<std::uint8_t> unfiltered;
    unfiltered.reserve(img.height * row_bytes);
    for (std::size_t y = 0; y < img.height; ++y) {
        std::uint8_t filter = raw[y * (row_bytes + 1)];
        const std::uint8_t* src = &raw[y * (row_bytes + 1) + 1];
        for (std::size_t i = 0; i < row_bytes; ++i) {
            int a = i >= filter_bpp ? cur[i - filter_bpp] : 0;
            int b = prev[i];
            int c = i >= filter_bpp ? prev[i - filter_bpp] : 0;
            int x = src[i];
            switch (filter) {
                case 0: cur[i] = static_cast<std::uint8_t>(x); break;
                case 1: cur[i] = static_cast<std::uint8_t>(x + a); break;
                case 2: cur[i] = static_cast<std::uint8_t>(x + b); break;
                case 3: cur[i] = static_cast<std::uint8_t>(x + (a + b) / 2); break;
                case 4: cur[i] = static_cast<std::uint8_t>(x + paeth(a, b, c)); break;
                default: throw ProtocolError("png: unknown filter type");
            }
        }
        unfiltered.insert(unfiltered.end(), cur.begin(), cur.end());
        std::swap(prev, cur);
    }

    img.samples.resize(img.width * img.height * img.channels);
    if (img.bit_depth == 1) {
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                std::uint8_t byte = unfiltered[y * row_bytes + x / 8];
                img.samples[y * img.width + x] = (byte >> (7 - x % 8)) & 1;
            }
    } else if (img.bit_depth == 8) {
        for (std::size_t i = 0; i < img.samples.size(); ++i) img.samples[i] = unfiltered[i];
    } else {
        for (std::size_t i = 0; i < img.samples.size(); ++i)
            img.samples[i] = static_cast<std::uint16_t>((unfiltered[2 * i] << 8) | unfiltered[2 * i + 1]);
    }
    return img;
}

Image decode(const std::vector<std::uint8_t>& data) { return decode(data.data(), data.size()); }

void write_file(const std::string& path, const Image& img) {
    auto bytes = encode(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("png: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("png: write failed: " + path);
}

Image read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("png: cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode(bytes);
}

Image from_rgb_tensor(const Tensor& pixels) {
    if (pixels.shape.size() != 3 || pixels.shape[0] != 3)
        throw ConfigError("png: expected [3, H, W] tensor");
    Image img;
    img.height = pixels.shape[1];
    img.width = pixels.shape[2];
    img.channels = 3;
    img.bit_depth = 8;
    img.samples.resize(img.width * img.height * 3);
    const std::size_t plane = img.width * img.height;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            double x = std::min(1.0, std::max(0.0, pixels.v[c * plane + i]));
            img.samples[i * 3 + c] = static_cast<std::uint16_t>(std::lround(x * 255.0));
        }
    return img;
}

Tensor to_rgb_tensor(const Image& img) {
    const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
    const std::size_t plane = img.width * img.height;
    Tensor out({3, img.height, img.width}, 0.0);
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            std::size_t src_c = img.channels >= 3 ? c : 0;  // grayscale broadcast
            out.v[c * plane + i] = img.samples[i * img.channels + src_c] / scale;
        }
    return out;
}

Image from_uv_tensors(const Tensor& u, const Tensor& v) {
    if (u.shape != v.shape || u.shape.size() != 2)
        throw ConfigError("png: uv planes must share a [H, W] shape");
    Image img;
    img.height = u.shape[0];
    img.width = u.shape[1];
    img.channels = 2;
    img.bit_depth = 16;
    img.samples.resize(img.width * img.height * 2);
    for (std::size_t i = 0; i < img.width * img.height; ++i) {
        img.samples[i * 2 + 0] = static_cast<std::uint16_t>(std::lround(std::min(1.0, std::max(0.0, u.v[i])) * 65535.0));
        img.samples[i * 2 + 1] = static_cast<std::uint16_t>(std::lround(std::min(1.0, std::max(0.0, v.v[i])) * 65535.0));
    }
    return img;
}

void to_uv_tensors(const Image& img, Tensor& u, Tensor& v) {
    if (img.channels != 2 || img.bit_depth != 16)
        throw ProtocolError("png: expected 2-channel 16-bit UV image");
    u = Tensor({img.height, img.width}, 0.0);
    v = Tensor({img.height, img.width}, 0.0);
    for (std::size_t i = 0; i < img.width * img.height; ++i) {
        u.v[i] = img.samples[i * 2 + 0] / 65535.0;
        v.v[i] = img.samples[i * 2 + 1] / 65535.0;
    }
}

Image from_mask_tensor(const Tensor& mask) {
    if (mask.shape.size() != 2) throw ConfigError("png: mask must be [H, W]");
    Image img;
    img.height = mask.shape[0];
    img.width = mask.shape[1];
    img.channels = 1;
    img.bit_depth = 1;
    img.samples.resize(img.width * img.height);
    for (std::size_t i = 0; i < img.samples.size(); ++i)
        img.samples[i] = mask.v[i] >= 0.5 ? 1 : 0;
    return img;
}

Tensor to_mask_tensor(const Image& img) {
    if (img.channels != 1) throw ProtocolError("png: mask must be grayscale");
    const double thresh = img.bit_depth == 1 ? 0.5 : (img.bit_depth == 8 ? 127.5 : 32767.5);
    Tensor out({img.height, img.width}, 0.0);
    for (std::size_t i = 0; i < img.samples.size(); ++i)
        out.v[i] = img.samples[i] > thresh || (img.bit_depth == 1 && img.samples[i]) ? 1.0 : 0.0;
    return out;
}

}  // namespace patchforge::png
