#include "pyrflow/image_io.hpp"

#include <cctype>
#include <csetjmp>
#include <cstring>
#include <sstream>

#include <png.h>

#include "byte_io.hpp"
#include "pyrflow/error.hpp"

namespace pyrflow {

namespace {

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<png_byte> bytes;  // interleaved, 16-bit samples big-endian
};

struct MemoryCursor {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<MemoryCursor*>(png_get_io_ptr(png));
    if (cur->size - cur->pos < n) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, cur->data + cur->pos, n);
    cur->pos += n;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

bool decode_png(const std::vector<std::uint8_t>& file, DecodedPng& out) {
    if (file.size() < 8 || png_sig_cmp(file.data(), 0, 8) != 0) return false;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    MemoryCursor cursor{file.data(), file.size(), 0};
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &cursor, read_from_memory);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.bytes.resize(stride * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

std::vector<std::uint8_t> encode_png(int width, int height, int channels, int bit_depth,
                                     const std::vector<png_byte>& interleaved) {
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(interleaved.data() + stride * y);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed");
    }
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

Image8 decode_pnm(const std::vector<std::uint8_t>& file, const std::string& name) {
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < file.size()) {
            if (file[pos] == '#') {
                while (pos < file.size() && file[pos] != '\n') ++pos;
            } else if (std::isspace(file[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < file.size() && !std::isspace(file[pos])) tok.push_back(static_cast<char>(file[pos++]));
        return tok;
    };
    const std::string magic = next_token();
    if (magic != "P5" && magic != "P6") throw FormatError("'" + name + "' is not a binary PGM/PPM");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw FormatError("malformed PNM header in '" + name + "'");
    }
    if (w < 1 || h < 1 || maxval != 255) throw FormatError("unsupported PNM geometry/maxval in '" + name + "'");
    ++pos;  // single whitespace after maxval
    const int c = magic == "P6" ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * h * c;
    if (file.size() < pos || file.size() - pos < need) throw LengthError("truncated PNM payload in '" + name + "'");
    Image8 img(c, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) img.at(ch, y, x) = file[pos++];
        }
    }
    return img;
}

}  // namespace

Image8 read_image8(const std::filesystem::path& path) {
    const auto file = detail::read_file(path.string());
    if (lower_extension(path) != ".png") return decode_pnm(file, path.string());
    DecodedPng png;
    if (!decode_png(file, png)) throw FormatError("cannot decode PNG '" + path.string() + "'");
    Image8 img(png.channels, png.height, png.width);
    const int bytes_per = png.bit_depth / 8;
    for (int y = 0; y < png.height; ++y) {
        for (int x = 0; x < png.width; ++x) {
            for (int c = 0; c < png.channels; ++c) {
                const std::size_t i = ((static_cast<std::size_t>(y) * png.width + x) * png.channels + c) * bytes_per;
                img.at(c, y, x) = png.bytes[i];  // high byte for 16-bit
            }
        }
    }
    return img;
}

void write_image8(const std::filesystem::path& path, const Image8& image) {
    if (image.channels != 1 && image.channels != 3) throw ShapeError("write_image8 needs 1 or 3 channels");
    std::vector<png_byte> interleaved(image.data.size());
    std::size_t i = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) interleaved[i++] = image.at(c, y, x);
        }
    }
    if (lower_extension(path) == ".png") {
        detail::write_file(path.string(), encode_png(image.width, image.height, image.channels, 8, interleaved));
        return;
    }
    std::ostringstream header;
    header << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
    const std::string h = header.str();
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), interleaved.begin(), interleaved.end());
    detail::write_file(path.string(), bytes);
}

Image16 read_png16(const std::filesystem::path& path) {
    const auto file = detail::read_file(path.string());
    DecodedPng png;
    if (!decode_png(file, png)) throw FormatError("cannot decode PNG '" + path.string() + "'");
    if (png.bit_depth != 16 || png.channels != 3) {
        throw FormatError("'" + path.string() + "' is not a 16-bit RGB PNG");
    }
    Image16 img(3, png.height, png.width);
    for (int y = 0; y < png.height; ++y) {
        for (int x = 0; x < png.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const std::size_t i = ((static_cast<std::size_t>(y) * png.width + x) * 3 + c) * 2;
                img.at(c, y, x) = static_cast<std::uint16_t>((png.bytes[i] << 8) | png.bytes[i + 1]);
            }
        }
    }
    return img;
}

void write_png16(const std::filesystem::path& path, const Image16& image) {
    if (image.channels != 3) throw ShapeError("write_png16 needs 3 channels");
    std::vector<png_byte> interleaved(image.data.size() * 2);
    std::size_t i = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const std::uint16_t s = image.at(c, y, x);
                interleaved[i++] = static_cast<png_byte>(s >> 8);
                interleaved[i++] = static_cast<png_byte>(s & 0xff);
            }
        }
    }
    detail::write_file(path.string(), encode_png(image.width, image.height, 3, 16, interleaved));
}

Tensor image_to_tensor(const Image8& image) {
    if (image.channels != 1 && image.channels != 3) throw ShapeError("image must have 1 or 3 channels");
    Tensor t({3, image.height, image.width});
    for (int c = 0; c < 3; ++c) {
        const int src = image.channels == 3 ? c : 0;
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) t.at(c, y, x) = static_cast<float>(image.at(src, y, x));
        }
    }
    return t;
}

}  // namespace pyrflow
