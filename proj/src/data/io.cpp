#include "semattn/data/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "semattn/errors.hpp"
#include "semattn/util/binary.hpp"
#include "semattn/util/fs.hpp"

namespace semattn::data {

namespace {

constexpr char kSemMagic[4] = {'S', 'E', 'M', '1'};

struct PngImageGuard {
    png_image* image;
    ~PngImageGuard() { png_image_free(image); }
};

}  // namespace

RgbImage read_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    PngImageGuard guard{&png};
    if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
        throw IoError("cannot read PNG " + path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    if (png.width == 0 || png.height == 0) throw ShapeError("zero-area PNG " + path.string());
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
    if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
        throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
    }
    RgbImage img(static_cast<int>(png.height), static_cast<int>(png.width));
    img.source_path = path.string();
    for (std::size_t i = 0; i < buffer.size(); ++i) img.pixels[i] = static_cast<float>(buffer[i]) / 255.0F;
    return img;
}

std::string encode_png_rgb8(int height, int width, const std::vector<unsigned char>& rgb) {
    if (height < 1 || width < 1 || rgb.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeError("encode_png_rgb8: buffer does not match " + std::to_string(height) + "x" +
                         std::to_string(width) + "x3");
    }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(width);
    png.height = static_cast<png_uint_32>(height);
    png.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (png_image_write_to_memory(&png, nullptr, &size, 0, rgb.data(), 0, nullptr) == 0) {
        throw IoError(std::string("PNG size query failed: ") + png.message);
    }
    std::string out(size, '\0');
    if (png_image_write_to_memory(&png, out.data(), &size, 0, rgb.data(), 0, nullptr) == 0) {
        throw IoError(std::string("PNG encode failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

std::string encode_png(const RgbImage& image) {
    std::vector<unsigned char> rgb(image.pixels.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        const float v = std::clamp(image.pixels[i], 0.0F, 1.0F);
        rgb[i] = static_cast<unsigned char>(std::lround(v * 255.0F));
    }
    return encode_png_rgb8(image.height, image.width, rgb);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    util::write_file_atomic(path, encode_png(image));
}

std::string encode_sem(const SemanticScoreTensor& sem) {
    sem.validate();
    std::string out;
    out.reserve(16 + sem.labels.size() * 6);
    out.append(kSemMagic, 4);
    util::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sem.height));
    util::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sem.width));
    util::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sem.num_classes));
    for (std::size_t p = 0; p < sem.labels.size(); p += kTopSlots) {
        for (int k = 0; k < kTopSlots; ++k) util::put_le<std::uint16_t>(out, sem.labels[p + k]);
        for (int k = 0; k < kTopSlots; ++k) util::put_le<float>(out, sem.scores[p + k]);
    }
    return out;
}

SemanticScoreTensor decode_sem(const std::string& bytes, const std::string& context) {
    util::ByteReader reader(bytes, context);
    if (reader.take(4) != std::string(kSemMagic, 4)) throw FormatError(context + ": bad magic, expected SEM1");
    const auto h = reader.get<std::uint32_t>();
    const auto w = reader.get<std::uint32_t>();
    const auto l = reader.get<std::uint32_t>();
    if (h == 0 || w == 0 || l == 0 || l > kNoLabel) throw FormatError(context + ": invalid header dimensions");
    const std::size_t records = static_cast<std::size_t>(h) * w;
    if (reader.remaining() != records * kTopSlots * (sizeof(std::uint16_t) + sizeof(float))) {
        throw FormatError(context + ": payload size does not match header");
    }
    SemanticScoreTensor sem(static_cast<int>(h), static_cast<int>(w), static_cast<int>(l));
    for (std::size_t p = 0; p < records * kTopSlots; p += kTopSlots) {
        for (int k = 0; k < kTopSlots; ++k) sem.labels[p + k] = reader.get<std::uint16_t>();
        for (int k = 0; k < kTopSlots; ++k) sem.scores[p + k] = reader.get<float>();
    }
    try {
        sem.validate();
    } catch (const FormatError& e) {
        throw FormatError(context + ": " + e.what());
    }
    return sem;
}

SemanticScoreTensor read_sem(const std::filesystem::path& path) { return decode_sem(util::read_file(path), path.string()); }

void write_sem(const std::filesystem::path& path, const SemanticScoreTensor& sem) {
    util::write_file_atomic(path, encode_sem(sem));
}

}  // namespace semattn::data
