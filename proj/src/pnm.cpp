#include "goldendie/pnm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace goldendie {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#')
                tok.push_back(static_cast<char>(in.get()));
            return tok;
        }
    }
    throw IoError("unexpected end of header");
}

int next_int(std::istream& in, const std::filesystem::path& path) {
    const std::string tok = next_token(in);
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw IoError("bad header value '" + tok + "' in " + path.string());
    }
}

struct PnmHeader {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 1;
};

PnmHeader read_header(std::istream& in, const std::filesystem::path& path) {
    PnmHeader h;
    h.magic = next_token(in);
    h.width = next_int(in, path);
    h.height = next_int(in, path);
    if (h.magic == "P5" || h.magic == "P6" || h.magic == "P2" || h.magic == "P3")
        h.maxval = next_int(in, path);
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
        throw IoError("invalid dimensions in " + path.string());
    // exactly one whitespace byte separates header and binary payload
    in.get();
    return h;
}

void read_exact(std::istream& in, char* dst, std::size_t n, const std::filesystem::path& path) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw IoError("truncated raster data in " + path.string());
}

} // namespace

RasterImage load_ppm(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.magic != "P6") throw IoError(path.string() + ": expected binary PPM (P6), got " + h.magic);
    if (h.maxval != 255) throw IoError(path.string() + ": unsupported maxval " + std::to_string(h.maxval));
    RasterImage img(h.height, h.width);
    std::vector<unsigned char> row(static_cast<std::size_t>(h.width) * 3);
    for (int y = 0; y < h.height; ++y) {
        read_exact(in, reinterpret_cast<char*>(row.data()), row.size(), path);
        for (int x = 0; x < h.width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
    }
    return img;
}

void save_ppm(const std::filesystem::path& path, const RasterImage& img) {
    auto out = open_out(path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::min(1.0, std::max(0.0, img.at(y, x, c)));
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

BinaryMask load_bitmask(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    BinaryMask mask(h.height, h.width);
    if (h.magic == "P4") {
        const std::size_t row_bytes = (static_cast<std::size_t>(h.width) + 7) / 8;
        std::vector<unsigned char> row(row_bytes);
        for (int y = 0; y < h.height; ++y) {
            read_exact(in, reinterpret_cast<char*>(row.data()), row_bytes, path);
            for (int x = 0; x < h.width; ++x) {
                const bool bit = (row[x / 8] >> (7 - x % 8)) & 1;
                mask.at(y, x) = bit ? 1 : -1;
            }
        }
        return mask;
    }
    if (h.magic == "P5") {
        // tolerated for externally produced layers, but every pixel must be
        // exactly 0 or maxval
        std::vector<unsigned char> row(static_cast<std::size_t>(h.width));
        for (int y = 0; y < h.height; ++y) {
            read_exact(in, reinterpret_cast<char*>(row.data()), row.size(), path);
            for (int x = 0; x < h.width; ++x) {
                if (row[x] != 0 && row[x] != h.maxval)
                    throw ContractError(path.string() + ": non-binary layer pixel at (" +
                                        std::to_string(x) + "," + std::to_string(y) + ") value " +
                                        std::to_string(row[x]));
                mask.at(y, x) = row[x] ? 1 : -1;
            }
        }
        return mask;
    }
    throw IoError(path.string() + ": expected PBM (P4) or binary PGM, got " + h.magic);
}

void save_bitmask(const std::filesystem::path& path, const BinaryMask& mask) {
    auto out = open_out(path);
    out << "P4\n" << mask.width << " " << mask.height << "\n";
    const std::size_t row_bytes = (static_cast<std::size_t>(mask.width) + 7) / 8;
    std::vector<unsigned char> row(row_bytes);
    for (int y = 0; y < mask.height; ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x) > 0) row[x / 8] |= static_cast<unsigned char>(1u << (7 - x % 8));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row_bytes));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

QuantizedImage load_pgm8(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.magic != "P5") throw IoError(path.string() + ": expected binary PGM (P5), got " + h.magic);
    if (h.maxval > 255) throw IoError(path.string() + ": expected 8-bit PGM");
    QuantizedImage img(h.height, h.width);
    read_exact(in, reinterpret_cast<char*>(img.data.data()), img.data.size(), path);
    return img;
}

void save_pgm8(const std::filesystem::path& path, const QuantizedImage& img) {
    auto out = open_out(path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::uint16_t> load_pgm16(const std::filesystem::path& path, int& height, int& width) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.magic != "P5" || h.maxval != 65535)
        throw IoError(path.string() + ": expected 16-bit binary PGM");
    height = h.height;
    width = h.width;
    std::vector<std::uint16_t> data(static_cast<std::size_t>(h.height) * h.width);
    std::vector<unsigned char> raw(data.size() * 2);
    read_exact(in, reinterpret_cast<char*>(raw.data()), raw.size(), path);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<std::uint16_t>((raw[i * 2] << 8) | raw[i * 2 + 1]); // big-endian
    return data;
}

void save_pgm16(const std::filesystem::path& path, int height, int width,
                const std::vector<std::uint16_t>& data) {
    if (data.size() != static_cast<std::size_t>(height) * width)
        throw ContractError("pgm16 data size does not match dimensions");
    auto out = open_out(path);
    out << "P5\n" << width << " " << height << "\n65535\n";
    std::vector<unsigned char> raw(data.size() * 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        raw[i * 2] = static_cast<unsigned char>(data[i] >> 8);
        raw[i * 2 + 1] = static_cast<unsigned char>(data[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace goldendie
