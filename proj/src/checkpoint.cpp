#include <cstring>
#include <fstream>

#include "goldendie/train.hpp"

namespace goldendie {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u8(std::ofstream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void write_u32(std::ofstream& out, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void write_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

void write_str(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
    std::ifstream in;
    std::filesystem::path path;

    void need(bool ok) const {
        if (!ok) throw IoError("truncated or corrupt checkpoint " + path.string());
    }
    std::uint8_t u8() {
        const int c = in.get();
        need(c != EOF);
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() {
        unsigned char buf[4];
        in.read(reinterpret_cast<char*>(buf), 4);
        need(static_cast<bool>(in));
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const auto n = u32();
        std::string s(n, '\0');
        in.read(s.data(), n);
        need(static_cast<bool>(in));
        return s;
    }
};

} // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u8(out, mode == SimMode::classification ? 1 : 0);
    write_u8(out, static_cast<std::uint8_t>(loss));
    write_u32(out, static_cast<std::uint32_t>(k_in));
    write_u32(out, static_cast<std::uint32_t>(k_out));
    for (int w : widths) write_u32(out, static_cast<std::uint32_t>(w));
    write_u32(out, static_cast<std::uint32_t>(epoch));
    write_f64(out, lr);
    write_u32(out, static_cast<std::uint32_t>(val_scores.size()));
    for (const auto& [name, value] : val_scores) {
        write_str(out, name);
        write_f64(out, value);
    }
    write_u64(out, palette_hash);
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        write_str(out, t.name);
        write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        std::size_t expect = 1;
        for (auto d : t.dims) {
            write_u32(out, d);
            expect *= d;
        }
        if (expect != t.data.size())
            throw ContractError("tensor '" + t.name + "' shape does not match payload");
        for (float f : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(out, bits);
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) throw IoError("cannot open checkpoint " + path.string());
    char magic[4];
    r.in.read(magic, 4);
    r.need(static_cast<bool>(r.in));
    if (!std::equal(magic, magic + 4, kMagic))
        throw IoError(path.string() + " is not a checkpoint file");
    const auto version = r.u32();
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint c;
    c.mode = r.u8() ? SimMode::classification : SimMode::regression;
    c.loss = static_cast<LossKind>(r.u8());
    c.k_in = static_cast<int>(r.u32());
    c.k_out = static_cast<int>(r.u32());
    for (int& w : c.widths) w = static_cast<int>(r.u32());
    c.epoch = static_cast<int>(r.u32());
    c.lr = r.f64();
    const auto n_scores = r.u32();
    for (std::uint32_t i = 0; i < n_scores; ++i) {
        std::string name = r.str();
        const double v = r.f64();
        c.val_scores.emplace_back(std::move(name), v);
    }
    c.palette_hash = r.u64();
    const auto n_tensors = r.u32();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        NamedTensorF32 t;
        t.name = r.str();
        const auto ndim = r.u32();
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            t.dims.push_back(r.u32());
            total *= t.dims.back();
        }
        t.data.resize(total);
        for (std::size_t j = 0; j < total; ++j) {
            const std::uint32_t bits = r.u32();
            float f;
            std::memcpy(&f, &bits, 4);
            t.data[j] = f;
        }
        c.tensors.push_back(std::move(t));
    }
    return c;
}

} // namespace goldendie
