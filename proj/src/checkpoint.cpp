#include "vdan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vdan {

namespace {

constexpr char kMagic[4] = {'V', 'D', 'A', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated while reading f64");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::vector<std::uint32_t> config_echo(const ModelConfig& c) {
    return {static_cast<std::uint32_t>(c.subcarriers),
            static_cast<std::uint32_t>(c.time_frames),
            static_cast<std::uint32_t>(c.streams),
            static_cast<std::uint32_t>(c.feature_dim),
            static_cast<std::uint32_t>(c.out_time),
            static_cast<std::uint32_t>(c.subcarrier_ratio),
            static_cast<std::uint32_t>(c.temporal_ratio),
            static_cast<std::uint32_t>(c.subcarrier_hidden),
            static_cast<std::uint32_t>(c.temporal_hidden)};
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    for (std::uint32_t v : config_echo(model.config)) put_u32(out, v);
    const auto named = model.named_parameters();
    put_u32(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, tensor] : named) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
        for (double v : tensor.data()) put_f64(out, v);
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failure on " + path);
}

void load_checkpoint(const std::string& path, Model& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic, not a VDAN checkpoint: " + path);
    }
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const auto expected_echo = config_echo(model.config);
    for (std::size_t i = 0; i < expected_echo.size(); ++i) {
        const std::uint32_t v = get_u32(in);
        if (v != expected_echo[i]) {
            throw std::runtime_error("load_checkpoint: config echo mismatch at field " +
                                     std::to_string(i) + " (" + std::to_string(v) + " vs " +
                                     std::to_string(expected_echo[i]) + ")");
        }
    }
    auto named = model.named_parameters();
    const std::uint32_t count = get_u32(in);
    if (count != named.size()) {
        throw std::runtime_error("load_checkpoint: parameter count mismatch (" +
                                 std::to_string(count) + " vs " + std::to_string(named.size()) +
                                 "); was the checkpoint written by a different variant?");
    }
    for (auto& [name, tensor] : named) {
        const std::uint32_t name_len = get_u32(in);
        std::string stored(name_len, '\0');
        in.read(stored.data(), name_len);
        if (!in || stored != name) {
            throw std::runtime_error("load_checkpoint: expected parameter '" + name + "', found '" +
                                     stored + "'");
        }
        const std::uint32_t rank = get_u32(in);
        if (rank != tensor.rank()) {
            throw std::runtime_error("load_checkpoint: rank mismatch for " + name);
        }
        for (std::size_t d = 0; d < rank; ++d) {
            const std::uint32_t e = get_u32(in);
            if (e != tensor.shape()[d]) {
                throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
            }
        }
        for (double& v : tensor.data()) v = get_f64(in);
    }
}

}  // namespace vdan
