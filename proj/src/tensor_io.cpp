// SPDX-License-Identifier: Apache-2.0
#include "fdikp/tensor.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace fdikp {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'K', 'T'};
constexpr unsigned char kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32le(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    if (std::fwrite(b, 1, 4, f) != 4) throw std::runtime_error("fdkt: write failed");
}

std::uint32_t get_u32le(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("fdkt: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32le(std::FILE* f, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32le(f, u);
}

float get_f32le(std::FILE* f) {
    std::uint32_t u = get_u32le(f);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

template <typename T>
void write_impl(const std::string& path, const TensorT<T>& t) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("fdkt: cannot open for writing: " + path);
    if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw std::runtime_error("fdkt: write failed");
    unsigned char hdr[2] = {kVersion, static_cast<unsigned char>(t.rank())};
    if (std::fwrite(hdr, 1, 2, f.get()) != 2) throw std::runtime_error("fdkt: write failed");
    for (int d = 0; d < t.rank(); ++d) put_u32le(f.get(), static_cast<std::uint32_t>(t.extent(d)));
    for (std::int64_t i = 0; i < t.size(); ++i) put_f32le(f.get(), static_cast<float>(t[i]));
}

TensorF read_impl(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("fdkt: cannot open: " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("fdkt: bad magic in " + path);
    unsigned char hdr[2];
    if (std::fread(hdr, 1, 2, f.get()) != 2) throw std::runtime_error("fdkt: truncated header");
    if (hdr[0] != kVersion) throw std::runtime_error("fdkt: unsupported version");
    std::vector<int> shape(hdr[1]);
    for (int& e : shape) {
        std::uint32_t u = get_u32le(f.get());
        if (u > (1u << 28)) throw std::runtime_error("fdkt: implausible extent");
        e = static_cast<int>(u);
    }
    TensorF t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = get_f32le(f.get());
    return t;
}

} // namespace

void write_fdkt(const std::string& path, const Tensor& t) { write_impl(path, t); }
void write_fdkt(const std::string& path, const TensorF& t) { write_impl(path, t); }

TensorF read_fdkt_f32(const std::string& path) { return read_impl(path); }

Tensor read_fdkt(const std::string& path) { return tensor_cast<double>(read_impl(path)); }

} // namespace fdikp
