#include "jfr/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "tensor wire format assumes a little-endian host");

namespace jfr::io {

namespace {

constexpr char kTensorMagic[4] = {'J', 'T', 'N', 'S'};

[[noreturn]] void fail(const std::string& context, const std::string& what) {
    throw std::runtime_error(context.empty() ? what : context + ": " + what);
}

void read_exact(std::istream& is, void* dst, std::size_t n, const std::string& context) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        fail(context, "unexpected end of stream (truncated file?)");
    }
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const std::string& context) {
    std::uint32_t v;
    read_exact(is, &v, sizeof v, context);
    return v;
}

std::uint64_t read_u64(std::istream& is, const std::string& context) {
    std::uint64_t v;
    read_exact(is, &v, sizeof v, context);
    return v;
}

void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char magic[4], const std::string& context) {
    char got[4];
    read_exact(is, got, 4, context);
    if (std::memcmp(got, magic, 4) != 0) {
        fail(context, std::string("bad magic, expected \"") + std::string(magic, 4) + "\"");
    }
}

void write_tensor(std::ostream& os, const Tensor& t) {
    if (t.rank() == 0) throw std::invalid_argument("cannot serialize a rank-0 tensor");
    write_magic(os, kTensorMagic);
    write_u32(os, kTensorFormatVersion);
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u64(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is, const std::string& context) {
    expect_magic(is, kTensorMagic, context);
    const std::uint32_t version = read_u32(is, context);
    if (version != kTensorFormatVersion) {
        fail(context, "unsupported tensor format version " + std::to_string(version) +
                          " (expected " + std::to_string(kTensorFormatVersion) + ")");
    }
    const std::uint32_t rank = read_u32(is, context);
    if (rank > 8) fail(context, "implausible tensor rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint64_t d = read_u64(is, context);
        if (d == 0 || d > (1ull << 32)) fail(context, "implausible tensor dimension");
        shape[i] = static_cast<std::size_t>(d);
        n *= shape[i];
    }
    std::vector<double> data(n);
    read_exact(is, data.data(), n * sizeof(double), context);
    Tensor t(std::move(shape), std::move(data));
    if (!t.all_finite()) fail(context, "tensor contains non-finite values");
    return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_tensor(os, t);
    if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return read_tensor(is, path);
}

}  // namespace jfr::io
