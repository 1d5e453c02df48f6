#include "stpn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "stpn/error.hpp"

namespace stpn {
namespace {

constexpr char kTensorMagic[4] = {'S', 'T', 'P', 'N'};
constexpr std::uint32_t kTensorVersion = 1;

void put_bytes_le(std::ostream& os, std::uint64_t v, int nbytes) {
    char buf[8];
    for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, nbytes);
}

std::uint64_t get_bytes_le(std::istream& is, int nbytes) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), nbytes);
    if (!is) throw FormatError("stream: truncated while reading scalar");
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void put_u32(std::ostream& os, std::uint32_t v) { put_bytes_le(os, v, 4); }
void put_u64(std::ostream& os, std::uint64_t v) { put_bytes_le(os, v, 8); }
void put_f32(std::ostream& os, float v) { put_bytes_le(os, std::bit_cast<std::uint32_t>(v), 4); }
void put_f64(std::ostream& os, double v) { put_bytes_le(os, std::bit_cast<std::uint64_t>(v), 8); }

std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_bytes_le(is, 4)); }
std::uint64_t get_u64(std::istream& is) { return get_bytes_le(is, 8); }
float get_f32(std::istream& is) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(get_bytes_le(is, 4)));
}
double get_f64(std::istream& is) { return std::bit_cast<double>(get_bytes_le(is, 8)); }

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic, 4);
    put_u32(os, kTensorVersion);
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u64(os, e);
    for (double v : t.values()) put_f64(os, v);
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kTensorMagic, 4) != 0) {
        throw FormatError("tensor: bad magic bytes");
    }
    const std::uint32_t version = get_u32(is);
    if (version != kTensorVersion) {
        throw FormatError("tensor: unsupported version " + std::to_string(version));
    }
    const std::uint32_t rank = get_u32(is);
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(get_u64(is));
    const std::size_t count = Tensor::shape_numel(shape);
    std::vector<double> data(count);
    for (auto& v : data) v = get_f64(is);
    return Tensor(std::move(shape), std::move(data));
}

void write_archive(std::ostream& os, const NamedTensors& items) {
    put_u32(os, static_cast<std::uint32_t>(items.size()));
    for (const auto& [name, tensor] : items) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(os, tensor);
    }
}

NamedTensors read_archive(std::istream& is) {
    const std::uint32_t count = get_u32(is);
    NamedTensors items;
    items.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = get_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw FormatError("archive: truncated name record");
        items.emplace_back(std::move(name), read_tensor(is));
    }
    return items;
}

void write_archive_file(const std::string& path, const NamedTensors& items) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("archive: cannot open " + path + " for writing");
    write_archive(os, items);
    if (!os) throw FormatError("archive: write failed for " + path);
}

NamedTensors read_archive_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("archive: cannot open " + path);
    return read_archive(is);
}

}  // namespace stpn
