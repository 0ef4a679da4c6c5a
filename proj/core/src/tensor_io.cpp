#include "skelmatch/tensor_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace skelmatch {

namespace {

constexpr std::array<unsigned char, 4> kMagic = {0x53, 0x54, 0x53, 0x4B};  // "STSK"
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 24;

// Payloads are little-endian on disk; byte-swap on big-endian hosts.
constexpr bool kHostLittle = (std::endian::native == std::endian::little);

template <typename T>
T bswap(T v) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
        std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    return std::bit_cast<T>(bytes);
}

template <typename T>
T to_le(T v) { return kHostLittle ? v : bswap(v); }

template <typename T>
T from_le(T v) { return kHostLittle ? v : bswap(v); }

void put_u16(unsigned char* p, std::uint16_t v) {
    v = to_le(v);
    std::memcpy(p, &v, 2);
}
void put_u32(unsigned char* p, std::uint32_t v) {
    v = to_le(v);
    std::memcpy(p, &v, 4);
}
std::uint16_t get_u16(const unsigned char* p) {
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    return from_le(v);
}
std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return from_le(v);
}

}  // namespace

FeatureMap read_tensor(std::istream& in, const std::string& origin) {
    std::array<unsigned char, kHeaderSize> header;
    in.read(reinterpret_cast<char*>(header.data()), kHeaderSize);
    if (in.gcount() != static_cast<std::streamsize>(kHeaderSize))
        throw io_error(origin + ": truncated header (" +
                       std::to_string(in.gcount()) + " of 24 bytes)");

    if (!std::equal(kMagic.begin(), kMagic.end(), header.begin()))
        throw io_error(origin + ": bad magic, not a tensor file");

    const std::uint16_t version = get_u16(header.data() + 4);
    if (version != kVersion)
        throw io_error(origin + ": unsupported version " + std::to_string(version));

    const unsigned char dtype = header[6];
    if (dtype != static_cast<unsigned char>(TensorDType::kF32) &&
        dtype != static_cast<unsigned char>(TensorDType::kF64))
        throw io_error(origin + ": unknown dtype code " + std::to_string(dtype));

    const unsigned char ndim = header[7];
    if (ndim != 3)
        throw io_error(origin + ": expected 3 dims, got " + std::to_string(ndim));

    const std::uint32_t c = get_u32(header.data() + 8);
    const std::uint32_t n = get_u32(header.data() + 12);
    const std::uint32_t t = get_u32(header.data() + 16);
    if (c == 0 || n == 0 || t == 0)
        throw validation_error(origin + ": zero-sized dimension in header");

    // Reject headers whose element count cannot be addressed safely.
    constexpr std::uint64_t kMaxElems = std::uint64_t{1} << 31;
    const std::uint64_t count = std::uint64_t{c} * n * t;
    if (count > kMaxElems || c > std::uint64_t{1} << 20 || n > std::uint64_t{1} << 20 ||
        t > std::uint64_t{1} << 20)
        throw validation_error(origin + ": dim-overflow, header declares " +
                               std::to_string(count) + " elements");

    const unsigned char s_scale = header[20];
    const unsigned char t_scale = header[21];
    if (header[22] != 0 || header[23] != 0)
        throw io_error(origin + ": reserved header bytes are nonzero");

    FeatureMap map(static_cast<int>(c), static_cast<int>(n), static_cast<int>(t),
                   s_scale, t_scale);

    const std::size_t elem_size = (dtype == 1) ? 4 : 8;
    std::vector<char> payload(static_cast<std::size_t>(count) * elem_size);
    in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != payload.size())
        throw io_error(origin + ": payload-size-mismatch, expected " +
                       std::to_string(payload.size()) + " bytes, got " +
                       std::to_string(got));
    // Trailing garbage also counts as a size mismatch.
    if (in.peek() != std::char_traits<char>::eof())
        throw io_error(origin + ": payload-size-mismatch, trailing bytes after payload");

    if (dtype == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, payload.data() + i * 4, 4);
            map.data[i] = static_cast<double>(std::bit_cast<float>(from_le(bits)));
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, payload.data() + i * 8, 8);
            map.data[i] = std::bit_cast<double>(from_le(bits));
        }
    }

    for (double v : map.data)
        if (!std::isfinite(v))
            throw validation_error(origin + ": non-finite value in payload");

    return map;
}

FeatureMap read_tensor(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw io_error("cannot open " + file.string());
    return read_tensor(in, file.string());
}

void write_tensor(const FeatureMap& map, std::ostream& out, TensorDType dtype) {
    if (map.channels <= 0 || map.joints <= 0 || map.frames <= 0)
        throw validation_error("write_tensor: empty map");
    if (map.size() != static_cast<std::size_t>(map.channels) * map.joints * map.frames)
        throw validation_error("write_tensor: data length does not match dims");
    constexpr std::uint64_t kDimMax = std::numeric_limits<std::uint32_t>::max();
    if (static_cast<std::uint64_t>(map.channels) > kDimMax ||
        static_cast<std::uint64_t>(map.joints) > kDimMax ||
        static_cast<std::uint64_t>(map.frames) > kDimMax)
        throw validation_error("write_tensor: dim-overflow");

    std::array<unsigned char, kHeaderSize> header{};
    std::copy(kMagic.begin(), kMagic.end(), header.begin());
    put_u16(header.data() + 4, kVersion);
    header[6] = static_cast<unsigned char>(dtype);
    header[7] = 3;
    put_u32(header.data() + 8, static_cast<std::uint32_t>(map.channels));
    put_u32(header.data() + 12, static_cast<std::uint32_t>(map.joints));
    put_u32(header.data() + 16, static_cast<std::uint32_t>(map.frames));
    header[20] = static_cast<unsigned char>(map.spatial_scale);
    header[21] = static_cast<unsigned char>(map.temporal_scale);
    out.write(reinterpret_cast<const char*>(header.data()), kHeaderSize);

    if (dtype == TensorDType::kF32) {
        std::vector<char> payload(map.size() * 4);
        for (std::size_t i = 0; i < map.size(); ++i) {
            const std::uint32_t bits =
                to_le(std::bit_cast<std::uint32_t>(static_cast<float>(map.data[i])));
            std::memcpy(payload.data() + i * 4, &bits, 4);
        }
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    } else {
        std::vector<char> payload(map.size() * 8);
        for (std::size_t i = 0; i < map.size(); ++i) {
            const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(map.data[i]));
            std::memcpy(payload.data() + i * 8, &bits, 8);
        }
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    if (!out) throw io_error("write_tensor: stream write failed");
}

void write_tensor(const FeatureMap& map, const std::filesystem::path& file,
                  TensorDType dtype) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + file.string() + " for writing");
    write_tensor(map, out, dtype);
}

}  // namespace skelmatch
