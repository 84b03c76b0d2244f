#include "psf4d/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "psf4d/error.hpp"

namespace psf4d {

namespace {

constexpr std::uint8_t kMagic[6] = {'P', 'S', 'F', '4', 'D', '\0'};
constexpr std::size_t kFixedHeader = 10;

template <typename U>
std::uint8_t* put_le(std::uint8_t* p, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) *p++ = static_cast<std::uint8_t>(v >> (8 * i));
    return p;
}

template <typename U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype) {
    if (t.rank() == 0 || t.rank() > 255) {
        throw ShapeError("tensor rank must be in [1, 255] to serialize");
    }
    const std::size_t width = dtype == DType::f64 ? 8 : 4;
    std::vector<std::uint8_t> out(kFixedHeader + 8 * t.rank() + width * t.size());
    std::uint8_t* p = std::copy(std::begin(kMagic), std::end(kMagic), out.data());
    p = put_le<std::uint16_t>(p, kFormatVersion);
    *p++ = static_cast<std::uint8_t>(dtype);
    *p++ = static_cast<std::uint8_t>(t.rank());
    for (std::size_t d : t.shape()) p = put_le<std::uint64_t>(p, d);
    for (double v : t.values()) {
        if (dtype == DType::f64) {
            p = put_le<std::uint64_t>(p, std::bit_cast<std::uint64_t>(v));
        } else {
            p = put_le<std::uint32_t>(p, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    using R = FormatError::Reason;
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(R::magic, "not a PSF4D tensor file (magic mismatch)");
    }
    if (bytes.size() < kFixedHeader) {
        throw FormatError(R::truncated, "truncated header");
    }
    const auto version = get_le<std::uint16_t>(bytes.data() + 6);
    if (version != kFormatVersion) {
        throw FormatError(R::version, "unsupported format version " + std::to_string(version));
    }
    const std::uint8_t tag = bytes[8];
    if (tag > 1) {
        throw FormatError(R::dtype, "unknown dtype tag " + std::to_string(tag));
    }
    const auto dtype = static_cast<DType>(tag);
    const std::size_t rank = bytes[9];
    if (rank == 0) {
        throw FormatError(R::shape, "rank 0 tensor");
    }
    if (bytes.size() < kFixedHeader + 8 * rank) {
        throw FormatError(R::truncated, "truncated shape header");
    }
    Shape shape(rank);
    std::size_t count = 1;
    for (std::size_t a = 0; a < rank; ++a) {
        shape[a] = get_le<std::uint64_t>(bytes.data() + kFixedHeader + 8 * a);
        if (shape[a] == 0) {
            throw FormatError(R::shape, "zero-length axis " + std::to_string(a));
        }
        if (count > (std::size_t{1} << 56) / shape[a]) {
            throw FormatError(R::shape, "declared element count overflows");
        }
        count *= shape[a];
    }
    const std::size_t width = dtype == DType::f64 ? 8 : 4;
    const std::size_t header = kFixedHeader + 8 * rank;
    const std::size_t payload = bytes.size() - header;
    if (payload < count * width) {
        throw FormatError(R::truncated, "payload holds " + std::to_string(payload / width) +
                                            " elements, header declares " +
                                            std::to_string(count));
    }
    if (payload > count * width) {
        throw FormatError(R::trailing, std::to_string(payload - count * width) +
                                           " trailing bytes after payload");
    }
    std::vector<double> data(count);
    const std::uint8_t* p = bytes.data() + header;
    for (std::size_t i = 0; i < count; ++i, p += width) {
        data[i] = dtype == DType::f64
                      ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                      : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
    }
    return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
    write_file(path, encode_tensor(t, dtype));
}

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace psf4d
