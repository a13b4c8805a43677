#include "tiattack/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tiattack/errors.hpp"

namespace tia {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

std::string shape_tuple(std::span<const std::size_t> shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) s += shape.size() == 1 ? "," : ", ";
    }
    return s + ")";
}

std::string header_value(const std::string& header, const std::string& key, std::uint64_t offset) {
    auto pos = header.find("'" + key + "'");
    if (pos == std::string::npos) throw FormatError("npy: header lacks '" + key + "'", offset);
    pos = header.find(':', pos);
    if (pos == std::string::npos) throw FormatError("npy: malformed header", offset);
    return header.substr(pos + 1);
}

}  // namespace

void write_npy(const std::filesystem::path& path, std::span<const std::size_t> shape,
               std::span<const double> data) {
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (count != data.size()) throw std::invalid_argument("write_npy: shape/data length mismatch");

    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
    // magic(6) + version(2) + length(2) + header + '\n', padded to a multiple of 64.
    std::size_t total = kMagicLen + 4 + header.size() + 1;
    header.append((64 - total % 64) % 64, ' ');
    header += '\n';

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_npy: cannot open " + path.string());
    out.write(kMagic, kMagicLen);
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_npy: write failed for " + path.string());
}

void write_npy(const std::filesystem::path& path, const Tensor& t) {
    const Shape& s = t.shape();
    const std::size_t shape[4] = {static_cast<std::size_t>(s.n), static_cast<std::size_t>(s.c),
                                  static_cast<std::size_t>(s.h), static_cast<std::size_t>(s.w)};
    write_npy(path, shape, t.values());
}

NpyArray read_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_npy: cannot open " + path.string());

    char preamble[10];
    in.read(preamble, 10);
    if (in.gcount() != 10) throw FormatError("npy: truncated preamble", static_cast<std::uint64_t>(in.gcount()));
    if (std::memcmp(preamble, kMagic, kMagicLen) != 0) throw FormatError("npy: bad magic", 0);
    if (preamble[6] != 1) throw FormatError("npy: unsupported version", 6);
    const std::size_t header_len = static_cast<unsigned char>(preamble[8]) |
                                   (static_cast<std::size_t>(static_cast<unsigned char>(preamble[9])) << 8);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::size_t>(in.gcount()) != header_len) throw FormatError("npy: truncated header", 10);

    std::string descr = header_value(header, "descr", 10);
    if (descr.find("'<f8'") == std::string::npos) throw FormatError("npy: only '<f8' is supported", 10);
    std::string fortran = header_value(header, "fortran_order", 10);
    if (fortran.find("False") == std::string::npos) throw FormatError("npy: fortran order not supported", 10);

    std::string shape_str = header_value(header, "shape", 10);
    auto open = shape_str.find('(');
    auto close = shape_str.find(')');
    if (open == std::string::npos || close == std::string::npos) throw FormatError("npy: malformed shape", 10);
    NpyArray arr;
    std::string inner = shape_str.substr(open + 1, close - open - 1);
    std::replace(inner.begin(), inner.end(), ',', ' ');
    std::istringstream dims(inner);
    std::size_t d;
    std::size_t count = 1;
    while (dims >> d) {
        arr.shape.push_back(d);
        count *= d;
    }

    arr.data.resize(count);
    in.read(reinterpret_cast<char*>(arr.data.data()), static_cast<std::streamsize>(count * sizeof(double)));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != count * sizeof(double)) throw FormatError("npy: truncated data", 10 + header_len + got);
    return arr;
}

Tensor read_npy_tensor(const std::filesystem::path& path) {
    NpyArray arr = read_npy(path);
    if (arr.shape.size() > 4) throw FormatError("npy: more than 4 dimensions", 10);
    std::vector<std::size_t> dims(4 - arr.shape.size(), 1);
    dims.insert(dims.end(), arr.shape.begin(), arr.shape.end());
    Shape s{static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
            static_cast<int>(dims[3])};
    return Tensor(s, std::move(arr.data));
}

void write_pgm(const std::filesystem::path& path, const Tensor& t, int index, int channel) {
    const Shape& s = t.shape();
    if (index < 0 || index >= s.n || channel < 0 || channel >= s.c) {
        throw std::invalid_argument("write_pgm: image/channel index out of range");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
    out << "P5\n" << s.w << ' ' << s.h << "\n255\n";
    for (int a = 0; a < s.h; ++a)
        for (int b = 0; b < s.w; ++b) {
            double v = std::clamp(t(index, channel, a, b), 0.0, 1.0);
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
}

}  // namespace tia
