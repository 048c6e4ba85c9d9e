#include "rollalign/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "rollalign/errors.hpp"

namespace rollalign::npy {

static_assert(std::endian::native == std::endian::little,
              "NPY I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_tuple(std::span<const std::size_t> shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) out += ",";
        if (i + 1 < shape.size()) out += " ";
    }
    return out + ")";
}

std::size_t element_count(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void write_raw(const std::filesystem::path& path, const char* descr, const void* data,
               std::size_t bytes, std::span<const std::size_t> shape) {
    std::string header = std::string("{'descr': '") + descr +
                         "', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
    // Magic (6) + version (2) + header length (2) + header, padded with spaces and a trailing
    // newline to a multiple of 64 bytes.
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header += '\n';
    if (header.size() > 0xFFFF) throw InvalidArgument("NPY header too long");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, 6);
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xFF), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw InvalidArgument("failed writing '" + path.string() + "'");
}

struct Header {
    std::string descr;
    std::vector<std::size_t> shape;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0)
        throw ProtocolMismatch("'" + path.string() + "' is not an NPY file");
    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    std::size_t header_len = 0;
    if (version[0] == 1) {
        unsigned char len[2];
        in.read(reinterpret_cast<char*>(len), 2);
        header_len = len[0] | (static_cast<std::size_t>(len[1]) << 8);
    } else if (version[0] == 2 || version[0] == 3) {
        unsigned char len[4];
        in.read(reinterpret_cast<char*>(len), 4);
        header_len = len[0] | (static_cast<std::size_t>(len[1]) << 8) |
                     (static_cast<std::size_t>(len[2]) << 16) |
                     (static_cast<std::size_t>(len[3]) << 24);
    } else {
        throw ProtocolMismatch("unsupported NPY version in '" + path.string() + "'");
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ProtocolMismatch("truncated NPY header in '" + path.string() + "'");

    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    Header h;
    if (!std::regex_search(header, m, descr_re))
        throw ProtocolMismatch("NPY header lacks descr in '" + path.string() + "'");
    h.descr = m[1];
    if (!std::regex_search(header, m, order_re) || m[1] == "True")
        throw ProtocolMismatch("only C-order NPY arrays are supported ('" + path.string() + "')");
    if (!std::regex_search(header, m, shape_re))
        throw ProtocolMismatch("NPY header lacks shape in '" + path.string() + "'");
    std::stringstream dims(m[1].str());
    std::string item;
    while (std::getline(dims, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        h.shape.push_back(static_cast<std::size_t>(std::stoull(item.substr(first))));
    }
    return h;
}

template <typename T>
Array<T> read_typed(const std::filesystem::path& path, const char* descr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProtocolMismatch("cannot open '" + path.string() + "'");
    const Header h = read_header(in, path);
    if (h.descr != descr)
        throw ProtocolMismatch("'" + path.string() + "' has dtype " + h.descr + ", expected " +
                               descr);
    Array<T> out;
    out.shape = h.shape;
    out.data.resize(element_count(h.shape));
    in.read(reinterpret_cast<char*>(out.data.data()),
            static_cast<std::streamsize>(out.data.size() * sizeof(T)));
    if (!in) throw ProtocolMismatch("truncated NPY payload in '" + path.string() + "'");
    return out;
}

}  // namespace

void write(const std::filesystem::path& path, std::span<const float> data,
           std::span<const std::size_t> shape) {
    if (element_count(shape) != data.size())
        throw InvalidArgument("NPY shape does not match the data size");
    write_raw(path, "<f4", data.data(), data.size_bytes(), shape);
}

void write(const std::filesystem::path& path, std::span<const std::uint8_t> data,
           std::span<const std::size_t> shape) {
    if (element_count(shape) != data.size())
        throw InvalidArgument("NPY shape does not match the data size");
    write_raw(path, "|u1", data.data(), data.size_bytes(), shape);
}

Array<float> read_f32(const std::filesystem::path& path) { return read_typed<float>(path, "<f4"); }

Array<std::uint8_t> read_u8(const std::filesystem::path& path) {
    return read_typed<std::uint8_t>(path, "|u1");
}

}  // namespace rollalign::npy
