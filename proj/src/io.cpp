#include "v2v3d/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace v2v3d {
namespace io_detail {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
    if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) throw FormatError("cannot read file: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("cannot write file: " + path);
}

std::vector<std::uint8_t> encode(const char magic[8], const std::vector<std::uint32_t>& header_dims,
                                 const std::vector<float>& payload) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + 4 * header_dims.size() + 4 * payload.size());
    out.insert(out.end(), magic, magic + 8);
    for (std::uint32_t d : header_dims) put_u32(out, d);
    for (float f : payload) put_f32(out, f);
    return out;
}

void decode_header(const std::string& path, const std::vector<std::uint8_t>& bytes,
                   const char magic[8], std::size_t n_dims, std::vector<std::uint32_t>& header_dims) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 8) != 0) {
        throw FormatError("bad magic in " + path + " (expected " + std::string(magic, 8) + ")");
    }
    const std::size_t header_bytes = 8 + 4 * n_dims;
    if (bytes.size() < header_bytes) throw LengthError("truncated header in " + path);

    header_dims.resize(n_dims);
    for (std::size_t i = 0; i < n_dims; ++i) {
        header_dims[i] = get_u32(bytes.data() + 8 + 4 * i);
        if (header_dims[i] == 0) throw DataError("zero dimension in " + path);
    }
}

void decode_payload(const std::string& path, const std::vector<std::uint8_t>& bytes,
                    std::size_t n_dims, std::uint64_t count, std::vector<float>& payload) {
    const std::size_t header_bytes = 8 + 4 * n_dims;
    const std::uint64_t expected = header_bytes + 4 * count;
    if (bytes.size() != expected) {
        throw LengthError("payload length mismatch in " + path + ": have " + std::to_string(bytes.size()) +
                          " bytes, header implies " + std::to_string(expected));
    }

    payload.resize(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < payload.size(); ++i) {
        payload[i] = get_f32(bytes.data() + header_bytes + 4 * i);
        if (std::isnan(payload[i])) throw DataError("NaN in payload of " + path);
    }
}

// Element count = product of the header dims (volume and light field).
void decode(const std::string& path, const std::vector<std::uint8_t>& bytes, const char magic[8],
            std::size_t n_dims, std::vector<std::uint32_t>& header_dims, std::vector<float>& payload) {
    decode_header(path, bytes, magic, n_dims, header_dims);
    std::uint64_t count = 1;
    for (const std::uint32_t d : header_dims) count *= d;
    decode_payload(path, bytes, n_dims, count, payload);
}

} // namespace io_detail

using namespace io_detail;

static constexpr char kVolMagic[8] = {'V', '2', 'V', '3', 'V', 'O', 'L', '1'};
static constexpr char kLfMagic[8] = {'V', '2', 'V', '3', 'L', 'F', '_', '1'};
static constexpr char kPsfMagic[8] = {'V', '2', 'V', '3', 'P', 'S', 'F', '1'};

void write_volume(const std::string& path, const Volume& v) {
    write_file(path, encode(kVolMagic,
                            {static_cast<std::uint32_t>(v.nx), static_cast<std::uint32_t>(v.ny),
                             static_cast<std::uint32_t>(v.nz)},
                            v.data));
}

Volume read_volume(const std::string& path) {
    const auto bytes = read_file(path);
    std::vector<std::uint32_t> dims;
    Volume v;
    decode(path, bytes, kVolMagic, 3, dims, v.data);
    v.nx = static_cast<int>(dims[0]);
    v.ny = static_cast<int>(dims[1]);
    v.nz = static_cast<int>(dims[2]);
    return v;
}

void write_lightfield(const std::string& path, const LightField& lf) {
    write_file(path, encode(kLfMagic,
                            {static_cast<std::uint32_t>(lf.nu), static_cast<std::uint32_t>(lf.nx),
                             static_cast<std::uint32_t>(lf.ny)},
                            lf.data));
}

LightField read_lightfield(const std::string& path) {
    const auto bytes = read_file(path);
    std::vector<std::uint32_t> dims;
    LightField lf;
    decode(path, bytes, kLfMagic, 3, dims, lf.data);
    lf.nu = static_cast<int>(dims[0]);
    lf.nx = static_cast<int>(dims[1]);
    lf.ny = static_cast<int>(dims[2]);
    return lf;
}

void write_psf(const std::string& path, const PsfStack& p) {
    write_file(path, encode(kPsfMagic,
                            {static_cast<std::uint32_t>(p.nu), static_cast<std::uint32_t>(p.k),
                             static_cast<std::uint32_t>(p.nz)},
                            p.data));
}

PsfStack read_psf(const std::string& path) {
    const auto bytes = read_file(path);
    std::vector<std::uint32_t> dims;
    PsfStack p;
    decode_header(path, bytes, kPsfMagic, 3, dims);
    p.nu = static_cast<int>(dims[0]);
    p.k = static_cast<int>(dims[1]);
    p.nz = static_cast<int>(dims[2]);
    if (p.k % 2 == 0) throw DataError("even kernel size in " + path);
    // payload holds one k*k kernel per (view, depth) pair
    decode_payload(path, bytes, 3, static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[1] * dims[2],
                   p.data);
    // The normalized flag is not persisted; re-derive it.
    p.normalized = true;
    for (int u = 0; u < p.nu; ++u) {
        for (int z = 0; z < p.nz; ++z) {
            const float* s = p.slice(u, z);
            double sum = 0.0;
            for (int i = 0; i < p.k * p.k; ++i) sum += s[i];
            if (sum <= 0.0) throw DataError("zero-sum PSF slice (u=" + std::to_string(u) + ", z=" + std::to_string(z) + ") in " + path);
            if (std::abs(sum - 1.0) > 1e-6) p.normalized = false;
        }
    }
    return p;
}

} // namespace v2v3d
