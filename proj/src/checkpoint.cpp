#include "v2v3d/nn/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

#include "v2v3d/errors.hpp"
#include "v2v3d/io.hpp"

namespace v2v3d::nn {

namespace {
constexpr char kMagic[8] = {'V', '2', 'V', '3', 'C', 'K', 'P', 'T'};
}

void write_checkpoint(const std::string& path, const std::vector<NamedArray>& arrays) {
    using namespace io_detail;
    std::unordered_set<std::string> names;
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, static_cast<std::uint32_t>(arrays.size()));
    for (const NamedArray& a : arrays) {
        if (a.name.empty()) throw DataError("checkpoint: empty array name");
        if (!names.insert(a.name).second)
            throw DataError("checkpoint: duplicate array name '" + a.name + "'");
        std::size_t expect = 1;
        for (const std::uint32_t d : a.dims) {
            if (d == 0) throw DataError("checkpoint: zero dim on '" + a.name + "'");
            expect *= d;
        }
        if (expect != a.data.size())
            throw DataError("checkpoint: dims of '" + a.name + "' describe " + std::to_string(expect) +
                            " values, have " + std::to_string(a.data.size()));
        put_u32(out, static_cast<std::uint32_t>(a.name.size()));
        out.insert(out.end(), a.name.begin(), a.name.end());
        put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
        for (const std::uint32_t d : a.dims) put_u32(out, d);
        for (const float v : a.data) {
            if (std::isnan(v)) throw DataError("checkpoint: NaN in '" + a.name + "'");
            put_f32(out, v);
        }
    }
    write_file(path, out);
}

std::vector<NamedArray> read_checkpoint(const std::string& path) {
    using namespace io_detail;
    const std::vector<std::uint8_t> bytes = read_file(path);
    std::size_t pos = 0;
    const auto need = [&](std::size_t n) {
        if (bytes.size() - pos < n) throw LengthError(path + ": truncated checkpoint");
    };
    need(8);
    if (std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw FormatError(path + ": bad magic, expected V2V3CKPT");
    pos = 8;
    need(4);
    const std::uint32_t count = get_u32(bytes.data() + pos);
    pos += 4;
    std::vector<NamedArray> arrays;
    arrays.reserve(count);
    std::unordered_set<std::string> names;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        need(4);
        const std::uint32_t name_len = get_u32(bytes.data() + pos);
        pos += 4;
        need(name_len);
        a.name.assign(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
        pos += name_len;
        if (a.name.empty()) throw DataError(path + ": empty array name");
        if (!names.insert(a.name).second)
            throw DataError(path + ": duplicate array name '" + a.name + "'");
        need(4);
        const std::uint32_t ndims = get_u32(bytes.data() + pos);
        pos += 4;
        need(4 * static_cast<std::size_t>(ndims));
        std::size_t numel = 1;
        for (std::uint32_t di = 0; di < ndims; ++di) {
            const std::uint32_t d = get_u32(bytes.data() + pos);
            pos += 4;
            if (d == 0) throw DataError(path + ": zero dim on '" + a.name + "'");
            a.dims.push_back(d);
            numel *= d;
        }
        need(4 * numel);
        a.data.resize(numel);
        for (std::size_t vi = 0; vi < numel; ++vi) {
            a.data[vi] = get_f32(bytes.data() + pos);
            pos += 4;
            if (std::isnan(a.data[vi])) throw DataError(path + ": NaN in '" + a.name + "'");
        }
        arrays.push_back(std::move(a));
    }
    if (pos != bytes.size()) throw LengthError(path + ": trailing bytes after checkpoint payload");
    return arrays;
}

} // namespace v2v3d::nn
