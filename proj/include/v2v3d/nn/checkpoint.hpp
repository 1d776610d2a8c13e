#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace v2v3d::nn {

struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

// Binary checkpoint, same envelope family as the volume/LF/PSF files:
//   magic "V2V3CKPT" | u32 count | count entries of
//   (u32 name_len | name | u32 ndims | ndims x u32 | f32 payload),
// all little endian. Array order is preserved; names must be unique.
void write_checkpoint(const std::string& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::string& path);

} // namespace v2v3d::nn
