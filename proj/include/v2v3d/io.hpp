#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2v3d/types.hpp"

namespace v2v3d {

// Binary file formats. All three share one envelope: an 8-byte magic, a
// header of 32-bit unsigned little-endian dimensions, and the payload as
// 32-bit IEEE-754 little-endian floats in the in-memory layout of the type.
// Round trips are bit-exact.
//
//   volume      magic "V2V3VOL1", header nx, ny, nz
//   light field magic "V2V3LF_1", header nu, nx, ny
//   psf stack   magic "V2V3PSF1", header nu, k, nz
//
// Reading rejects: wrong magic (FormatError), payload size mismatch
// (LengthError), NaN in the payload (DataError).

void write_volume(const std::string& path, const Volume& v);
Volume read_volume(const std::string& path);

void write_lightfield(const std::string& path, const LightField& lf);
LightField read_lightfield(const std::string& path);

void write_psf(const std::string& path, const PsfStack& p);
PsfStack read_psf(const std::string& path);

namespace io_detail {

// Little-endian primitives shared with the checkpoint format.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

// Envelope helpers: header_dims are written after the magic; payload floats
// follow. Checks sizes and NaN on decode.
std::vector<std::uint8_t> encode(const char magic[8], const std::vector<std::uint32_t>& header_dims,
                                 const std::vector<float>& payload);
void decode(const std::string& path, const std::vector<std::uint8_t>& bytes, const char magic[8],
            std::size_t n_dims, std::vector<std::uint32_t>& header_dims, std::vector<float>& payload);

} // namespace io_detail

} // namespace v2v3d
