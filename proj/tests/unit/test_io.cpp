#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "v2v3d/errors.hpp"
#include "v2v3d/io.hpp"
#include "v2v3d/nn/checkpoint.hpp"
#include "v2v3d/rng.hpp"

using namespace v2v3d;

namespace {

std::string tmp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "v2v3d_io_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::vector<std::uint8_t> file_bytes(const std::string& path) { return io_detail::read_file(path); }

} // namespace

TEST_SUITE("io") {

TEST_CASE("volume round trip, zeros") {
    Volume v(2, 2, 2);
    const std::string path = tmp_file("zeros.vol");
    write_volume(path, v);
    const Volume r = read_volume(path);
    CHECK(r.nx == 2);
    CHECK(r.ny == 2);
    CHECK(r.nz == 2);
    CHECK(r.data == v.data);
}

TEST_CASE("bad magic is a format error") {
    const std::string path = tmp_file("badmagic.vol");
    std::vector<std::uint8_t> bytes(8 + 12 + 4, 0);
    std::memcpy(bytes.data(), "XXXXXXXX", 8);
    io_detail::write_file(path, bytes);
    CHECK_THROWS_AS(read_volume(path), FormatError);
}

TEST_CASE("random volumes round-trip bit-exactly") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Volume v(static_cast<int>(rng.uniform_int(1, 7)), static_cast<int>(rng.uniform_int(1, 7)),
                 static_cast<int>(rng.uniform_int(1, 5)));
        for (float& x : v.data) x = static_cast<float>(rng.uniform());
        const std::string path = tmp_file("rt.vol");
        write_volume(path, v);
        const Volume r = read_volume(path);
        REQUIRE(r.data.size() == v.data.size());
        // bit-compare, not epsilon-compare
        CHECK(std::memcmp(r.data.data(), v.data.data(), v.data.size() * sizeof(float)) == 0);
        // rewriting the read-back value reproduces the same file bytes
        const std::string path2 = tmp_file("rt2.vol");
        write_volume(path2, r);
        CHECK(file_bytes(path) == file_bytes(path2));
    }
}

TEST_CASE("light field and psf round trips") {
    Rng rng(12);
    LightField lf(3, 4, 5);
    for (float& x : lf.data) x = static_cast<float>(rng.uniform());
    const std::string lfp = tmp_file("rt.lf");
    write_lightfield(lfp, lf);
    const LightField lr = read_lightfield(lfp);
    CHECK(lr.nu == 3);
    CHECK(lr.nx == 4);
    CHECK(lr.ny == 5);
    CHECK(std::memcmp(lr.data.data(), lf.data.data(), lf.data.size() * sizeof(float)) == 0);

    PsfStack p(2, 3, 4);
    for (float& x : p.data) x = static_cast<float>(rng.uniform(0.1, 1.0));
    const std::string pp = tmp_file("rt.psf");
    write_psf(pp, p);
    const PsfStack pr = read_psf(pp);
    CHECK(pr.nu == 2);
    CHECK(pr.k == 3);
    CHECK(pr.nz == 4);
    CHECK(std::memcmp(pr.data.data(), p.data.data(), p.data.size() * sizeof(float)) == 0);
    CHECK(!pr.normalized); // random slices do not sum to 1
}

TEST_CASE("psf normalized flag is re-derived on read") {
    PsfStack p(2, 3, 2);
    for (int u = 0; u < p.nu; ++u)
        for (int z = 0; z < p.nz; ++z) {
            float* s = p.data.data() + p.slice_offset(u, z);
            for (int i = 0; i < 9; ++i) s[i] = 1.0f / 9.0f;
        }
    const std::string path = tmp_file("norm.psf");
    write_psf(path, p);
    CHECK(read_psf(path).normalized);
}

TEST_CASE("layout contract via hand-built bytes") {
    // index(x,y,z) = x + nx*(y + ny*z)
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'V', '2', 'V', '3', 'V', 'O', 'L', '1'});
    io_detail::put_u32(bytes, 2); // nx
    io_detail::put_u32(bytes, 2); // ny
    io_detail::put_u32(bytes, 2); // nz
    for (int i = 0; i < 8; ++i) io_detail::put_f32(bytes, static_cast<float>(i));
    const std::string path = tmp_file("layout.vol");
    io_detail::write_file(path, bytes);
    Volume v = read_volume(path);
    CHECK(v.at(1, 0, 0) == 1.0f);
    CHECK(v.at(0, 1, 0) == 2.0f);
    CHECK(v.at(1, 1, 0) == 3.0f);
    CHECK(v.at(0, 0, 1) == 4.0f);
    CHECK(v.at(1, 1, 1) == 7.0f);

    std::vector<std::uint8_t> lf_bytes;
    lf_bytes.insert(lf_bytes.end(), {'V', '2', 'V', '3', 'L', 'F', '_', '1'});
    io_detail::put_u32(lf_bytes, 2); // nu
    io_detail::put_u32(lf_bytes, 2); // nx
    io_detail::put_u32(lf_bytes, 1); // ny
    for (int i = 0; i < 4; ++i) io_detail::put_f32(lf_bytes, static_cast<float>(10 + i));
    const std::string lfp = tmp_file("layout.lf");
    io_detail::write_file(lfp, lf_bytes);
    LightField lf = read_lightfield(lfp);
    CHECK(lf.at(0, 1, 0) == 11.0f);
    CHECK(lf.at(1, 0, 0) == 12.0f);
}

TEST_CASE("truncated and oversized payloads are length errors") {
    Volume v(3, 3, 1);
    const std::string path = tmp_file("trunc.vol");
    write_volume(path, v);
    auto bytes = file_bytes(path);

    auto shorter = bytes;
    shorter.resize(shorter.size() - 4);
    io_detail::write_file(path, shorter);
    CHECK_THROWS_AS(read_volume(path), LengthError);

    auto longer = bytes;
    io_detail::put_f32(longer, 1.0f);
    io_detail::write_file(path, longer);
    CHECK_THROWS_AS(read_volume(path), LengthError);

    auto header_only = bytes;
    header_only.resize(10);
    io_detail::write_file(path, header_only);
    CHECK_THROWS_AS(read_volume(path), LengthError);
}

TEST_CASE("NaN payload is a data error") {
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'V', '2', 'V', '3', 'V', 'O', 'L', '1'});
    io_detail::put_u32(bytes, 1);
    io_detail::put_u32(bytes, 1);
    io_detail::put_u32(bytes, 1);
    io_detail::put_f32(bytes, std::numeric_limits<float>::quiet_NaN());
    const std::string path = tmp_file("nan.vol");
    io_detail::write_file(path, bytes);
    CHECK_THROWS_AS(read_volume(path), DataError);
}

TEST_CASE("zero dimension is a data error") {
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'V', '2', 'V', '3', 'V', 'O', 'L', '1'});
    io_detail::put_u32(bytes, 0);
    io_detail::put_u32(bytes, 2);
    io_detail::put_u32(bytes, 2);
    const std::string path = tmp_file("dim0.vol");
    io_detail::write_file(path, bytes);
    CHECK_THROWS_AS(read_volume(path), DataError);
}

TEST_CASE("psf with even k is rejected") {
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'V', '2', 'V', '3', 'P', 'S', 'F', '1'});
    io_detail::put_u32(bytes, 1); // nu
    io_detail::put_u32(bytes, 4); // k (even)
    io_detail::put_u32(bytes, 1); // nz
    for (int i = 0; i < 16; ++i) io_detail::put_f32(bytes, 1.0f);
    const std::string path = tmp_file("evenk.psf");
    io_detail::write_file(path, bytes);
    CHECK_THROWS_AS(read_psf(path), DataError);
}

TEST_CASE("missing file") {
    CHECK_THROWS_AS(read_volume(tmp_file("does_not_exist.vol")), Error);
}

TEST_CASE("checkpoint round trip preserves order and bits") {
    Rng rng(13);
    std::vector<nn::NamedArray> arrays;
    arrays.push_back({"b.second", {3}, {1.5f, -2.0f, 0.25f}});
    nn::NamedArray big;
    big.name = "a.first";
    big.dims = {2, 3};
    for (int i = 0; i < 6; ++i) big.data.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
    arrays.insert(arrays.begin(), big);
    const std::string path = tmp_file("w.ckpt");
    nn::write_checkpoint(path, arrays);
    const auto r = nn::read_checkpoint(path);
    REQUIRE(r.size() == 2);
    CHECK(r[0].name == "a.first"); // order preserved, not sorted
    CHECK(r[1].name == "b.second");
    CHECK(r[0].dims == std::vector<std::uint32_t>{2, 3});
    CHECK(std::memcmp(r[0].data.data(), arrays[0].data.data(), 6 * sizeof(float)) == 0);

    // second write of the read-back state is byte-identical
    const std::string path2 = tmp_file("w2.ckpt");
    nn::write_checkpoint(path2, r);
    CHECK(file_bytes(path) == file_bytes(path2));
}

TEST_CASE("checkpoint rejects duplicates and truncation") {
    CHECK_THROWS_AS(nn::write_checkpoint(tmp_file("dup.ckpt"),
                                         {{"x", {1}, {1.0f}}, {"x", {1}, {2.0f}}}),
                    DataError);
    const std::string path = tmp_file("t.ckpt");
    nn::write_checkpoint(path, {{"x", {2}, {1.0f, 2.0f}}});
    auto bytes = file_bytes(path);
    bytes.resize(bytes.size() - 2);
    io_detail::write_file(path, bytes);
    CHECK_THROWS_AS(nn::read_checkpoint(path), LengthError);
}

} // TEST_SUITE
