#include "coordfit/nifti.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <zlib.h>

namespace coordfit {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t NIFTI_INTENT_VECTOR = 1007;

int bitpix_of(std::int16_t datatype) {
    switch (datatype) {
        case DT_UINT8: return 8;
        case DT_INT16: return 16;
        case DT_INT32: return 32;
        case DT_FLOAT32: return 32;
        default: return 0;
    }
}

// ---- little-endian field access with optional byte swap ----

template <typename T>
T get_at(const std::uint8_t* buf, std::size_t off, bool swap) {
    T v;
    std::memcpy(&v, buf + off, sizeof(T));
    if (swap && sizeof(T) > 1) {
        std::uint8_t* b = reinterpret_cast<std::uint8_t*>(&v);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    return v;
}

template <typename T>
void put_at(std::uint8_t* buf, std::size_t off, T v) {
    std::memcpy(buf + off, &v, sizeof(T));
}

// ---- raw file bytes, transparently gunzipped ----

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) {
        z_stream zs{};
        if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("inflateInit failed");
        std::vector<std::uint8_t> out(std::max<std::size_t>(bytes.size() * 4, 1 << 16));
        zs.next_in = bytes.data();
        zs.avail_in = uInt(bytes.size());
        std::size_t written = 0;
        int rc = Z_OK;
        while (rc != Z_STREAM_END) {
            if (written == out.size()) out.resize(out.size() * 2);
            zs.next_out = out.data() + written;
            zs.avail_out = uInt(out.size() - written);
            rc = inflate(&zs, Z_NO_FLUSH);
            written = out.size() - zs.avail_out;
            if (rc != Z_OK && rc != Z_STREAM_END) {
                inflateEnd(&zs);
                throw IoError("gzip decompression failed for '" + path + "'");
            }
        }
        inflateEnd(&zs);
        out.resize(written);
        return out;
    }
    return bytes;
}

// Deterministic gzip: fixed header (mtime 0, OS 3) and fixed level, so
// identical payloads produce identical files.
std::vector<std::uint8_t> gzip_bytes(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit failed");
    gz_header gh{};
    gh.time = 0;
    gh.os = 3;
    deflateSetHeader(&zs, &gh);
    std::vector<std::uint8_t> out(deflateBound(&zs, uLong(in.size())));
    zs.next_in = const_cast<std::uint8_t*>(in.data());
    zs.avail_in = uInt(in.size());
    zs.next_out = out.data();
    zs.avail_out = uInt(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
    out.resize(out.size() - zs.avail_out);
    return out;
}

void spit(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::vector<std::uint8_t> tmp;
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    const std::vector<std::uint8_t>& payload = gz ? (tmp = gzip_bytes(bytes)) : bytes;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
    if (!out) throw IoError("write failure on '" + path + "'");
}

// ---- header parse / build ----

struct Header {
    int dim[8] = {0, 1, 1, 1, 1, 1, 1, 1};
    std::int16_t datatype = 0;
    std::int16_t intent_code = 0;
    float intent_p1 = 0;
    double pixdim[8] = {1, 1, 1, 1, 0, 0, 0, 0};
    std::size_t vox_offset = kVoxOffset;
    double scl_slope = 0, scl_inter = 0;
    std::int16_t sform_code = 0;
    double srow[3][4] = {};
    bool swapped = false;
};

Header parse_header(const std::vector<std::uint8_t>& file, const std::string& path) {
    if (file.size() < kHeaderSize)
        throw TruncatedFile("'" + path + "': file shorter than the 348-byte header");
    const std::uint8_t* b = file.data();
    Header h;
    std::int32_t sizeof_hdr = get_at<std::int32_t>(b, 0, false);
    if (sizeof_hdr != kHeaderSize) {
        h.swapped = true;
        sizeof_hdr = get_at<std::int32_t>(b, 0, true);
        if (sizeof_hdr != kHeaderSize)
            throw BadMagic("'" + path + "': sizeof_hdr is not 348 in either byte order");
    }
    char magic[4];
    std::memcpy(magic, b + 344, 4);
    if (!(magic[0] == 'n' && magic[1] == '+' && magic[2] == '1' && magic[3] == '\0'))
        throw BadMagic("'" + path + "': magic field is not \"n+1\"");
    for (int i = 0; i < 8; ++i) h.dim[i] = get_at<std::int16_t>(b, 40 + 2 * i, h.swapped);
    h.intent_p1 = get_at<float>(b, 56, h.swapped);
    h.intent_code = get_at<std::int16_t>(b, 68, h.swapped);
    h.datatype = get_at<std::int16_t>(b, 70, h.swapped);
    for (int i = 0; i < 8; ++i) h.pixdim[i] = get_at<float>(b, 76 + 4 * i, h.swapped);
    const float vox_offset = get_at<float>(b, 108, h.swapped);
    if (vox_offset < float(kVoxOffset))
        throw TruncatedFile("'" + path + "': vox_offset below 352");
    h.vox_offset = std::size_t(vox_offset);
    h.scl_slope = get_at<float>(b, 112, h.swapped);
    h.scl_inter = get_at<float>(b, 116, h.swapped);
    h.sform_code = get_at<std::int16_t>(b, 254, h.swapped);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) h.srow[r][c] = get_at<float>(b, 280 + 16 * r + 4 * c, h.swapped);
    if (bitpix_of(h.datatype) == 0)
        throw UnsupportedDatatype("'" + path + "': datatype code " + std::to_string(h.datatype) +
                                  " (supported: 2, 4, 8, 16)");
    if (h.dim[0] < 1 || h.dim[0] > 7)
        throw DimensionMismatch("'" + path + "': dim[0] out of range");
    for (int i = 1; i <= h.dim[0]; ++i)
        if (h.dim[i] < 1) throw DimensionMismatch("'" + path + "': dim[" + std::to_string(i) + "] < 1");
    return h;
}

Grid grid_from_header(const Header& h) {
    Mat4 m = Mat4::Identity();
    if (h.sform_code > 0) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = h.srow[r][c];
    } else {
        // no sform: fall back to a diagonal pixdim affine
        for (int a = 0; a < 3; ++a) m(a, a) = h.pixdim[a + 1] > 0 ? h.pixdim[a + 1] : 1.0;
    }
    return make_grid({h.dim[1], h.dim[2], h.dim[3]}, m);
}

std::size_t payload_elements(const Header& h) {
    std::size_t n = 1;
    for (int i = 1; i <= h.dim[0]; ++i) n *= std::size_t(h.dim[i]);
    return n;
}

// Raw element -> double, scl applied by the caller where it applies.
std::vector<double> decode_raw(const std::vector<std::uint8_t>& file, const Header& h,
                               const std::string& path) {
    const std::size_t n = payload_elements(h);
    const std::size_t esz = std::size_t(bitpix_of(h.datatype)) / 8;
    if (file.size() < h.vox_offset + n * esz)
        throw TruncatedFile("'" + path + "': payload needs " + std::to_string(n * esz) +
                            " bytes past vox_offset");
    const std::uint8_t* p = file.data() + h.vox_offset;
    std::vector<double> out(n);
    switch (h.datatype) {
        case DT_UINT8:
            for (std::size_t i = 0; i < n; ++i) out[i] = double(p[i]);
            break;
        case DT_INT16:
            for (std::size_t i = 0; i < n; ++i)
                out[i] = double(get_at<std::int16_t>(p, 2 * i, h.swapped));
            break;
        case DT_INT32:
            for (std::size_t i = 0; i < n; ++i)
                out[i] = double(get_at<std::int32_t>(p, 4 * i, h.swapped));
            break;
        case DT_FLOAT32:
            for (std::size_t i = 0; i < n; ++i) out[i] = double(get_at<float>(p, 4 * i, h.swapped));
            break;
        default: break;  // unreachable, checked in parse_header
    }
    return out;
}

void require_3d(const Header& h, const std::string& path) {
    const bool ok = h.dim[0] == 3 || (h.dim[0] == 4 && h.dim[4] == 1);
    if (!ok)
        throw DimensionMismatch("'" + path + "': expected a 3-D volume, dim[0]=" +
                                std::to_string(h.dim[0]));
}

void require_vector(const Header& h, const std::string& path) {
    if (h.dim[0] != 5 || h.dim[4] != 1 || h.dim[5] != 3)
        throw DimensionMismatch("'" + path +
                                "': expected a 5-D vector field with dim=(5,nx,ny,nz,1,3)");
}

// ---- header construction (writing) ----

std::vector<std::uint8_t> build_header(const Grid& grid, std::int16_t datatype, int ndim,
                                       std::int16_t intent_code, float intent_p1) {
    std::vector<std::uint8_t> buf(kVoxOffset, 0);
    std::uint8_t* b = buf.data();
    put_at<std::int32_t>(b, 0, kHeaderSize);
    b[38] = 'r';  // regular
    std::int16_t dim[8] = {std::int16_t(ndim), std::int16_t(grid.dims[0]),
                           std::int16_t(grid.dims[1]), std::int16_t(grid.dims[2]), 1, 1, 1, 1};
    if (ndim == 5) dim[5] = 3;
    for (int i = 0; i < 8; ++i) put_at<std::int16_t>(b, 40 + 2 * i, dim[i]);
    put_at<float>(b, 56, intent_p1);
    put_at<std::int16_t>(b, 68, intent_code);
    put_at<std::int16_t>(b, 70, datatype);
    put_at<std::int16_t>(b, 72, std::int16_t(bitpix_of(datatype)));
    // Quantize the affine first and derive pixdim from the quantized columns,
    // so a read-back then re-write reproduces the header byte for byte.
    float srow[3][4];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) srow[r][c] = float(grid.voxel_to_world(r, c));
    float pixdim[8] = {1, 1, 1, 1, 0, 0, 0, 0};
    for (int a = 0; a < 3; ++a) {
        const double nx = double(srow[0][a]), ny = double(srow[1][a]), nz = double(srow[2][a]);
        pixdim[a + 1] = float(std::sqrt(nx * nx + ny * ny + nz * nz));
    }
    for (int i = 0; i < 8; ++i) put_at<float>(b, 76 + 4 * i, pixdim[i]);
    put_at<float>(b, 108, float(kVoxOffset));
    put_at<float>(b, 112, 1.0f);  // scl_slope
    put_at<float>(b, 116, 0.0f);  // scl_inter
    b[123] = 2;                   // xyzt_units: mm
    const char descrip[] = "coordfit";
    std::memcpy(b + 148, descrip, sizeof(descrip));
    put_at<std::int16_t>(b, 252, 0);  // qform_code
    put_at<std::int16_t>(b, 254, 1);  // sform_code
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) put_at<float>(b, 280 + 16 * r + 4 * c, srow[r][c]);
    const char magic[4] = {'n', '+', '1', '\0'};
    std::memcpy(b + 344, magic, 4);
    return buf;
}

void append_f32(std::vector<std::uint8_t>& buf, double v) {
    const float f = float(v);
    const std::size_t off = buf.size();
    buf.resize(off + 4);
    put_at<float>(buf.data(), off, f);
}

void append_i32(std::vector<std::uint8_t>& buf, std::int32_t v) {
    const std::size_t off = buf.size();
    buf.resize(off + 4);
    put_at<std::int32_t>(buf.data(), off, v);
}

const Vec3& vec_of(const CoordField& f, std::size_t v) { return f.coords[v]; }
const Vec3& vec_of(const DisplacementField& f, std::size_t v) { return f.disp[v]; }
const Vec3& vec_of(const SvfField& f, std::size_t v) { return f.velocity[v]; }

template <typename VecField>
void write_vector_file(const VecField& f, const std::string& path, float intent_p1) {
    validate_grid(f.grid);
    std::vector<std::uint8_t> buf =
        build_header(f.grid, DT_FLOAT32, 5, NIFTI_INTENT_VECTOR, intent_p1);
    const std::size_t nvox = f.grid.nvox();
    buf.reserve(buf.size() + nvox * 12);
    for (int c = 0; c < 3; ++c)  // component axis last = slowest on disk
        for (std::size_t v = 0; v < nvox; ++v) append_f32(buf, vec_of(f, v)[c]);
    spit(path, buf);
}

std::pair<Grid, std::vector<Vec3>> read_vector_file(const std::string& path, float* intent_p1) {
    const auto file = slurp(path);
    const Header h = parse_header(file, path);
    require_vector(h, path);
    const Grid grid = grid_from_header(h);
    const std::vector<double> raw = decode_raw(file, h, path);
    const std::size_t nvox = grid.nvox();
    std::vector<Vec3> vecs(nvox);
    for (int c = 0; c < 3; ++c)
        for (std::size_t v = 0; v < nvox; ++v) vecs[v][c] = raw[c * nvox + v];
    if (intent_p1) *intent_p1 = h.intent_p1;
    return {grid, std::move(vecs)};
}

} // namespace

ScalarVolume read_scalar_volume(const std::string& path) {
    const auto file = slurp(path);
    const Header h = parse_header(file, path);
    require_3d(h, path);
    ScalarVolume vol;
    vol.grid = grid_from_header(h);
    vol.values = decode_raw(file, h, path);
    if (h.scl_slope != 0.0 && !(h.scl_slope == 1.0 && h.scl_inter == 0.0))
        for (double& v : vol.values) v = h.scl_slope * v + h.scl_inter;
    return vol;
}

LabelVolume read_label_volume(const std::string& path) {
    const auto file = slurp(path);
    const Header h = parse_header(file, path);
    require_3d(h, path);
    LabelVolume vol;
    vol.grid = grid_from_header(h);
    const std::vector<double> raw = decode_raw(file, h, path);
    vol.labels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = raw[i];
        if (v < 0 || v > 65535.0)
            throw InvalidArgument("'" + path + "': label value " + std::to_string(v) +
                                  " outside 16-bit range");
        vol.labels[i] = std::int32_t(v);
    }
    return vol;
}

Mask read_mask(const std::string& path) {
    const auto file = slurp(path);
    const Header h = parse_header(file, path);
    require_3d(h, path);
    Mask m;
    m.grid = grid_from_header(h);
    const std::vector<double> raw = decode_raw(file, h, path);
    m.flags.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) m.flags[i] = raw[i] != 0.0 ? 1 : 0;
    return m;
}

void write_volume(const ScalarVolume& vol, const std::string& path) {
    validate_grid(vol.grid);
    if (vol.values.size() != vol.grid.nvox())
        throw InvalidArgument("write_volume: value count does not match grid dims");
    std::vector<std::uint8_t> buf = build_header(vol.grid, DT_FLOAT32, 3, 0, 0);
    buf.reserve(buf.size() + vol.values.size() * 4);
    for (double v : vol.values) append_f32(buf, v);
    spit(path, buf);
}

void write_volume(const LabelVolume& vol, const std::string& path) {
    validate_grid(vol.grid);
    if (vol.labels.size() != vol.grid.nvox())
        throw InvalidArgument("write_volume: label count does not match grid dims");
    std::vector<std::uint8_t> buf = build_header(vol.grid, DT_INT32, 3, 0, 0);
    buf.reserve(buf.size() + vol.labels.size() * 4);
    for (std::int32_t v : vol.labels) {
        if (v < 0 || v > 65535) throw InvalidArgument("write_volume: label outside 16-bit range");
        append_i32(buf, v);
    }
    spit(path, buf);
}

void write_volume(const Mask& mask, const std::string& path) {
    validate_grid(mask.grid);
    if (mask.flags.size() != mask.grid.nvox())
        throw InvalidArgument("write_volume: flag count does not match grid dims");
    std::vector<std::uint8_t> buf = build_header(mask.grid, DT_UINT8, 3, 0, 0);
    buf.reserve(buf.size() + mask.flags.size());
    for (auto f : mask.flags) buf.push_back(f ? 1 : 0);
    spit(path, buf);
}

CoordField read_coord_field(const std::string& path) {
    CoordField cf;
    auto [grid, vecs] = read_vector_file(path, nullptr);
    cf.grid = grid;
    cf.coords = std::move(vecs);
    return cf;
}

void write_coord_field(const CoordField& cf, const std::string& path) {
    if (cf.coords.size() != cf.grid.nvox())
        throw InvalidArgument("write_coord_field: coord count does not match grid dims");
    write_vector_file(cf, path, 0.0f);
}

DisplacementField read_displacement_field(const std::string& path) {
    DisplacementField df;
    auto [grid, vecs] = read_vector_file(path, nullptr);
    df.grid = grid;
    df.disp = std::move(vecs);
    return df;
}

void write_displacement_field(const DisplacementField& df, const std::string& path) {
    if (df.disp.size() != df.grid.nvox())
        throw InvalidArgument("write_displacement_field: count does not match grid dims");
    write_vector_file(df, path, 0.0f);
}

SvfField read_svf_field(const std::string& path) {
    SvfField svf;
    float p1 = 0;
    auto [grid, vecs] = read_vector_file(path, &p1);
    svf.grid = grid;
    svf.velocity = std::move(vecs);
    svf.n_steps = p1 >= 1.0f ? int(p1) : 1;
    return svf;
}

void write_svf_field(const SvfField& svf, const std::string& path) {
    if (svf.velocity.size() != svf.grid.nvox())
        throw InvalidArgument("write_svf_field: count does not match grid dims");
    write_vector_file(svf, path, float(svf.n_steps));
}

} // namespace coordfit
