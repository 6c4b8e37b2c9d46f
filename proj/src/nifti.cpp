#include "cardiofeat/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

namespace cardiofeat {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1;
    float intent_p2;
    float intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max;
    float cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax;
    std::int32_t glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b;
    float quatern_c;
    float quatern_d;
    float qoffset_x;
    float qoffset_y;
    float qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUInt8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;

struct GzCloser {
    void operator()(gzFile f) const {
        if (f) gzclose(f);
    }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

bool has_gz_suffix(const std::filesystem::path &p) { return p.extension() == ".gz"; }

struct RawImage {
    Nifti1Header header{};
    std::vector<char> bytes;
};

void read_exact(gzFile f, void *dst, std::size_t n, const std::filesystem::path &path) {
    auto *out = static_cast<char *>(dst);
    while (n > 0) {
        const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
        const int got = gzread(f, out, chunk);
        if (got <= 0) {
            throw Error(ErrorCode::IoError, "truncated NIfTI file " + path.string());
        }
        out += got;
        n -= static_cast<std::size_t>(got);
    }
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
    switch (datatype) {
    case kDtUInt8: return 1;
    case kDtInt16: return 2;
    case kDtInt32: return 4;
    case kDtFloat32: return 4;
    case kDtFloat64: return 8;
    default:
        throw Error(ErrorCode::UnsupportedDatatype, "NIfTI datatype code " + std::to_string(datatype));
    }
}

// Spacing and origin from the header; affines must be axis-aligned.
void decode_affine(const Nifti1Header &h, Geometry &g) {
    double m[3][4] = {};
    if (h.sform_code > 0) {
        for (int c = 0; c < 4; ++c) {
            m[0][c] = h.srow_x[c];
            m[1][c] = h.srow_y[c];
            m[2][c] = h.srow_z[c];
        }
    } else if (h.qform_code > 0) {
        const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
        const double r[3][3] = {{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                                {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
                                {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
        const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
        const double s[3] = {h.pixdim[1], h.pixdim[2], h.pixdim[3] * qfac};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m[i][j] = r[i][j] * s[j];
            }
        }
        m[0][3] = h.qoffset_x;
        m[1][3] = h.qoffset_y;
        m[2][3] = h.qoffset_z;
    } else {
        for (int i = 0; i < 3; ++i) {
            m[i][i] = h.pixdim[i + 1];
        }
    }
    for (int i = 0; i < 3; ++i) {
        const double diag = std::abs(m[i][i]);
        for (int j = 0; j < 3; ++j) {
            if (i != j && std::abs(m[i][j]) > 1e-4 * std::max(diag, 1e-12)) {
                throw Error(ErrorCode::MalformedHeader, "non axis-aligned affine is not supported");
            }
        }
        g.spacing[i] = diag;
        g.origin[i] = m[i][3];
    }
}

RawImage read_raw(const std::filesystem::path &path) {
    GzHandle f(gzopen(path.string().c_str(), "rb"));
    if (!f) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    RawImage raw;
    if (gzread(f.get(), &raw.header, sizeof(Nifti1Header)) != static_cast<int>(sizeof(Nifti1Header))) {
        throw Error(ErrorCode::MalformedHeader, "short header in " + path.string());
    }
    const Nifti1Header &h = raw.header;
    if (h.sizeof_hdr != 348) {
        throw Error(ErrorCode::MalformedHeader, "sizeof_hdr != 348 (big-endian or not NIfTI-1): " + path.string());
    }
    if (std::memcmp(h.magic, "n+1", 4) != 0) {
        throw Error(ErrorCode::MalformedHeader, "bad magic in " + path.string());
    }
    if (h.dim[0] < 1 || h.dim[0] > 7) {
        throw Error(ErrorCode::MalformedHeader, "dim[0] out of range");
    }
    std::size_t n = 1;
    for (int i = 1; i <= h.dim[0]; ++i) {
        if (h.dim[i] <= 0) {
            throw Error(ErrorCode::MalformedHeader, "non-positive dim[" + std::to_string(i) + "]");
        }
        n *= static_cast<std::size_t>(h.dim[i]);
    }
    const std::size_t bpv = bytes_per_voxel(h.datatype);
    if (h.vox_offset < 348.0f) {
        throw Error(ErrorCode::MalformedHeader, "vox_offset < 348");
    }
    const auto skip = static_cast<std::size_t>(h.vox_offset) - sizeof(Nifti1Header);
    std::vector<char> ext(skip);
    if (skip > 0) {
        read_exact(f.get(), ext.data(), skip, path);
    }
    raw.bytes.resize(n * bpv);
    read_exact(f.get(), raw.bytes.data(), raw.bytes.size(), path);
    return raw;
}

Geometry geometry_of(const Nifti1Header &h) {
    Geometry g;
    for (int i = 0; i < 3; ++i) {
        g.dims[i] = i + 1 <= h.dim[0] ? h.dim[i + 1] : 1;
    }
    decode_affine(h, g);
    g.validate();
    return g;
}

std::vector<double> decode_values(const RawImage &raw) {
    const Nifti1Header &h = raw.header;
    const std::size_t bpv = bytes_per_voxel(h.datatype);
    const std::size_t n = raw.bytes.size() / bpv;
    std::vector<double> out(n);
    const char *p = raw.bytes.data();
    for (std::size_t i = 0; i < n; ++i, p += bpv) {
        switch (h.datatype) {
        case kDtUInt8: out[i] = static_cast<unsigned char>(*p); break;
        case kDtInt16: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            out[i] = v;
            break;
        }
        case kDtInt32: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            out[i] = v;
            break;
        }
        case kDtFloat32: {
            float v;
            std::memcpy(&v, p, 4);
            out[i] = v;
            break;
        }
        case kDtFloat64: std::memcpy(&out[i], p, 8); break;
        default: break;
        }
    }
    const double slope = h.scl_slope;
    const double inter = h.scl_inter;
    if (std::isfinite(slope) && slope != 0.0 && !(slope == 1.0 && inter == 0.0)) {
        for (double &v : out) {
            v = slope * v + inter;
        }
    }
    return out;
}

Nifti1Header make_header(const Geometry &g, int channels, std::int16_t datatype) {
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.dim[0] = channels > 1 ? 5 : 3;
    h.dim[1] = static_cast<std::int16_t>(g.dims[0]);
    h.dim[2] = static_cast<std::int16_t>(g.dims[1]);
    h.dim[3] = static_cast<std::int16_t>(g.dims[2]);
    h.dim[4] = 1;
    h.dim[5] = static_cast<std::int16_t>(channels);
    h.dim[6] = 1;
    h.dim[7] = 1;
    h.datatype = datatype;
    h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(datatype));
    h.pixdim[0] = 1.0f;
    for (int i = 0; i < 3; ++i) {
        h.pixdim[i + 1] = static_cast<float>(g.spacing[i]);
    }
    h.pixdim[4] = 1.0f;
    h.pixdim[5] = 1.0f;
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2;  // mm
    h.qform_code = 1;
    h.sform_code = 1;
    h.qoffset_x = static_cast<float>(g.origin[0]);
    h.qoffset_y = static_cast<float>(g.origin[1]);
    h.qoffset_z = static_cast<float>(g.origin[2]);
    h.srow_x[0] = static_cast<float>(g.spacing[0]);
    h.srow_y[1] = static_cast<float>(g.spacing[1]);
    h.srow_z[2] = static_cast<float>(g.spacing[2]);
    h.srow_x[3] = h.qoffset_x;
    h.srow_y[3] = h.qoffset_y;
    h.srow_z[3] = h.qoffset_z;
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

void write_file(const std::filesystem::path &path, const Nifti1Header &h, const std::vector<char> &payload) {
    const char extension[4] = {0, 0, 0, 0};
    if (has_gz_suffix(path)) {
        GzHandle f(gzopen(path.string().c_str(), "wb6"));
        if (!f) {
            throw Error(ErrorCode::IoError, "cannot write " + path.string());
        }
        bool ok = gzwrite(f.get(), &h, sizeof(h)) == static_cast<int>(sizeof(h));
        ok = ok && gzwrite(f.get(), extension, 4) == 4;
        std::size_t off = 0;
        while (ok && off < payload.size()) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(payload.size() - off, 1u << 30));
            ok = gzwrite(f.get(), payload.data() + off, chunk) == static_cast<int>(chunk);
            off += chunk;
        }
        if (!ok || gzclose(f.release()) != Z_OK) {
            throw Error(ErrorCode::IoError, "failed writing " + path.string());
        }
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char *>(&h), sizeof(h));
    out.write(extension, 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
}

template <class T>
void append_value(std::vector<char> &buf, T v) {
    const auto off = buf.size();
    buf.resize(off + sizeof(T));
    std::memcpy(buf.data() + off, &v, sizeof(T));
}

template <class Int>
Int round_to(double v) {
    const double lo = static_cast<double>(std::numeric_limits<Int>::min());
    const double hi = static_cast<double>(std::numeric_limits<Int>::max());
    return static_cast<Int>(std::clamp(std::nearbyint(v), lo, hi));
}

std::int16_t datatype_of(StorageType s) {
    switch (s) {
    case StorageType::UInt8: return kDtUInt8;
    case StorageType::Int16: return kDtInt16;
    case StorageType::Int32: return kDtInt32;
    case StorageType::Float32: return kDtFloat32;
    case StorageType::Float64: return kDtFloat64;
    }
    return kDtFloat32;
}

std::vector<char> encode(std::span<const double> values, StorageType s) {
    std::vector<char> buf;
    buf.reserve(values.size() * bytes_per_voxel(datatype_of(s)));
    for (double v : values) {
        switch (s) {
        case StorageType::UInt8: append_value(buf, round_to<std::uint8_t>(v)); break;
        case StorageType::Int16: append_value(buf, round_to<std::int16_t>(v)); break;
        case StorageType::Int32: append_value(buf, round_to<std::int32_t>(v)); break;
        case StorageType::Float32: append_value(buf, static_cast<float>(v)); break;
        case StorageType::Float64: append_value(buf, v); break;
        }
    }
    return buf;
}

}  // namespace

VolumeGrid load_volume(const std::filesystem::path &path) {
    const RawImage raw = read_raw(path);
    for (int i = 4; i <= raw.header.dim[0]; ++i) {
        if (raw.header.dim[i] != 1) {
            throw Error(ErrorCode::UnsupportedDatatype, "non-scalar image (dim[" + std::to_string(i) + "] > 1) in " +
                                                            path.string());
        }
    }
    return VolumeGrid(geometry_of(raw.header), decode_values(raw));
}

LabelMap load_labelmap(const std::filesystem::path &path) {
    const VolumeGrid v = load_volume(path);
    std::vector<std::uint8_t> codes(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i];
        if (x < 0.0 || x > kStructureCount || x != std::floor(x)) {
            throw Error(ErrorCode::InvalidCode, "label value " + std::to_string(x) + " in " + path.string());
        }
        codes[i] = static_cast<std::uint8_t>(x);
    }
    return LabelMap(v.geometry(), std::move(codes));
}

void save_volume(const VolumeGrid &volume, const std::filesystem::path &path, StorageType storage) {
    const Nifti1Header h = make_header(volume.geometry(), 1, datatype_of(storage));
    write_file(path, h, encode(volume.data(), storage));
}

void save_labelmap(const LabelMap &labels, const std::filesystem::path &path) {
    const Nifti1Header h = make_header(labels.geometry(), 1, kDtUInt8);
    std::vector<char> buf(labels.size());
    std::memcpy(buf.data(), labels.data().data(), labels.size());
    write_file(path, h, buf);
}

MultiChannelImage load_multichannel(const std::filesystem::path &path) {
    const RawImage raw = read_raw(path);
    const Nifti1Header &h = raw.header;
    MultiChannelImage img;
    img.geometry = geometry_of(h);
    img.channels = 1;
    for (int i = 4; i <= h.dim[0]; ++i) {
        img.channels *= h.dim[i];
    }
    img.intent_code = h.intent_code;
    img.data = decode_values(raw);
    return img;
}

void save_multichannel(const MultiChannelImage &image, const std::filesystem::path &path) {
    image.geometry.validate();
    if (image.channels < 1 ||
        image.data.size() != image.geometry.voxel_count() * static_cast<std::size_t>(image.channels)) {
        throw Error(ErrorCode::DimensionMismatch, "multi-channel data length does not match geometry");
    }
    Nifti1Header h = make_header(image.geometry, image.channels, kDtFloat32);
    h.intent_code = image.intent_code;
    write_file(path, h, encode(image.data, StorageType::Float32));
}

}  // namespace cardiofeat
