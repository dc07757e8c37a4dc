#include "f4its/embedding_file.hpp"

#include <fstream>
#include <limits>
#include <unordered_set>

#include "f4its/binary_io.hpp"
#include "f4its/error.hpp"

namespace f4its {

namespace io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
    }
    return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
    }
}

}  // namespace io

namespace {
constexpr std::string_view kMagic = "F4EM";
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string encode_embedding_file(const std::vector<EmbeddingRecord>& records) {
    const std::uint32_t dim = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().vector.dim());
    std::unordered_set<std::string_view> seen;
    for (const auto& r : records) {
        if (r.vector.dim() != dim) {
            throw Error(ErrorCode::MixedDims, "record '" + r.id + "' has dim " + std::to_string(r.vector.dim()) +
                                                  ", expected " + std::to_string(dim));
        }
        if (r.id.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw Error(ErrorCode::InvalidArgument, "record id longer than 65535 bytes");
        }
        if (!seen.insert(r.id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate record id '" + r.id + "'");
        }
    }

    io::ByteWriter w;
    w.raw(kMagic);
    w.le<std::uint16_t>(kVersion);
    w.le<std::uint32_t>(dim);
    w.le<std::uint64_t>(records.size());
    for (const auto& r : records) {
        w.le<std::uint16_t>(static_cast<std::uint16_t>(r.id.size()));
        w.raw(r.id);
        for (double x : r.vector.values()) {
            w.f32(static_cast<float>(x));
        }
    }
    return w.take();
}

std::vector<EmbeddingRecord> decode_embedding_file(std::string_view bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic) {
        throw Error(ErrorCode::BadMagic, "not an F4E file");
    }
    const auto version = r.le<std::uint16_t>();
    if (version != kVersion) {
        throw Error(ErrorCode::VersionUnsupported, "F4E version " + std::to_string(version));
    }
    const auto dim = r.le<std::uint32_t>();
    const auto count = r.le<std::uint64_t>();
    if (count > 0 && dim == 0) {
        throw Error(ErrorCode::DimMismatch, "non-empty F4E file with dim 0");
    }

    std::vector<EmbeddingRecord> out;
    std::unordered_set<std::string> seen;
    std::vector<float> buf(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id_len = r.le<std::uint16_t>();
        std::string id(r.raw(id_len));
        for (auto& x : buf) {
            x = r.f32();
        }
        if (!seen.insert(id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate record id '" + id + "'");
        }
        out.push_back({std::move(id), l2_normalize(EmbeddingVector::from_floats(buf))});
    }
    if (r.remaining() != 0) {
        throw Error(ErrorCode::DimMismatch, std::to_string(r.remaining()) +
                                                " trailing bytes; records are longer than header dim implies");
    }
    return out;
}

void write_embedding_file(const std::vector<EmbeddingRecord>& records, const std::filesystem::path& path) {
    io::write_file(path, encode_embedding_file(records));
}

std::vector<EmbeddingRecord> load_embedding_file(const std::filesystem::path& path) {
    return decode_embedding_file(io::read_file(path));
}

}  // namespace f4its
