#include "f4its/caption_index.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "f4its/binary_io.hpp"
#include "f4its/error.hpp"
#include "f4its/reranker.hpp"

namespace f4its {

namespace {
constexpr std::string_view kMagic = "F4IX";
constexpr std::uint16_t kVersion = 1;

void validate_caption(const Caption& c) {
    if (c.id.empty()) {
        throw Error(ErrorCode::InvalidArgument, "caption id is empty");
    }
    if (c.text.empty()) {
        throw Error(ErrorCode::EmptyText, "caption '" + c.id + "' has empty text");
    }
    if (c.kind == CaptionKind::sparse) {
        parse_items(c.text);  // throws NoItems
    }
}

CaptionKind common_kind(const std::vector<Caption>& captions) {
    if (captions.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "caption list is empty");
    }
    const auto kind = captions.front().kind;
    for (const auto& c : captions) {
        if (c.kind != kind) {
            throw Error(ErrorCode::MixedKinds, "index mixes dense and sparse captions ('" + c.id + "')");
        }
    }
    return kind;
}

std::string read_string(io::ByteReader& r) {
    const auto len = r.le<std::uint32_t>();
    return std::string(r.raw(len));
}

void write_string(io::ByteWriter& w, std::string_view s) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    w.raw(s);
}

}  // namespace

std::string_view to_string(CaptionKind kind) noexcept {
    return kind == CaptionKind::dense ? "dense" : "sparse";
}

CaptionKind parse_caption_kind(std::string_view name) {
    if (name == "dense") return CaptionKind::dense;
    if (name == "sparse") return CaptionKind::sparse;
    throw Error(ErrorCode::UnknownKind, "unknown caption kind '" + std::string(name) + "'");
}

CaptionIndex::CaptionIndex(std::vector<Caption> captions, std::vector<float> matrix, std::size_t dim,
                           CaptionKind kind, std::string encoder_fingerprint)
    : captions_(std::move(captions)),
      matrix_(std::move(matrix)),
      dim_(dim),
      kind_(kind),
      fingerprint_(std::move(encoder_fingerprint)) {
    if (captions_.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "caption index needs at least one caption");
    }
    if (dim_ == 0 || matrix_.size() != captions_.size() * dim_) {
        throw Error(ErrorCode::DimensionMismatch, "embedding matrix does not match count x dim");
    }
    by_id_.reserve(captions_.size());
    norms_.reserve(captions_.size());
    for (std::size_t i = 0; i < captions_.size(); ++i) {
        const auto& c = captions_[i];
        validate_caption(c);
        if (c.kind != kind_) {
            throw Error(ErrorCode::MixedKinds, "caption '" + c.id + "' kind differs from index kind");
        }
        if (!by_id_.emplace(c.id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate caption id '" + c.id + "'");
        }
        const double n = std::sqrt(squared_norm(row(i)));
        if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
            throw Error(ErrorCode::NotNormalized, "row for '" + c.id + "' is not unit-norm");
        }
        norms_.push_back(n);
    }
}

std::optional<std::size_t> CaptionIndex::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

EmbeddingVector CaptionIndex::embedding(std::size_t row_index) const {
    return EmbeddingVector::from_floats(row(row_index), true);
}

namespace {

CaptionIndex assemble(std::vector<Caption> captions, const std::vector<const EmbeddingVector*>& vectors,
                      std::string fingerprint) {
    const auto kind = common_kind(captions);
    const std::size_t dim = vectors.front()->dim();
    std::vector<float> matrix;
    matrix.reserve(captions.size() * dim);
    for (const auto* v : vectors) {
        if (v->dim() != dim) {
            throw Error(ErrorCode::MixedDims, "caption embeddings have differing dimensions");
        }
        const auto unit = l2_normalize(*v);
        for (double x : unit.values()) {
            matrix.push_back(static_cast<float>(x));
        }
    }
    return CaptionIndex(std::move(captions), std::move(matrix), dim, kind, std::move(fingerprint));
}

}  // namespace

CaptionIndex build_index(std::vector<Caption> captions, const TextEncoder& encoder) {
    common_kind(captions);
    std::unordered_map<std::string_view, bool> seen;
    std::vector<std::string> texts;
    texts.reserve(captions.size());
    for (const auto& c : captions) {
        validate_caption(c);
        if (!seen.emplace(c.id, true).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate caption id '" + c.id + "'");
        }
        texts.push_back(c.text);
    }
    const auto vectors = encoder.encode(texts);
    if (vectors.size() != captions.size()) {
        throw Error(ErrorCode::MalformedResponse, "encoder returned wrong number of vectors");
    }
    std::vector<const EmbeddingVector*> ptrs;
    for (const auto& v : vectors) {
        ptrs.push_back(&v);
    }
    return assemble(std::move(captions), ptrs, encoder.fingerprint());
}

CaptionIndex build_index(std::vector<Caption> captions, const std::vector<EmbeddingRecord>& embeddings,
                         std::string encoder_fingerprint) {
    common_kind(captions);
    std::unordered_map<std::string_view, const EmbeddingVector*> lookup;
    for (const auto& r : embeddings) {
        lookup.emplace(r.id, &r.vector);
    }
    std::vector<const EmbeddingVector*> ptrs;
    for (const auto& c : captions) {
        auto it = lookup.find(c.id);
        if (it == lookup.end()) {
            throw Error(ErrorCode::UnknownId, "no embedding for caption '" + c.id + "'");
        }
        ptrs.push_back(it->second);
    }
    return assemble(std::move(captions), ptrs, std::move(encoder_fingerprint));
}

std::string encode_index(const CaptionIndex& index) {
    io::ByteWriter w;
    w.raw(kMagic);
    w.le<std::uint16_t>(kVersion);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(index.kind()));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(index.dim()));
    w.le<std::uint64_t>(index.size());
    for (const auto& c : index.captions()) {
        write_string(w, c.id);
        write_string(w, c.text);
    }
    for (float x : index.matrix()) {
        w.f32(x);
    }
    write_string(w, index.encoder_fingerprint());
    return w.take();
}

CaptionIndex decode_index(std::string_view bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic) {
        throw Error(ErrorCode::BadMagic, "not an F4I file");
    }
    const auto version = r.le<std::uint16_t>();
    if (version != kVersion) {
        throw Error(ErrorCode::VersionUnsupported, "F4I version " + std::to_string(version));
    }
    const auto kind_byte = r.le<std::uint8_t>();
    if (kind_byte > 1) {
        throw Error(ErrorCode::UnknownKind, "index kind byte " + std::to_string(kind_byte));
    }
    const auto kind = static_cast<CaptionKind>(kind_byte);
    const auto dim = r.le<std::uint32_t>();
    const auto count = r.le<std::uint64_t>();
    // Each record needs at least two length prefixes; reject absurd counts before allocating.
    if (count > r.remaining() / 8) {
        throw Error(ErrorCode::TruncatedFile, "caption count exceeds file size");
    }

    std::vector<Caption> captions;
    captions.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Caption c;
        c.id = read_string(r);
        c.text = read_string(r);
        c.kind = kind;
        captions.push_back(std::move(c));
    }
    if (dim != 0 && count > r.remaining() / (4ULL * dim)) {
        throw Error(ErrorCode::TruncatedFile, "embedding block shorter than count x dim");
    }
    std::vector<float> matrix(count * dim);
    for (auto& x : matrix) {
        x = r.f32();
    }
    auto fingerprint = read_string(r);
    if (r.remaining() != 0) {
        throw Error(ErrorCode::DimMismatch, std::to_string(r.remaining()) + " trailing bytes after fingerprint");
    }
    return CaptionIndex(std::move(captions), std::move(matrix), dim, kind, std::move(fingerprint));
}

void save_index(const CaptionIndex& index, const std::filesystem::path& path) {
    io::write_file(path, encode_index(index));
}

CaptionIndex load_index(const std::filesystem::path& path) {
    return decode_index(io::read_file(path));
}

std::vector<Caption> parse_captions_jsonl(std::string_view content) {
    std::vector<Caption> out;
    std::unordered_map<std::string, std::size_t> seen;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedLine, where + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() || !obj.contains("text") ||
            !obj["text"].is_string() || !obj.contains("kind") || !obj["kind"].is_string()) {
            throw Error(ErrorCode::MalformedLine, where + ": expected string fields id, text, kind");
        }
        Caption c{obj["id"].get<std::string>(), obj["text"].get<std::string>(), CaptionKind::dense};
        try {
            c.kind = parse_caption_kind(obj["kind"].get<std::string>());
            validate_caption(c);
        } catch (const Error& e) {
            throw Error(e.code(), where + ": " + e.what());
        }
        if (!seen.emplace(c.id, line_no).second) {
            throw Error(ErrorCode::DuplicateId, where + ": duplicate caption id '" + c.id + "'");
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Caption> ingest_captions(const std::filesystem::path& path) {
    return parse_captions_jsonl(io::read_file(path));
}

}  // namespace f4its
