#include "f4its/bundle_io.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "f4its/binary_io.hpp"
#include "f4its/error.hpp"

namespace f4its {

std::string format_bundles_jsonl(std::span<const QueryBundle> bundles) {
    std::string out;
    for (const auto& b : bundles) {
        nlohmann::ordered_json j;
        j["image_id"] = b.image_id;
        j["gt_ids"] = b.gt_caption_ids;
        if (b.dense_text) j["dense_text"] = *b.dense_text;
        if (b.sparse_text) j["sparse_text"] = *b.sparse_text;
        if (b.gt_sparse_text) j["gt_sparse_text"] = *b.gt_sparse_text;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<EmbeddingRecord> bundle_image_records(std::span<const QueryBundle> bundles) {
    std::vector<EmbeddingRecord> out;
    out.reserve(bundles.size());
    for (const auto& b : bundles) {
        out.push_back({b.image_id, b.image});
    }
    return out;
}

namespace {

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) {
        return std::nullopt;
    }
    if (!obj[key].is_string()) {
        throw Error(ErrorCode::MalformedLine, where + ": '" + key + "' must be a string");
    }
    return obj[key].get<std::string>();
}

}  // namespace

std::vector<QueryBundle> parse_bundles(std::string_view jsonl, const std::vector<EmbeddingRecord>& images) {
    std::unordered_map<std::string_view, const EmbeddingVector*> by_id;
    for (const auto& r : images) {
        by_id.emplace(r.id, &r.vector);
    }

    std::vector<QueryBundle> out;
    std::unordered_set<std::string> seen;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = "bundle line " + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedLine, where + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("image_id") || !obj["image_id"].is_string() || !obj.contains("gt_ids") ||
            !obj["gt_ids"].is_array()) {
            throw Error(ErrorCode::MalformedLine, where + ": expected image_id string and gt_ids array");
        }
        std::vector<std::string> gt;
        for (const auto& g : obj["gt_ids"]) {
            if (!g.is_string()) {
                throw Error(ErrorCode::MalformedLine, where + ": gt_ids entries must be strings");
            }
            gt.push_back(g.get<std::string>());
        }
        auto image_id = obj["image_id"].get<std::string>();
        if (!seen.insert(image_id).second) {
            throw Error(ErrorCode::DuplicateId, where + ": duplicate image id '" + image_id + "'");
        }
        auto it = by_id.find(image_id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::UnknownId, where + ": no image embedding for '" + image_id + "'");
        }
        out.push_back(QueryBundle{std::move(image_id), *it->second, optional_string(obj, "dense_text", where),
                                  optional_string(obj, "sparse_text", where), std::move(gt),
                                  optional_string(obj, "gt_sparse_text", where)});
    }
    return out;
}

std::vector<QueryBundle> load_bundles(const std::filesystem::path& jsonl, const std::filesystem::path& images) {
    return parse_bundles(io::read_file(jsonl), load_embedding_file(images));
}

}  // namespace f4its
