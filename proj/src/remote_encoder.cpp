#include "f4its/remote_encoder.hpp"

#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "f4its/error.hpp"

namespace f4its {

namespace {

struct Endpoint {
    std::string base;    // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    Endpoint ep;
    if (path_start == std::string::npos) {
        ep.base = endpoint;
    } else {
        ep.base = endpoint.substr(0, path_start);
        ep.prefix = endpoint.substr(path_start);
    }
    while (!ep.prefix.empty() && ep.prefix.back() == '/') {
        ep.prefix.pop_back();
    }
    return ep;
}

bool is_transient_status(int status) {
    return status == 429 || status >= 500;
}

}  // namespace

RemoteEncoder::RemoteEncoder(EncoderSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind != EncoderKind::remote) {
        throw Error(ErrorCode::InvalidArgument, "encoder spec is not remote");
    }
    spec_.validate();
    auto ep = split_endpoint(spec_.endpoint);
    base_url_ = std::move(ep.base);
    path_prefix_ = std::move(ep.prefix);
}

std::vector<EmbeddingVector> RemoteEncoder::encode(std::span<const std::string> texts) const {
    if (texts.empty()) {
        throw Error(ErrorCode::InvalidArgument, "remote encode needs at least one text");
    }
    for (const auto& t : texts) {
        if (t.size() > kMaxRemoteTextBytes) {
            throw Error(ErrorCode::TextTooLong, "text of " + std::to_string(t.size()) + " bytes exceeds 8192");
        }
    }

    std::vector<std::span<const std::string>> batches;
    for (std::size_t i = 0; i < texts.size(); i += spec_.batch_size) {
        batches.push_back(texts.subspan(i, std::min(spec_.batch_size, texts.size() - i)));
    }

    // Results land in their batch slot, so arrival order never matters.
    std::vector<std::vector<EmbeddingVector>> results(batches.size());
    for (std::size_t wave = 0; wave < batches.size(); wave += spec_.max_in_flight) {
        const std::size_t end = std::min(batches.size(), wave + spec_.max_in_flight);
        if (end - wave == 1) {
            results[wave] = encode_batch(batches[wave]);
            continue;
        }
        std::vector<std::future<std::vector<EmbeddingVector>>> inflight;
        for (std::size_t b = wave; b < end; ++b) {
            inflight.push_back(std::async(std::launch::async, [this, batch = batches[b]] { return encode_batch(batch); }));
        }
        for (std::size_t b = wave; b < end; ++b) {
            results[b] = inflight[b - wave].get();
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& r : results) {
        for (auto& v : r) {
            out.push_back(std::move(v));
        }
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEncoder::encode_batch(std::span<const std::string> texts) const {
    nlohmann::json request;
    request["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    const std::string body = request.dump();

    httplib::Client client(base_url_);
    client.set_connection_timeout(spec_.timeout);
    client.set_read_timeout(spec_.timeout);
    httplib::Headers headers;
    if (!spec_.bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + spec_.bearer_token);
    }

    std::string last_failure;
    bool last_was_connection = true;
    auto backoff = spec_.initial_backoff;
    for (int attempt = 1; attempt <= spec_.max_attempts; ++attempt) {
        auto res = client.Post(path_prefix_ + "/embed", headers, body, "application/json");
        if (!res) {
            last_was_connection = true;
            last_failure = httplib::to_string(res.error());
        } else if (res->status == 200) {
            nlohmann::json payload;
            try {
                payload = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
            }
            if (!payload.is_object() || !payload.contains("vectors") || !payload["vectors"].is_array()) {
                throw Error(ErrorCode::MalformedResponse, "response lacks a 'vectors' array");
            }
            const auto& vectors = payload["vectors"];
            if (vectors.size() != texts.size()) {
                throw Error(ErrorCode::MalformedResponse, "expected " + std::to_string(texts.size()) +
                                                              " vectors, got " + std::to_string(vectors.size()));
            }
            if (payload.contains("dim") && payload["dim"] != spec_.dim) {
                throw Error(ErrorCode::MalformedResponse, "service dim " + payload["dim"].dump() +
                                                              " differs from expected " + std::to_string(spec_.dim));
            }
            std::vector<EmbeddingVector> out;
            out.reserve(vectors.size());
            for (const auto& v : vectors) {
                if (!v.is_array() || v.size() != spec_.dim) {
                    throw Error(ErrorCode::MalformedResponse, "vector of wrong dimension in response");
                }
                std::vector<double> values;
                values.reserve(spec_.dim);
                for (const auto& x : v) {
                    if (!x.is_number()) {
                        throw Error(ErrorCode::MalformedResponse, "non-numeric vector entry");
                    }
                    values.push_back(x.get<double>());
                }
                try {
                    out.push_back(l2_normalize(EmbeddingVector(std::move(values))));
                } catch (const Error& e) {
                    throw Error(ErrorCode::MalformedResponse, e.what());
                }
            }
            return out;
        } else if (is_transient_status(res->status)) {
            last_was_connection = false;
            last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
        } else {
            throw Error(ErrorCode::RemoteError, "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        if (attempt < spec_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    const std::string detail = "giving up after " + std::to_string(spec_.max_attempts) + " attempts to " +
                               spec_.endpoint + " (" + last_failure + ")";
    throw Error(last_was_connection ? ErrorCode::ServiceUnreachable : ErrorCode::RemoteError, detail);
}

std::vector<EmbeddingVector> encode_remote(std::span<const std::string> texts, const EncoderSpec& spec) {
    return RemoteEncoder(spec).encode(texts);
}

}  // namespace f4its
