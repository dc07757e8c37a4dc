#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "f4its/binary_io.hpp"
#include "f4its/bundle_io.hpp"
#include "f4its/caption_index.hpp"
#include "f4its/embedding_file.hpp"
#include "f4its/encoder.hpp"
#include "f4its/error.hpp"
#include "f4its/eval.hpp"
#include "f4its/reranker.hpp"
#include "f4its/retrieval.hpp"
#include "f4its/synthetic_corpus.hpp"

namespace f4its::cli {

namespace {

struct EncoderFlags {
    std::string kind;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    std::string endpoint;
    std::string embeddings;
    std::string token;
    std::size_t batch_size = 32;
    bool seed_given = false;
};

void add_encoder_flags(CLI::App& cmd, EncoderFlags& f) {
    cmd.add_option("--encoder", f.kind, "Embedding source")->check(CLI::IsMember({"synthetic", "file", "remote"}));
    cmd.add_option("--dim", f.dim, "Embedding dimension");
    cmd.add_option("--seed", f.seed, "Synthetic encoder seed");
    cmd.add_option("--endpoint", f.endpoint, "Remote encoder base URL (default $F4_ENCODER_ENDPOINT)");
    cmd.add_option("--embeddings", f.embeddings, "F4E file of precomputed embeddings (file encoder)");
    cmd.add_option("--token", f.token, "Bearer token passed to the remote encoder");
    cmd.add_option("--batch-size", f.batch_size, "Texts per remote request")->check(CLI::PositiveNumber);
}

/// Recovers an encoder spec from an index fingerprint such as "synthetic:dim=64:seed=7".
EncoderSpec spec_from_fingerprint(const std::string& fingerprint) {
    EncoderSpec spec;
    std::istringstream in(fingerprint);
    std::string part;
    bool first = true;
    while (std::getline(in, part, ':')) {
        if (first) {
            spec.kind = parse_encoder_kind(part);
            first = false;
        } else if (part.rfind("dim=", 0) == 0) {
            spec.dim = std::stoul(part.substr(4));
        } else if (part.rfind("seed=", 0) == 0) {
            spec.seed = std::stoull(part.substr(5));
        } else if (part.rfind("endpoint=", 0) == 0) {
            // Endpoints contain ':' themselves; take the rest verbatim.
            const auto pos = fingerprint.find("endpoint=");
            spec.endpoint = fingerprint.substr(pos + 9);
            break;
        } else if (part.rfind("path=", 0) == 0) {
            spec.path = fingerprint.substr(fingerprint.find("path=") + 5);
            break;
        }
    }
    return spec;
}

/// Flags override whatever the index recorded; with no index, defaults apply.
EncoderSpec resolve_encoder(const EncoderFlags& f, const std::string* index_fingerprint) {
    EncoderSpec spec;
    if (index_fingerprint != nullptr && f.kind.empty()) {
        try {
            spec = spec_from_fingerprint(*index_fingerprint);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument,
                        "cannot infer encoder from index fingerprint '" + *index_fingerprint + "'; pass --encoder");
        }
    }
    if (!f.kind.empty()) spec.kind = parse_encoder_kind(f.kind);
    if (f.dim != 0) spec.dim = f.dim;
    if (f.seed_given) spec.seed = f.seed;
    if (!f.endpoint.empty()) spec.endpoint = f.endpoint;
    if (!f.embeddings.empty()) spec.path = f.embeddings;
    spec.bearer_token = f.token;
    spec.batch_size = f.batch_size;
    return spec;
}

struct PipelineFlags {
    double w_text = 0.3;
    double w_index_text = 0.7;
    std::string text_source;
    bool bidirectional = false;
    bool rerank = false;
    std::size_t pool = 0;
    double blend = 0.0;
};

void add_pipeline_flags(CLI::App& cmd, PipelineFlags& f, bool with_w_text = true) {
    if (with_w_text) {
        cmd.add_option("--w-text", f.w_text, "Query-side text fusion weight (image weight is 1 - w)")
            ->check(CLI::Range(0.0, 1.0));
    }
    cmd.add_option("--w-index-text", f.w_index_text, "Index-side text weight for bi-directional scoring")
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--text-source", f.text_source, "Prediction text fused into the query")
        ->check(CLI::IsMember({"dense", "sparse"}));
    cmd.add_flag("--bidirectional", f.bidirectional, "Fuse index captions with the query image at scoring time");
    cmd.add_flag("--rerank", f.rerank, "Max-similarity rerank with the sparse prediction items");
    cmd.add_option("--pool", f.pool, "Rerank candidate pool N (default max(50, 5k))");
    cmd.add_option("--rerank-blend", f.blend, "Weight kept on the initial score when reranking")
        ->check(CLI::Range(0.0, 1.0));
}

EvalConfig to_config(const PipelineFlags& f, TextSource fallback_source) {
    EvalConfig c;
    c.weights = FusionWeights::from_text_weight(f.w_text);
    c.index_weights = FusionWeights::from_text_weight(f.w_index_text);
    c.text_source = f.text_source.empty() ? fallback_source : parse_text_source(f.text_source);
    c.bidirectional = f.bidirectional;
    c.rerank = f.rerank;
    c.pool = f.pool;
    c.rerank_blend = f.blend;
    return c;
}

/// "file.f4e", "file.f4e:id" or an inline comma-separated vector.
EmbeddingVector read_image_embedding(const std::string& spec) {
    if (std::filesystem::exists(spec)) {
        auto records = load_embedding_file(spec);
        if (records.empty()) {
            throw Error(ErrorCode::EmptyCorpus, spec + " holds no embeddings");
        }
        return records.front().vector;
    }
    if (const auto colon = spec.rfind(':'); colon != std::string::npos && std::filesystem::exists(spec.substr(0, colon))) {
        const auto id = spec.substr(colon + 1);
        for (auto& r : load_embedding_file(spec.substr(0, colon))) {
            if (r.id == id) {
                return r.vector;
            }
        }
        throw Error(ErrorCode::UnknownId, "no record '" + id + "' in " + spec.substr(0, colon));
    }
    std::vector<double> values;
    std::istringstream in(spec);
    std::string piece;
    while (std::getline(in, piece, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(piece, &used));
            if (piece.find_first_not_of(" \t", used) != std::string::npos) {
                throw std::invalid_argument(piece);
            }
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "--image-embedding is neither a file nor a numeric list: '" + spec + "'");
        }
    }
    if (values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--image-embedding is empty");
    }
    return l2_normalize(EmbeddingVector(std::move(values)));
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::istringstream in(text);
    std::string piece;
    while (std::getline(in, piece, ',')) {
        if (piece.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        try {
            grid.push_back(std::stod(piece));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--grid", "'" + piece + "' is not a number");
        }
    }
    return grid;
}

int cmd_build_index(const std::string& captions_path, const std::string& out_path, const EncoderFlags& flags,
                    std::ostream& out) {
    auto captions = ingest_captions(captions_path);
    const auto spec = resolve_encoder(flags, nullptr);
    std::optional<CaptionIndex> index;
    if (spec.kind == EncoderKind::file) {
        if (spec.path.empty()) {
            throw Error(ErrorCode::InvalidArgument, "file encoder needs --embeddings");
        }
        const auto records = load_embedding_file(spec.path);
        index.emplace(build_index(std::move(captions), records, spec.fingerprint()));
    } else {
        index.emplace(build_index(std::move(captions), *make_encoder(spec)));
    }
    save_index(*index, out_path);
    out << fmt::format("wrote {}: count={} dim={} kind={} encoder={}\n", out_path, index->size(), index->dim(),
                       to_string(index->kind()), index->encoder_fingerprint());
    return kExitOk;
}

struct SearchArgs {
    std::string index;
    std::string image;
    std::optional<std::string> dense_text;
    std::optional<std::string> sparse_text;
    std::size_t k = 1;
};

int cmd_search(const SearchArgs& a, const PipelineFlags& pf, const EncoderFlags& ef, std::ostream& out,
               std::ostream& err) {
    const auto index = load_index(a.index);
    const auto spec = resolve_encoder(ef, &index.encoder_fingerprint());
    const auto encoder = make_encoder(spec);
    if (encoder->fingerprint() != index.encoder_fingerprint()) {
        err << "warning: query encoder '" << encoder->fingerprint() << "' differs from index encoder '"
            << index.encoder_fingerprint() << "'\n";
    }
    const TextSource fallback = a.dense_text ? TextSource::dense : TextSource::sparse;
    auto config = to_config(pf, fallback);
    if (config.rerank && !a.sparse_text) {
        throw Error(ErrorCode::ConfigConflict, "--rerank needs --sparse-text");
    }
    if (config.rerank && index.kind() != CaptionKind::sparse) {
        throw Error(ErrorCode::ConfigConflict, "--rerank needs a sparse caption index");
    }
    QueryBundle bundle{"query", read_image_embedding(a.image), a.dense_text, a.sparse_text, {}, std::nullopt};
    const auto ranked = run_query(bundle, index, *encoder, config, a.k);

    out << "stage=" << to_string(ranked.stage) << "\n";
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
        const auto& e = ranked.entries[i];
        out << fmt::format("{}\t{}\t{:.6f}\t{}\n", i + 1, e.caption_id, e.score,
                           index.caption(*index.find(e.caption_id)).text);
    }
    return kExitOk;
}

struct EvalArgs {
    std::string index;
    std::string bundles;
    std::string images;
    std::string report;
    std::string format = "json";
    std::string name;
    unsigned workers = 1;
};

struct LoadedCorpus {
    CaptionIndex index;
    std::vector<QueryBundle> bundles;
    std::unique_ptr<TextEncoder> encoder;
};

LoadedCorpus load_corpus(const EvalArgs& a, const EncoderFlags& ef) {
    auto index = load_index(a.index);
    auto bundles = load_bundles(a.bundles, a.images);
    auto encoder = make_encoder(resolve_encoder(ef, &index.encoder_fingerprint()));
    return {std::move(index), std::move(bundles), std::move(encoder)};
}

int cmd_evaluate(const EvalArgs& a, const PipelineFlags& pf, const EncoderFlags& ef, std::ostream& out,
                 std::ostream& err) {
    auto corpus = load_corpus(a, ef);
    auto config = to_config(pf, TextSource::dense);
    config.workers = a.workers;
    const auto name = a.name.empty() ? std::filesystem::path(a.bundles).parent_path().filename().string() : a.name;
    const auto report = evaluate_corpus(corpus.bundles, corpus.index, *corpus.encoder, config, name.empty() ? "corpus" : name);
    for (const auto& w : report.warnings) {
        err << "warning: " << w << "\n";
    }
    if (!a.report.empty()) {
        write_report(report, a.report, parse_report_format(a.format));
    }
    out << summary_line(report) << "\n";
    return kExitOk;
}

int cmd_sweep(const EvalArgs& a, const PipelineFlags& pf, const EncoderFlags& ef, const std::vector<double>& grid,
              const std::string& metric, const std::string& out_path, std::ostream& out) {
    auto corpus = load_corpus(a, ef);
    auto config = to_config(pf, TextSource::dense);
    config.workers = a.workers;
    const auto sweep = sweep_fusion_weight(corpus.bundles, corpus.index, *corpus.encoder, grid, config,
                                           parse_sweep_metric(metric));
    const auto csv = format_sweep_csv(sweep);
    if (out_path.empty()) {
        out << csv;
    } else {
        io::write_file(out_path, csv);
    }
    out << fmt::format("peak w_text={} {}={:.4f}\n", sweep.peak(), sweep.metric_name,
                       *std::max_element(sweep.values.begin(), sweep.values.end()));
    return kExitOk;
}

int cmd_gen_synthetic(SyntheticParams params, const std::string& items_range, const std::string& out_dir,
                      std::ostream& out) {
    if (!items_range.empty()) {
        const auto dash = items_range.find('-');
        try {
            if (dash == std::string::npos) {
                params.items_min = params.items_max = std::stoul(items_range);
            } else {
                params.items_min = std::stoul(items_range.substr(0, dash));
                params.items_max = std::stoul(items_range.substr(dash + 1));
            }
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "--items-per-caption expects N or MIN-MAX");
        }
    }
    const auto corpus = generate_corpus(params);
    write_corpus(corpus, out_dir);
    out << fmt::format("wrote {} ({} task): {} captions, {} queries, baseline R@1 {:.4f} R@5 {:.4f}", out_dir,
                       to_string(corpus.params.task), corpus.captions.size(), corpus.bundles.size(),
                       corpus.baseline.recall_at_1, corpus.baseline.recall_at_5);
    if (corpus.baseline.mean_ap) {
        out << fmt::format(" mAP {:.4f}", *corpus.baseline.mean_ap);
    }
    out << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-modal fused caption retrieval with item-level reranking", "f4its"};
    app.require_subcommand(1);

    // build-index
    auto* build = app.add_subcommand("build-index", "Encode a caption JSONL file into an F4I index");
    std::string captions_path, index_out;
    EncoderFlags build_enc;
    build->add_option("--captions", captions_path, "Caption JSONL")->required();
    build->add_option("--out", index_out, "Output F4I path")->required();
    add_encoder_flags(*build, build_enc);

    // search
    auto* search = app.add_subcommand("search", "Run one query against an index");
    SearchArgs sargs;
    PipelineFlags spf;
    EncoderFlags senc;
    search->add_option("--index", sargs.index, "F4I index")->required();
    search->add_option("--image-embedding", sargs.image, "F4E file[:id] or inline comma-separated vector")->required();
    search->add_option("--dense-text", sargs.dense_text, "Predicted dense caption");
    search->add_option("--sparse-text", sargs.sparse_text, "Predicted comma-separated items");
    search->add_option("--k", sargs.k, "Results to return")->check(CLI::PositiveNumber);
    add_pipeline_flags(*search, spf);
    add_encoder_flags(*search, senc);

    // evaluate / sweep share corpus flags
    auto add_corpus_flags = [](CLI::App& cmd, EvalArgs& a) {
        cmd.add_option("--index", a.index, "F4I index")->required();
        cmd.add_option("--bundles", a.bundles, "Query bundle JSONL")->required();
        cmd.add_option("--images", a.images, "F4E image embeddings keyed by image_id")->required();
        cmd.add_option("--workers", a.workers, "Bundles evaluated concurrently")->check(CLI::PositiveNumber);
        cmd.add_option("--name", a.name, "Corpus name used in reports");
    };

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a corpus and write a report");
    EvalArgs eargs;
    PipelineFlags epf;
    EncoderFlags eenc;
    add_corpus_flags(*evaluate, eargs);
    evaluate->add_option("--report", eargs.report, "Report output path");
    evaluate->add_option("--format", eargs.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    add_pipeline_flags(*evaluate, epf);
    add_encoder_flags(*evaluate, eenc);

    auto* sweep = app.add_subcommand("sweep", "Sweep the query text fusion weight");
    EvalArgs wargs;
    PipelineFlags wpf;
    EncoderFlags wenc;
    std::string grid_text, metric = "recall_at_1", sweep_out;
    double grid_step = 0.0;
    add_corpus_flags(*sweep, wargs);
    auto* grid_opt = sweep->add_option("--grid", grid_text, "Comma-separated w_text values");
    auto* step_opt = sweep->add_option("--grid-step", grid_step, "Grid 0, step, ..., 1")->check(CLI::Range(1e-6, 1.0));
    grid_opt->excludes(step_opt);
    sweep->add_option("--metric", metric, "recall_at_1, recall_at_5 or mean_ap");
    sweep->add_option("--out", sweep_out, "Sweep CSV path (stdout if omitted)");
    add_pipeline_flags(*sweep, wpf, false);
    add_encoder_flags(*sweep, wenc);

    auto* gen = app.add_subcommand("gen-synthetic", "Generate a seeded synthetic corpus");
    SyntheticParams params;
    std::string task = "dense", items_range, gen_out;
    gen->add_option("--task", task, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
    gen->add_option("--vocab-size", params.vocab_size, "Distinct item words");
    gen->add_option("--num-captions", params.num_captions, "Captions in the index");
    gen->add_option("--num-queries", params.num_queries, "Query images");
    gen->add_option("--items-per-caption", items_range, "Items per caption, N or MIN-MAX");
    gen->add_option("--noise-sigma", params.noise_sigma, "Image noise sigma");
    gen->add_option("--dropout", params.dropout, "Fraction of items removed from prediction texts");
    gen->add_option("--seed", params.seed, "Generator and encoder seed");
    gen->add_option("--dim", params.dim, "Embedding dimension");
    gen->add_option("--distractors", params.distractors, "Sparse task: distractor ingredients per image");
    gen->add_option("--distractor-weight", params.distractor_weight, "Sparse task: distractor pull on the image");
    gen->add_option("--out-dir", gen_out, "Output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*build) {
            build_enc.seed_given = true;
            return cmd_build_index(captions_path, index_out, build_enc, out);
        }
        for (auto* cmd : {search, evaluate, sweep}) {
            if (*cmd) {
                auto& ef = cmd == search ? senc : cmd == evaluate ? eenc : wenc;
                ef.seed_given = cmd->get_option("--seed")->count() > 0;
            }
        }
        if (*search) {
            return cmd_search(sargs, spf, senc, out, err);
        }
        if (*evaluate) {
            return cmd_evaluate(eargs, epf, eenc, out, err);
        }
        if (*sweep) {
            std::vector<double> grid;
            if (!grid_text.empty()) {
                grid = parse_grid(grid_text);
            } else if (grid_step > 0.0) {
                grid = grid_from_step(grid_step);
            }
            if (grid.empty()) {
                err << "usage error: sweep needs a non-empty --grid or --grid-step\n";
                return kExitUsage;
            }
            return cmd_sweep(wargs, wpf, wenc, grid, metric, sweep_out, out);
        }
        if (*gen) {
            params.task = parse_corpus_task(task);
            return cmd_gen_synthetic(params, items_range, gen_out, out);
        }
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace f4its::cli
