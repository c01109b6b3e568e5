#include "ragkit/cli.hpp"

#include <fstream>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "ragkit/chunker.hpp"
#include "ragkit/config.hpp"
#include "ragkit/conversation.hpp"
#include "ragkit/corpus.hpp"
#include "ragkit/dedup.hpp"
#include "ragkit/eval.hpp"
#include "ragkit/gateway.hpp"
#include "ragkit/hallucination.hpp"
#include "ragkit/json_lines.hpp"
#include "ragkit/mocks.hpp"
#include "ragkit/retrieval.hpp"
#include "ragkit/service.hpp"
#include "ragkit/text_util.hpp"
#include "ragkit/vector_index.hpp"

namespace ragkit::cli {

using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& part : split(s, ',')) {
        const auto t = trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

void write_output(const json& j, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << j.dump(2) << '\n';
    } else {
        write_json_file(path, j);
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

// Shared state for every subcommand.
struct Context {
    std::string config_path;
    std::string index_dir;
    bool loaded = false;
    config::AppConfig config;

    config::AppConfig& cfg() {
        if (!loaded) {
            config = config_path.empty() ? config::default_config() : config::load_config(config_path);
            loaded = true;
        }
        return config;
    }

    std::shared_ptr<index::KbRegistry> registry() {
        auto reg = std::make_shared<index::KbRegistry>();
        for (const auto& [kb, path] : cfg().kbs) {
            auto idx = index::VectorIndex::load(path);
            if (idx->kb_id() != kb) throw std::runtime_error("index " + path.string() + " holds kb '" + idx->kb_id() + "', config names it '" + kb + "'");
            reg->put(idx);
        }
        if (!index_dir.empty()) reg->load_dir(index_dir);
        return reg;
    }

    gateway::ModelGateway gateway() { return gateway::make_gateway(cfg().gateway); }
};

retrieval::RetrievalConfig retrieval_config(Context& ctx, const std::string& kbs, std::size_t k,
                                            const std::string& filter) {
    auto rc = ctx.cfg().retrieval;
    if (!kbs.empty()) rc.kbs = split_list(kbs);
    if (k) rc.k = k;
    if (!filter.empty()) rc.filter = index::FilterExpr::parse(filter);
    rc.validate();
    return rc;
}

std::vector<gateway::Judge> make_judges(Context& ctx, const std::string& list) {
    std::vector<gateway::Judge> judges;
    auto prompts = gateway::PromptAssets::builtin();
    if (!ctx.cfg().gateway.prompt_dir.empty()) prompts.load_dir(ctx.cfg().gateway.prompt_dir);
    for (const auto& name : split_list(list)) {
        judges.emplace_back(name, gateway::make_generator({name, ""}, ctx.cfg().gateway), prompts);
    }
    if (judges.empty()) throw UsageError("--judges needs at least one judge");
    return judges;
}

void finish_report(const eval::EvalReport& report, const std::string& out_path, const std::string& csv_path,
                   std::ostream& out) {
    write_output(report.to_json(), out_path, out);
    if (!csv_path.empty()) write_text(csv_path, report.metrics_csv());
}

// ============================================================================
// Subcommands
// ============================================================================

int cmd_clean(Context& ctx, const std::string& in, const std::string& out_path, const std::string& report_path,
              bool near_dup, bool keep_duplicates, std::ostream& err) {
    std::vector<corpus::RawDocument> docs;
    for (const auto& row : read_json_lines(in)) docs.push_back(corpus::raw_document_from_json(row));
    auto report = corpus::exact_dedup(docs);
    std::set<std::string> keep;
    {
        std::vector<corpus::TextRef> refs;
        for (const auto& d : docs) refs.push_back({d.id, d.text});
        const auto ids = corpus::kept_ids(refs, report);
        keep.insert(ids.begin(), ids.end());
    }
    std::vector<json> rows;
    std::vector<corpus::CleanDocument> cleaned;
    std::set<std::string> written;
    for (const auto& d : docs) {
        if (!keep_duplicates && (!keep.count(d.id) || written.count(d.id))) continue;
        written.insert(d.id);
        cleaned.push_back(corpus::clean_document(d, ctx.cfg().cleaning));
        rows.push_back(corpus::to_json(cleaned.back()));
    }
    write_json_lines(out_path, rows);
    if (near_dup) {
        std::vector<corpus::TextRef> refs;
        for (const auto& c : cleaned) refs.push_back({c.id, c.text});
        report.near_duplicate_pairs = corpus::minhash_near_dup(refs).near_duplicate_pairs;
        report.minhash_config = corpus::MinHashConfig{}.to_json();
    }
    if (!report_path.empty()) {
        auto j = report.to_json();
        j["v"] = 1;
        j["documents_in"] = docs.size();
        j["documents_out"] = rows.size();
        write_json_file(report_path, j);
    }
    err << "cleaned " << rows.size() << " of " << docs.size() << " documents\n";
    return kExitOk;
}

int cmd_chunk(Context& ctx, const std::string& in, const std::string& out_path, std::size_t target,
              std::size_t hard_max, bool no_sentence_fallback, bool no_filter, const std::string& dropped_path,
              std::ostream& err) {
    auto cc = ctx.cfg().chunk;
    if (target) {
        cc.target_words = target;
        if (!hard_max) cc.hard_max_words = target + target / 4;
    }
    if (hard_max) cc.hard_max_words = hard_max;
    if (no_sentence_fallback) cc.sentence_fallback = false;
    cc.validate();
    std::vector<chunking::Chunk> all;
    for (const auto& row : read_json_lines(in)) {
        const auto doc = corpus::clean_document_from_json(row);
        auto result = chunking::chunk_document(doc, cc);
        for (const auto& w : result.warnings) err << doc.id << ": " << w << '\n';
        for (auto& c : result.chunks) all.push_back(std::move(c));
    }
    std::vector<json> rows, dropped;
    if (no_filter) {
        for (const auto& c : all) rows.push_back(chunking::to_json(c));
    } else {
        auto filtered = chunking::filter_uninformative(std::move(all));
        for (const auto& c : filtered.kept) rows.push_back(chunking::to_json(c));
        for (const auto& d : filtered.dropped) {
            auto j = chunking::to_json(d.chunk);
            j["reason"] = d.reason;
            dropped.push_back(j);
        }
    }
    write_json_lines(out_path, rows);
    if (!dropped_path.empty()) write_json_lines(dropped_path, dropped);
    err << "wrote " << rows.size() << " chunks";
    if (!no_filter) err << " (" << dropped.size() << " dropped as uninformative)";
    err << '\n';
    return kExitOk;
}

int cmd_index_build(Context& ctx, const std::string& chunks_path, const std::string& kb, const std::string& out_dir,
                    std::size_t batch, std::ostream& err) {
    std::vector<chunking::Chunk> chunks;
    for (const auto& row : read_json_lines(chunks_path)) chunks.push_back(chunking::chunk_from_json(row));
    auto gw = ctx.gateway();
    const auto idx = retrieval::build_index(gw, kb, chunks, batch);
    idx->save(out_dir);
    err << "indexed " << idx->size() << " chunks into " << index::VectorIndex::index_path(out_dir, kb).string() << '\n';
    return kExitOk;
}

int cmd_index_query(Context& ctx, const std::string& index_path, const std::string& q, std::size_t n,
                    const std::string& filter, const std::string& out_path, std::ostream& out) {
    const auto idx = index::VectorIndex::load(index_path);
    auto gw = ctx.gateway();
    const auto vec = gw.embed({q}).at(0);
    std::vector<std::string> warnings;
    const auto f = filter.empty() ? index::FilterExpr{} : index::FilterExpr::parse(filter);
    const auto scored = index::rescore(vec, idx->hamming_top_n(index::binarize(vec), f, n),
                                       ctx.cfg().retrieval.similarity, &warnings);
    json results = json::array();
    for (const auto& s : scored) {
        results.push_back({{"chunk_id", s.entry->chunk_id}, {"hamming", s.hamming}, {"score", s.score}});
    }
    write_output({{"v", 1}, {"kb_id", idx->kb_id()}, {"results", results}, {"warnings", warnings}}, out_path, out);
    return kExitOk;
}

int cmd_query(Context& ctx, const std::string& q, const std::string& kbs, std::size_t k, const std::string& filter,
              const std::string& query_id, const std::string& out_path, std::ostream& out) {
    const auto rc = retrieval_config(ctx, kbs, k, filter);
    auto reg = ctx.registry();
    auto gw = ctx.gateway();
    const auto result = retrieval::run_pipeline(gw, *reg, q, {}, rc);
    auto j = retrieval::to_json(result);
    j["v"] = 1;
    j["raw_query"] = q;
    if (!query_id.empty()) j["query_id"] = query_id;
    j["config"] = rc.to_json();
    write_output(j, out_path, out);
    return kExitOk;
}

int cmd_answer(Context& ctx, const std::string& q, const std::string& kbs, std::size_t k, const std::string& filter,
               bool no_check, const std::string& out_path, std::ostream& out) {
    auto rc = retrieval_config(ctx, kbs, k, filter);
    service::AnswerEngine engine(ctx.gateway(), ctx.registry(), rc, ctx.cfg().budget);
    conversation::ConversationState state;
    state.session_id = "cli";
    service::AnswerOptions options;
    options.hallucination_check = !no_check;
    const auto response = engine.answer(state, q, options);
    write_output(service::to_json(response), out_path, out);
    return kExitOk;
}

int cmd_halluc_check(Context& ctx, const std::string& question, const std::string& answer, const std::string& kbs,
                     std::size_t k, const std::string& out_path, std::ostream& out) {
    const auto rc = retrieval_config(ctx, kbs, k, "");
    auto reg = ctx.registry();
    auto gw = ctx.gateway();
    auto found = retrieval::retrieve(gw, *reg, question, rc);
    auto evidence = retrieval::rerank_and_select(gw, question, std::move(found.pool), rc.k, rc.rerank_scope);
    hallucination::Pipeline pipeline(gw, *reg, rc);
    const auto trace = pipeline.run(question, answer, evidence.selected);
    auto j = hallucination::to_json(trace);
    j["v"] = 1;
    json calls = json::array();
    for (const auto& r : gw.log().records()) calls.push_back({{"role", r.role}, {"task", r.task}, {"ok", r.ok}});
    j["gateway_calls"] = calls;
    write_output(j, out_path, out);
    return kExitOk;
}

int cmd_replay(Context& ctx, const std::string& script, const std::string& out_path) {
    auto gw = ctx.gateway();
    conversation::ConversationManager manager(gw, ctx.cfg().budget);
    std::map<std::string, conversation::ConversationState> sessions;
    std::vector<json> traces;
    for (const auto& row : read_json_lines(script)) {
        const std::string sid = row.value("session_id", std::string("default"));
        auto& state = sessions[sid];
        state.session_id = sid;
        const std::string query = row.at("query").get<std::string>();
        std::vector<conversation::ContextChunk> chunks;
        for (const auto& c : row.value("chunks", json::array())) {
            chunks.push_back({c.at("id").get<std::string>(), c.at("text").get<std::string>(),
                              c.value("similarity", 0.0)});
        }
        const auto sections = manager.assemble_prompt(state, query, chunks);
        std::string answer;
        if (row.contains("answer")) {
            answer = row.at("answer").get<std::string>();
        } else {
            answer = gw.generate("answer_generate", {{"conversation", sections.conversation_text()},
                                                     {"context", sections.context.value_or("")},
                                                     {"query", sections.query.value_or("")}});
        }
        json trace{{"v", 1},
                   {"session_id", sid},
                   {"turn", state.turns.size() + 1},
                   {"summarizer_calls_before", state.summarizer_calls},
                   {"sections", conversation::to_json(sections)},
                   {"answer", answer}};
        manager.record_turn(state, {query, answer, sections.kept_chunks});
        trace["summary_after"] = state.summary;
        traces.push_back(std::move(trace));
    }
    write_json_lines(out_path, traces);
    return kExitOk;
}

std::vector<json> read_rows(const std::string& path) { return read_json_lines(path); }

int cmd_serve(Context& ctx, const std::string& host, int port, bool fake_clock, std::ostream& err) {
    auto& cfg = ctx.cfg();
    std::shared_ptr<service::Clock> clock;
    if (fake_clock) clock = std::make_shared<service::FakeClock>();
    else clock = std::make_shared<service::SteadyClock>();
    auto engine = std::make_shared<service::AnswerEngine>(ctx.gateway(), ctx.registry(), cfg.retrieval, cfg.budget, clock);
    service::Service svc(engine, cfg.service);
    const std::string h = host.empty() ? cfg.service.host : host;
    const int p = port >= 0 ? port : cfg.service.port;
    if (cfg.log_level != "warn" && cfg.log_level != "error" && cfg.log_level != "off") {
        err << "serving on " << h << ":" << p << '\n';
    }
    svc.listen(h, p);
    return kExitOk;
}

}  // namespace

// ============================================================================
// Dispatch
// ============================================================================

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ragkit: corpus cleaning, chunking, retrieval, grounded answering and evaluation"};
    app.name("ragkit");
    app.require_subcommand(1);
    Context ctx;
    app.add_option("--config", ctx.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--index-dir", ctx.index_dir, "Load every <kb>.idx in this directory");

    // clean
    std::string clean_in, clean_out, clean_report;
    bool near_dup = false, keep_dups = false;
    auto* clean = app.add_subcommand("clean", "Deduplicate and clean raw documents");
    clean->add_option("--in", clean_in, "Raw documents (JSON lines)")->required()->check(CLI::ExistingFile);
    clean->add_option("--out", clean_out, "Cleaned documents (JSON lines)")->required();
    clean->add_option("--report", clean_report, "Dedup report (JSON)");
    clean->add_flag("--near-dup", near_dup, "Add MinHash near-duplicate pairs to the report");
    clean->add_flag("--keep-duplicates", keep_dups, "Keep exact duplicates in the output");

    // chunk
    std::string chunk_in, chunk_out, chunk_dropped;
    std::size_t target = 0, hard_max = 0;
    bool no_fallback = false, no_filter = false;
    auto* chunk = app.add_subcommand("chunk", "Split cleaned documents into retrieval chunks");
    chunk->add_option("--in", chunk_in, "Cleaned documents (JSON lines)")->required()->check(CLI::ExistingFile);
    chunk->add_option("--out", chunk_out, "Chunks (JSON lines)")->required();
    chunk->add_option("--target", target, "Target words per chunk");
    chunk->add_option("--hard-max", hard_max, "Maximum words per chunk");
    chunk->add_flag("--no-sentence-fallback", no_fallback, "Split long paragraphs at words instead of sentences");
    chunk->add_flag("--no-filter", no_filter, "Keep uninformative chunks");
    chunk->add_option("--dropped", chunk_dropped, "Write filtered-out chunks here");

    // index
    auto* index_cmd = app.add_subcommand("index", "Build or probe a binary-quantized index");
    index_cmd->require_subcommand(1);
    std::string ib_chunks, ib_kb, ib_out;
    std::size_t ib_batch = 64;
    auto* build = index_cmd->add_subcommand("build", "Embed chunks and write <kb>.idx");
    build->add_option("--chunks", ib_chunks, "Chunks (JSON lines)")->required()->check(CLI::ExistingFile);
    build->add_option("--kb", ib_kb, "Knowledge base id")->required();
    build->add_option("--out-dir", ib_out, "Output directory")->required();
    build->add_option("--batch", ib_batch, "Texts per embed call")->check(CLI::PositiveNumber);
    std::string iq_index, iq_q, iq_filter, iq_out;
    std::size_t iq_n = 20;
    auto* probe = index_cmd->add_subcommand("query", "Hamming search plus rescoring on one index");
    probe->add_option("--index", iq_index, "Index file")->required()->check(CLI::ExistingFile);
    probe->add_option("--q", iq_q, "Query text")->required();
    probe->add_option("--n", iq_n, "Candidates")->check(CLI::PositiveNumber);
    probe->add_option("--filter", iq_filter, "Metadata filter, e.g. source=a;year=2020|2021");
    probe->add_option("--out", iq_out, "Output JSON");

    // query
    std::string q, kbs, filter, query_out, query_id;
    std::size_t k = 0;
    auto* query = app.add_subcommand("query", "Rewrite, retrieve and rerank");
    query->add_option("--q", q, "Query text")->required();
    query->add_option("--kbs", kbs, "Comma-separated knowledge bases");
    query->add_option("--k", k, "Final candidates")->check(CLI::PositiveNumber);
    query->add_option("--filter", filter, "Metadata filter");
    query->add_option("--query-id", query_id, "Id echoed into the output");
    query->add_option("--out", query_out, "Output JSON");

    // answer
    std::string aq, a_kbs, a_filter, a_out;
    std::size_t ak = 0;
    bool no_check = false;
    auto* answer = app.add_subcommand("answer", "Answer one question with retrieval and a hallucination check");
    answer->add_option("--q", aq, "Question")->required();
    answer->add_option("--kbs", a_kbs, "Comma-separated knowledge bases");
    answer->add_option("--k", ak, "Context chunks")->check(CLI::PositiveNumber);
    answer->add_option("--filter", a_filter, "Metadata filter");
    answer->add_flag("--no-check", no_check, "Skip the hallucination check");
    answer->add_option("--out", a_out, "Output JSON");

    // halluc-check
    std::string hq, ha, h_kbs, h_out;
    std::size_t hk = 0;
    auto* halluc = app.add_subcommand("halluc-check", "Detect and revise hallucinated answers");
    halluc->add_option("--question", hq, "Question")->required();
    halluc->add_option("--answer", ha, "Answer to check")->required();
    halluc->add_option("--kbs", h_kbs, "Comma-separated knowledge bases");
    halluc->add_option("--k", hk, "Evidence chunks")->check(CLI::PositiveNumber);
    halluc->add_option("--out", h_out, "Trace JSON");

    // replay
    std::string script, replay_out;
    auto* replay = app.add_subcommand("replay", "Replay a scripted conversation and emit prompt sections");
    replay->add_option("--script", script, "Dialogue (JSON lines)")->required()->check(CLI::ExistingFile);
    replay->add_option("--out", replay_out, "Per-turn traces (JSON lines)")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluation harness");
    eval_cmd->require_subcommand(1);
    std::string e_out, e_csv;
    auto out_opts = [&](CLI::App* c) {
        c->add_option("--out", e_out, "Report JSON (stdout when omitted)");
        c->add_option("--csv", e_csv, "Metrics CSV");
    };
    std::string er_samples, er_runs, er_docs;
    std::size_t er_at = 10;
    bool er_micro = false;
    auto* ev_ret = eval_cmd->add_subcommand("retrieval", "Token IoU/precision/recall, recall, RRR and MRR");
    ev_ret->add_option("--samples", er_samples, "Queries with gold ranges")->required()->check(CLI::ExistingFile);
    ev_ret->add_option("--runs", er_runs, "Ranked retrievals per query")->required()->check(CLI::ExistingFile);
    ev_ret->add_option("--at", er_at, "Cutoff")->check(CLI::PositiveNumber);
    ev_ret->add_option("--docs", er_docs, "Document texts for word-level tokens")->check(CLI::ExistingFile);
    ev_ret->add_flag("--micro", er_micro, "Headline metrics use micro averaging");
    out_opts(ev_ret);
    std::string eo_pred, eo_gold;
    auto* ev_ocr = eval_cmd->add_subcommand("ocr", "Normalized Levenshtein similarity");
    ev_ocr->add_option("--pred", eo_pred, "Predictions {id,text}")->required()->check(CLI::ExistingFile);
    ev_ocr->add_option("--gold", eo_gold, "Gold {id,text}")->required()->check(CLI::ExistingFile);
    out_opts(ev_ocr);
    std::string ej_answers, ej_judges = "mock:a";
    auto* ev_judge = eval_cmd->add_subcommand("judge", "Judge-panel scoring");
    ev_judge->add_option("--answers", ej_answers, "Answers {id,question,answer,reference[,context]}")
        ->required()
        ->check(CLI::ExistingFile);
    ev_judge->add_option("--judges", ej_judges, "Comma-separated judge endpoints (mock:<name> or URL)");
    out_opts(ev_judge);
    std::string ep_a, ep_b, ep_judges = "mock:a";
    auto* ev_pair = eval_cmd->add_subcommand("pairwise", "Pairwise win rate");
    ev_pair->add_option("--a", ep_a, "Model A answers")->required()->check(CLI::ExistingFile);
    ev_pair->add_option("--b", ep_b, "Model B answers")->required()->check(CLI::ExistingFile);
    ev_pair->add_option("--judges", ep_judges, "Comma-separated judge endpoints");
    out_opts(ev_pair);
    std::string em_pred, em_gold;
    auto* ev_mcqa = eval_cmd->add_subcommand("mcqa", "Multiple-choice accuracy and option IoU");
    ev_mcqa->add_option("--pred", em_pred, "Predictions {id,answer}")->required()->check(CLI::ExistingFile);
    ev_mcqa->add_option("--gold", em_gold, "Gold {id,answer}")->required()->check(CLI::ExistingFile);
    out_opts(ev_mcqa);
    std::string eh_pred, eh_gold;
    auto* ev_hal = eval_cmd->add_subcommand("halluc", "F1 on the hallucinated class");
    ev_hal->add_option("--pred", eh_pred, "Predictions {id,hallucinated}")->required()->check(CLI::ExistingFile);
    ev_hal->add_option("--gold", eh_gold, "Gold {id,hallucinated}")->required()->check(CLI::ExistingFile);
    out_opts(ev_hal);
    std::string es_docs, es_out;
    std::size_t es_window = 200, es_per_doc = 1;
    auto* ev_synth = eval_cmd->add_subcommand("synth", "Generate a semi-synthetic retrieval eval set");
    ev_synth->add_option("--docs", es_docs, "Cleaned documents")->required()->check(CLI::ExistingFile);
    ev_synth->add_option("--out", es_out, "Samples (JSON lines)")->required();
    ev_synth->add_option("--window", es_window, "Words per prompt window")->check(CLI::PositiveNumber);
    ev_synth->add_option("--per-doc", es_per_doc, "Samples per document")->check(CLI::PositiveNumber);

    // serve
    std::string s_host;
    int s_port = -1;
    bool s_fake_clock = false;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--host", s_host, "Bind address");
    serve->add_option("--port", s_port, "Port (0 picks a free one)");
    serve->add_flag("--fake-clock", s_fake_clock, "Deterministic stage timings");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (clean->parsed()) return cmd_clean(ctx, clean_in, clean_out, clean_report, near_dup, keep_dups, err);
        if (chunk->parsed()) {
            return cmd_chunk(ctx, chunk_in, chunk_out, target, hard_max, no_fallback, no_filter, chunk_dropped, err);
        }
        if (build->parsed()) return cmd_index_build(ctx, ib_chunks, ib_kb, ib_out, ib_batch, err);
        if (probe->parsed()) return cmd_index_query(ctx, iq_index, iq_q, iq_n, iq_filter, iq_out, out);
        if (query->parsed()) return cmd_query(ctx, q, kbs, k, filter, query_id, query_out, out);
        if (answer->parsed()) return cmd_answer(ctx, aq, a_kbs, ak, a_filter, no_check, a_out, out);
        if (halluc->parsed()) return cmd_halluc_check(ctx, hq, ha, h_kbs, hk, h_out, out);
        if (replay->parsed()) return cmd_replay(ctx, script, replay_out);
        if (ev_ret->parsed()) {
            const auto samples = eval::load_retrieval_samples(er_samples, er_runs);
            const eval::TokenSpace space =
                er_docs.empty() ? eval::TokenSpace{} : eval::TokenSpace(eval::load_doc_texts(er_docs));
            auto report = eval::eval_retrieval(samples, space, {er_at, er_micro});
            if (er_docs.empty()) report.flags.push_back("no --docs given; tokens are bytes");
            finish_report(report, e_out, e_csv, out);
            return kExitOk;
        }
        if (ev_ocr->parsed()) {
            finish_report(eval::eval_ocr(read_rows(eo_pred), read_rows(eo_gold)), e_out, e_csv, out);
            return kExitOk;
        }
        if (ev_judge->parsed()) {
            auto judges = make_judges(ctx, ej_judges);
            finish_report(eval::eval_judge(read_rows(ej_answers), judges), e_out, e_csv, out);
            return kExitOk;
        }
        if (ev_pair->parsed()) {
            auto judges = make_judges(ctx, ep_judges);
            finish_report(eval::eval_pairwise(read_rows(ep_a), read_rows(ep_b), judges), e_out, e_csv, out);
            return kExitOk;
        }
        if (ev_mcqa->parsed()) {
            finish_report(eval::eval_mcqa(read_rows(em_pred), read_rows(em_gold)), e_out, e_csv, out);
            return kExitOk;
        }
        if (ev_hal->parsed()) {
            finish_report(eval::eval_hallucination(read_rows(eh_pred), read_rows(eh_gold)), e_out, e_csv, out);
            return kExitOk;
        }
        if (ev_synth->parsed()) {
            std::vector<corpus::CleanDocument> docs;
            for (const auto& row : read_rows(es_docs)) docs.push_back(corpus::clean_document_from_json(row));
            auto gw = ctx.gateway();
            const auto result = eval::generate_eval_set(gw, docs, {es_window, es_per_doc});
            write_json_lines(es_out, result.samples);
            for (const auto& f : result.flags) err << f << '\n';
            return kExitOk;
        }
        if (serve->parsed()) return cmd_serve(ctx, s_host, s_port, s_fake_clock, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace ragkit::cli
