#include "ragkit/eval.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ragkit/json_lines.hpp"
#include "ragkit/text_util.hpp"

namespace ragkit::eval {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump();
}

std::map<std::string, json> index_by_id(const std::vector<json>& rows, const std::string& what) {
    std::map<std::string, json> out;
    for (const auto& r : rows) {
        const auto id = scalar_text(r.at("id"));
        if (!out.emplace(id, r).second) throw std::invalid_argument(what + ": duplicate id '" + id + "'");
    }
    return out;
}

DocRange range_from_json(const json& j) {
    DocRange r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.span = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
    if (r.span.end < r.span.start) throw std::invalid_argument("range end precedes start in " + r.doc_id);
    return r;
}

json range_to_json(const DocRange& r) { return {{"doc_id", r.doc_id}, {"start", r.span.start}, {"end", r.span.end}}; }

}  // namespace

json EvalReport::to_json() const {
    return {{"v", kReportVersion},
            {"kind", kind},
            {"metrics", metrics},
            {"samples", samples},
            {"config", config},
            {"flags", flags}};
}

std::string EvalReport::metrics_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "metric,value\n";
    for (const auto& [name, value] : metrics) out << csv_field(name) << ',' << value << '\n';
    return out.str();
}

std::string EvalReport::samples_csv() const {
    std::vector<std::string> columns;
    std::set<std::string> seen;
    for (const auto& s : samples) {
        for (const auto& [key, value] : s.items()) {
            if (value.is_primitive() && seen.insert(key).second) columns.push_back(key);
        }
    }
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_field(columns[i]);
    out += '\n';
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            const auto it = s.find(columns[i]);
            if (it != s.end()) out += csv_field(scalar_text(*it));
        }
        out += '\n';
    }
    return out;
}

// ============================================================================
// Retrieval
// ============================================================================

std::vector<RetrievalEvalSample> load_retrieval_samples(const std::filesystem::path& samples_path,
                                                        const std::filesystem::path& runs_path) {
    std::map<std::string, std::vector<DocRange>> runs;
    for (const auto& row : read_json_lines(runs_path)) {
        const auto id = scalar_text(row.at("query_id"));
        const json& list = row.contains("retrieved") ? row.at("retrieved") : row.at("candidates");
        std::vector<DocRange> ranked;
        for (const auto& c : list) ranked.push_back(range_from_json(c));
        if (!runs.emplace(id, std::move(ranked)).second) {
            throw std::invalid_argument(runs_path.string() + ": duplicate query_id '" + id + "'");
        }
    }
    std::vector<RetrievalEvalSample> out;
    for (const auto& row : read_json_lines(samples_path)) {
        RetrievalEvalSample s;
        s.query_id = scalar_text(row.at("query_id"));
        s.query = row.value("query", std::string{});
        for (const auto& g : row.at("gold")) s.gold.push_back(range_from_json(g));
        if (auto it = runs.find(s.query_id); it != runs.end()) s.retrieved = it->second;
        out.push_back(std::move(s));
    }
    return out;
}

std::map<std::string, std::string> load_doc_texts(const std::filesystem::path& docs) {
    std::map<std::string, std::string> out;
    for (const auto& row : read_json_lines(docs)) out[row.at("id").get<std::string>()] = row.at("text").get<std::string>();
    return out;
}

EvalReport eval_retrieval(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space,
                          const RetrievalEvalOptions& options) {
    if (samples.empty()) throw MetricError("no retrieval samples");
    if (options.at == 0) throw std::invalid_argument("--at must be at least 1");
    EvalReport report;
    report.kind = "retrieval";
    report.config = {{"at", options.at},
                     {"averaging", options.micro ? "micro" : "macro"},
                     {"token_unit", "word positions by byte offset; bytes where document text is absent"}};

    std::vector<SampleTokenResult> token_results;
    std::vector<std::optional<std::size_t>> first_ranks;
    for (const auto& s : samples) {
        auto r = sample_token_metrics(s, space, options.at);
        json row{{"query_id", s.query_id}, {"retrieved", std::min(options.at, s.retrieved.size())}};
        if (r.metrics) {
            row["iou"] = r.metrics->iou;
            row["precision"] = r.metrics->precision;
            row["recall"] = r.metrics->recall;
            const auto rank = first_relevant_rank(s, space, options.at);
            row["first_relevant_rank"] = rank ? json(*rank) : json(nullptr);
            first_ranks.push_back(rank);
        } else {
            row["excluded"] = r.excluded_reason;
            report.flags.push_back(s.query_id + ": " + r.excluded_reason);
        }
        report.samples.push_back(row);
        token_results.push_back(std::move(r));
    }
    const auto agg = aggregate_token_metrics(token_results);
    const auto& head = options.micro ? agg.micro : agg.macro;
    report.metrics["iou"] = head.iou;
    report.metrics["precision"] = head.precision;
    report.metrics["recall"] = head.recall;
    report.metrics["iou_macro"] = agg.macro.iou;
    report.metrics["precision_macro"] = agg.macro.precision;
    report.metrics["recall_macro"] = agg.macro.recall;
    report.metrics["iou_micro"] = agg.micro.iou;
    report.metrics["precision_micro"] = agg.micro.precision;
    report.metrics["recall_micro"] = agg.micro.recall;
    report.metrics["samples_evaluated"] = static_cast<double>(agg.evaluated);
    report.metrics["samples_excluded"] = static_cast<double>(agg.excluded);

    const auto dpr = doc_passage_recall(samples, space, options.at);
    report.metrics["doc_recall"] = dpr.doc_recall;
    report.metrics["passage_recall"] = dpr.passage_recall;
    const std::string suffix = "@" + std::to_string(options.at);
    report.metrics["rrr" + suffix] = ref_retrieved_ratio_at(first_ranks, options.at);
    report.metrics["mrr" + suffix] = mrr_at(first_ranks, options.at);
    return report;
}

// ============================================================================
// OCR
// ============================================================================

EvalReport eval_ocr(const std::vector<json>& pred, const std::vector<json>& gold) {
    const auto preds = index_by_id(pred, "pred");
    EvalReport report;
    report.kind = "ocr";
    report.config = {{"unit", "unicode code points"}};
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& g : gold) {
        const auto id = scalar_text(g.at("id"));
        const auto it = preds.find(id);
        if (it == preds.end()) {
            report.flags.push_back(id + ": no prediction; scored as empty text");
        }
        const std::string p = it == preds.end() ? std::string{} : it->second.at("text").get<std::string>();
        const double v = nls(p, g.at("text").get<std::string>());
        report.samples.push_back({{"id", id}, {"nls", v}});
        sum += v;
        ++n;
    }
    if (n == 0) throw MetricError("no OCR gold samples");
    report.metrics["nls"] = sum / static_cast<double>(n);
    report.metrics["samples"] = static_cast<double>(n);
    return report;
}

// ============================================================================
// Judges
// ============================================================================

JudgePanelResult judge_panel_score(const std::string& question, const std::string& answer,
                                   const std::string& reference, const std::optional<std::string>& context,
                                   std::vector<gateway::Judge>& judges) {
    std::vector<std::optional<int>> scores;
    std::vector<std::string> names;
    std::vector<std::string> errors;
    for (auto& j : judges) {
        names.push_back(j.name());
        try {
            scores.push_back(j.score(question, answer, reference, context));
        } catch (const gateway::ParseError& e) {
            scores.push_back(std::nullopt);
            errors.push_back(j.name() + ": " + e.what());
        } catch (const gateway::GatewayError& e) {
            scores.push_back(std::nullopt);
            errors.push_back(j.name() + ": " + e.what());
        }
    }
    auto result = aggregate_judge_scores(scores, names);
    result.flags.insert(result.flags.end(), errors.begin(), errors.end());
    return result;
}

EvalReport eval_judge(const std::vector<json>& answers, std::vector<gateway::Judge>& judges) {
    if (judges.empty()) throw std::invalid_argument("at least one judge is required");
    EvalReport report;
    report.kind = "judge";
    json names = json::array();
    for (const auto& j : judges) names.push_back(j.name());
    report.config = {{"judges", names}, {"normalization", "score x 20"}};
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : answers) {
        const auto id = scalar_text(a.at("id"));
        std::optional<std::string> context;
        if (a.contains("context") && !a.at("context").is_null()) context = a.at("context").get<std::string>();
        json row{{"id", id}};
        try {
            const auto panel = judge_panel_score(a.at("question").get<std::string>(), a.at("answer").get<std::string>(),
                                                 a.at("reference").get<std::string>(), context, judges);
            row["score"] = panel.mean;
            json per = json::object();
            for (std::size_t i = 0; i < judges.size(); ++i) {
                per[judges[i].name()] = panel.per_judge[i] ? json(*panel.per_judge[i]) : json(nullptr);
            }
            row["per_judge"] = per;
            for (const auto& f : panel.flags) report.flags.push_back(id + ": " + f);
            sum += panel.mean;
            ++n;
        } catch (const MetricError& e) {
            row["error"] = e.what();
            report.flags.push_back(id + ": " + e.what());
        }
        report.samples.push_back(row);
    }
    if (n == 0) throw MetricError("no answer received a usable judge score");
    report.metrics["mean_score"] = sum / static_cast<double>(n);
    report.metrics["samples_scored"] = static_cast<double>(n);
    report.metrics["samples_failed"] = static_cast<double>(answers.size() - n);
    return report;
}

EvalReport eval_pairwise(const std::vector<json>& a, const std::vector<json>& b, std::vector<gateway::Judge>& judges) {
    if (judges.empty()) throw std::invalid_argument("at least one judge is required");
    const auto bs = index_by_id(b, "b");
    EvalReport report;
    report.kind = "pairwise";
    std::vector<EvaluatorTally> tally(judges.size());
    for (const auto& row : a) {
        const auto id = scalar_text(row.at("id"));
        const auto it = bs.find(id);
        if (it == bs.end()) {
            report.flags.push_back(id + ": missing from b; skipped");
            continue;
        }
        json sample{{"id", id}};
        json verdicts = json::object();
        for (std::size_t i = 0; i < judges.size(); ++i) {
            try {
                const auto v = judges[i].compare(row.at("question").get<std::string>(),
                                                 row.at("reference").get<std::string>(),
                                                 row.at("answer").get<std::string>(),
                                                 it->second.at("answer").get<std::string>());
                verdicts[judges[i].name()] = gateway::to_string(v);
                if (v == gateway::PairwiseVerdict::a) ++tally[i].wins;
                else if (v == gateway::PairwiseVerdict::b) ++tally[i].losses;
                else ++tally[i].ties;
            } catch (const std::exception& e) {
                verdicts[judges[i].name()] = nullptr;
                report.flags.push_back(id + ": " + judges[i].name() + ": " + e.what());
            }
        }
        sample["verdicts"] = verdicts;
        report.samples.push_back(sample);
    }
    std::vector<EvaluatorTally> mirrored;
    json tallies = json::object();
    for (std::size_t i = 0; i < judges.size(); ++i) {
        mirrored.push_back({tally[i].losses, tally[i].ties, tally[i].wins});
        tallies[judges[i].name()] = {{"wins_a", tally[i].wins}, {"ties", tally[i].ties}, {"losses_a", tally[i].losses}};
    }
    report.config = {{"evaluators", tallies}};
    report.metrics["win_rate_a"] = win_rate(tally);
    report.metrics["win_rate_b"] = win_rate(mirrored);
    return report;
}

EvalReport eval_mcqa(const std::vector<json>& pred, const std::vector<json>& gold) {
    const auto preds = index_by_id(pred, "pred");
    EvalReport report;
    report.kind = "mcqa";
    std::vector<OptionSet> p, g;
    for (const auto& row : gold) {
        const auto id = scalar_text(row.at("id"));
        const auto it = preds.find(id);
        if (it == preds.end()) report.flags.push_back(id + ": no prediction; scored as empty");
        p.push_back(it == preds.end() ? OptionSet{} : parse_options(it->second.at("answer").get<std::string>()));
        g.push_back(parse_options(row.at("answer").get<std::string>()));
        report.samples.push_back({{"id", id}, {"correct", p.back() == g.back()}, {"iou", option_iou(p.back(), g.back())}});
    }
    const auto s = mcqa_score(p, g);
    report.metrics["accuracy"] = s.accuracy;
    report.metrics["iou"] = s.iou;
    return report;
}

EvalReport eval_hallucination(const std::vector<json>& pred, const std::vector<json>& gold) {
    const auto preds = index_by_id(pred, "pred");
    EvalReport report;
    report.kind = "hallucination";
    std::vector<bool> p, g;
    for (const auto& row : gold) {
        const auto id = scalar_text(row.at("id"));
        const auto it = preds.find(id);
        if (it == preds.end()) throw std::invalid_argument("no prediction for id '" + id + "'");
        p.push_back(it->second.at("hallucinated").get<bool>());
        g.push_back(row.at("hallucinated").get<bool>());
    }
    const auto f = hallucination_f1(p, g);
    report.metrics["f1"] = f.f1;
    report.metrics["precision"] = f.precision;
    report.metrics["recall"] = f.recall;
    report.config = {{"tp", f.tp}, {"fp", f.fp}, {"fn", f.fn}, {"tn", f.tn}, {"positive_class", "hallucinated"}};
    return report;
}

// ============================================================================
// Semi-synthetic eval sets
// ============================================================================

namespace {

// Byte range of `excerpt` in `text`, matching word by word so whitespace
// differences are tolerated.
std::optional<ByteSpan> locate_excerpt(std::string_view text, std::string_view excerpt) {
    if (trim(excerpt).empty()) return std::nullopt;
    if (const auto pos = text.find(trim(excerpt)); pos != std::string_view::npos) {
        return ByteSpan{pos, pos + trim(excerpt).size()};
    }
    const auto tw = word_spans(text);
    const auto ew = word_spans(excerpt);
    if (ew.empty() || ew.size() > tw.size()) return std::nullopt;
    for (std::size_t i = 0; i + ew.size() <= tw.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < ew.size() && ok; ++k) {
            ok = text.substr(tw[i + k].start, tw[i + k].size()) == excerpt.substr(ew[k].start, ew[k].size());
        }
        if (ok) return ByteSpan{tw[i].start, tw[i + ew.size() - 1].end};
    }
    return std::nullopt;
}

}  // namespace

SyntheticResult generate_eval_set(gateway::ModelGateway& gw, const std::vector<corpus::CleanDocument>& docs,
                                  const SyntheticOptions& options) {
    if (options.passage_words == 0) throw std::invalid_argument("passage_words must be positive");
    SyntheticResult out;
    for (const auto& doc : docs) {
        const auto words = word_spans(doc.text);
        for (std::size_t w = 0, made = 0; w < words.size() && made < options.per_doc; w += options.passage_words, ++made) {
            const std::size_t last = std::min(words.size(), w + options.passage_words) - 1;
            const std::string window = doc.text.substr(words[w].start, words[last].end - words[w].start);
            const std::string qid = doc.id + "/q" + std::to_string(made);
            json parsed;
            try {
                const auto obj = gateway::extract_json_object(gw.generate("eval_query_generation", {{"text", window}}));
                if (!obj || !obj->contains("query") || !obj->contains("excerpt")) {
                    out.flags.push_back(qid + ": unparsable generator output; skipped");
                    continue;
                }
                parsed = *obj;
            } catch (const gateway::GatewayError& e) {
                out.flags.push_back(qid + ": " + e.what() + "; skipped");
                continue;
            }
            const auto span = locate_excerpt(window, parsed.at("excerpt").get<std::string>());
            if (!span) {
                out.flags.push_back(qid + ": excerpt not found in the passage; skipped");
                continue;
            }
            const DocRange gold{doc.id, {words[w].start + span->start, words[w].start + span->end}};
            out.samples.push_back(
                {{"query_id", qid}, {"query", parsed.at("query").get<std::string>()}, {"gold", json::array({range_to_json(gold)})}});
        }
    }
    return out;
}

}  // namespace ragkit::eval
