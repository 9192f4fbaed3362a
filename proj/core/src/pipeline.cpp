#include "pverify/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "pverify/evaluation.hpp"

namespace pverify {

using nlohmann::json;

PipelineTask pipeline_task_from_name(const std::string& name) {
    if (name == "open") return PipelineTask::Open;
    if (name == "oracle") return PipelineTask::Oracle;
    throw ConfigError("unknown pipeline task: " + name);
}

namespace {

std::vector<int64_t> candidate_docs(const PipelineConfig& config,
                                    const RetrievalIndex* index,
                                    const Claim& claim, const Corpus& corpus) {
    if (config.task == PipelineTask::Oracle) {
        std::set<int64_t> docs;
        for (const auto& [doc_id, _] : claim.evidence) docs.insert(doc_id);
        for (int64_t id : claim.cited_doc_ids)
            if (corpus.contains(id)) docs.insert(id);
        return {docs.begin(), docs.end()};
    }
    if (!index) throw ConfigError("open task requires a retrieval index");
    std::vector<int64_t> docs;
    for (const auto& r : retrieve(*index, claim.text,
                                  static_cast<size_t>(config.k_retrieval)))
        docs.push_back(r.doc_id);
    return docs;
}

Stance argmax_stance(const std::array<double, 3>& probs) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (probs[i] > probs[best]) best = i;
    return best == 0 ? Stance::Supports : best == 1 ? Stance::Refutes : Stance::NoInfo;
}

}  // namespace

std::vector<Prediction> run_pipeline(const PipelineConfig& config,
                                     const JointModel& model,
                                     const RetrievalIndex* index,
                                     const std::vector<Claim>& claims,
                                     const Corpus& corpus,
                                     std::vector<ModelOutput>* outputs) {
    std::vector<Prediction> preds;
    for (const Claim& claim : claims) {
        for (int64_t doc_id : candidate_docs(config, index, claim, corpus)) {
            const AbstractDoc& doc = corpus.at(doc_id);
            ModelOutput out = model.predict(claim.claim_id, doc_id, claim.text,
                                            doc.sentences, config.domain);
            Prediction p;
            p.claim_id = claim.claim_id;
            p.doc_id = doc_id;
            p.predicted_sentences = out.selected;
            p.predicted_label = argmax_stance(out.stance_probs);
            preds.push_back(std::move(p));
            if (outputs) outputs->push_back(std::move(out));
        }
    }
    return postprocess(std::move(preds));
}

void save_predictions(const std::vector<Prediction>& preds,
                      const std::filesystem::path& path) {
    // Group by claim, one submission line per claim.
    std::map<int64_t, std::vector<const Prediction*>> by_claim;
    for (const auto& p : preds) by_claim[p.claim_id].push_back(&p);
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    for (const auto& [claim_id, claim_preds] : by_claim) {
        json evidence = json::object();
        for (const auto* p : claim_preds) {
            if (p->predicted_label == Stance::NoInfo) continue;
            evidence[std::to_string(p->doc_id)] = {
                {"sentences", p->predicted_sentences},
                {"label", p->predicted_label == Stance::Supports ? "SUPPORT"
                                                                 : "CONTRADICT"}};
        }
        out << json{{"id", claim_id}, {"evidence", evidence}}.dump() << '\n';
    }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<Prediction> preds;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                             e.what());
        }
        int64_t claim_id = j.at("id").get<int64_t>();
        for (const auto& [doc_key, ev] : j.at("evidence").items()) {
            Prediction p;
            p.claim_id = claim_id;
            p.doc_id = std::stoll(doc_key);
            p.predicted_sentences = ev.at("sentences").get<std::vector<int>>();
            p.predicted_label = stance_from_name(ev.at("label").get<std::string>());
            preds.push_back(std::move(p));
        }
    }
    return preds;
}

void save_model_outputs(const std::vector<ModelOutput>& outputs,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    for (const auto& o : outputs) {
        json j{{"claim_id", o.claim_id},
               {"doc_id", o.doc_id},
               {"rationale_probs", o.rationale_probs},
               {"selected", o.selected},
               {"stance_probs", {o.stance_probs[0], o.stance_probs[1], o.stance_probs[2]}}};
        out << j.dump() << '\n';
    }
}

}  // namespace pverify
