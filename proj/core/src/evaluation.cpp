#include "pverify/evaluation.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace pverify {

std::vector<Prediction> postprocess(std::vector<Prediction> preds) {
    for (auto& p : preds)
        if (p.predicted_sentences.empty()) p.predicted_label = Stance::NoInfo;
    return preds;
}

PRF1 make_prf1(double tp, double n_predicted, double n_gold) {
    PRF1 r;
    r.precision = n_predicted > 0 ? tp / n_predicted : 0.0;
    r.recall = n_gold > 0 ? tp / n_gold : 0.0;
    r.f1 = (r.precision + r.recall) > 0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

namespace {

const Evidence* find_evidence(const std::vector<Claim>& gold, int64_t claim_id,
                              int64_t doc_id) {
    for (const auto& c : gold) {
        if (c.claim_id != claim_id) continue;
        auto it = c.evidence.find(doc_id);
        return it == c.evidence.end() ? nullptr : &it->second;
    }
    return nullptr;
}

std::set<int> gold_sentence_union(const Evidence& ev) {
    std::set<int> out;
    for (const auto& set : ev.rationale_sets) out.insert(set.begin(), set.end());
    return out;
}

}  // namespace

PRF1 sentence_level_f1(const std::vector<Prediction>& preds,
                       const std::vector<Claim>& gold, bool require_label) {
    double tp = 0, n_pred = 0, n_gold = 0;
    for (const auto& c : gold)
        for (const auto& [_, ev] : c.evidence)
            n_gold += static_cast<double>(gold_sentence_union(ev).size());

    for (const auto& p : preds) {
        n_pred += static_cast<double>(p.predicted_sentences.size());
        const Evidence* ev = find_evidence(gold, p.claim_id, p.doc_id);
        if (!ev) continue;
        if (require_label && p.predicted_label != ev->label) continue;
        auto gold_set = gold_sentence_union(*ev);
        for (int s : p.predicted_sentences)
            if (gold_set.count(s)) tp += 1.0;
    }
    return make_prf1(tp, n_pred, n_gold);
}

PRF1 abstract_level_f1(const std::vector<Prediction>& preds,
                       const std::vector<Claim>& gold, bool require_rationale) {
    double tp = 0, n_pred = 0, n_gold = 0;
    for (const auto& c : gold) n_gold += static_cast<double>(c.evidence.size());

    for (const auto& p : preds) {
        if (p.predicted_label == Stance::NoInfo) continue;
        n_pred += 1.0;
        const Evidence* ev = find_evidence(gold, p.claim_id, p.doc_id);
        if (!ev || p.predicted_label != ev->label) continue;
        if (require_rationale) {
            std::set<int> predicted(p.predicted_sentences.begin(),
                                    p.predicted_sentences.end());
            bool covered = std::any_of(
                ev->rationale_sets.begin(), ev->rationale_sets.end(),
                [&](const std::vector<int>& set) {
                    return std::all_of(set.begin(), set.end(),
                                       [&](int s) { return predicted.count(s) > 0; });
                });
            if (!covered) continue;
        }
        tp += 1.0;
    }
    return make_prf1(tp, n_pred, n_gold);
}

PRF1 retrieval_metrics(
    const std::vector<std::pair<int64_t, std::vector<int64_t>>>& retrieved,
    const std::vector<Claim>& gold) {
    std::map<int64_t, std::set<int64_t>> gold_docs;
    double n_gold = 0;
    for (const auto& c : gold) {
        for (const auto& [doc_id, _] : c.evidence) gold_docs[c.claim_id].insert(doc_id);
        n_gold += static_cast<double>(c.evidence.size());
    }
    double tp = 0, n_pred = 0;
    for (const auto& [claim_id, docs] : retrieved) {
        n_pred += static_cast<double>(docs.size());
        auto it = gold_docs.find(claim_id);
        if (it == gold_docs.end()) continue;
        for (int64_t d : docs)
            if (it->second.count(d)) tp += 1.0;
    }
    return make_prf1(tp, n_pred, n_gold);
}

MetricsReport compute_metrics(const std::vector<Prediction>& preds,
                              const std::vector<Claim>& gold) {
    MetricsReport r;
    r.sentence_selection_only = sentence_level_f1(preds, gold, false);
    r.sentence_selection_label = sentence_level_f1(preds, gold, true);
    r.abstract_label_only = abstract_level_f1(preds, gold, false);
    r.abstract_label_rationale = abstract_level_f1(preds, gold, true);
    return r;
}

}  // namespace pverify
