#include "memerl/inference.hpp"

#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/util.hpp"

namespace memerl {

BestOfNSelection select_best_of_n(const std::vector<std::string>& candidates, const RewardOptions& options) {
    if (candidates.empty()) throw InvalidConfig("best-of-n needs at least one candidate");
    std::vector<std::optional<Label>> labels;
    std::size_t hateful = 0, non_hateful = 0;
    std::optional<Label> first;
    for (const auto& c : candidates) {
        labels.push_back(extract_fields(c).label);
        if (!labels.back()) continue;
        if (!first) first = labels.back();
        (*labels.back() == Label::Hateful ? hateful : non_hateful) += 1;
    }
    BestOfNSelection sel;
    if (!first) return sel;
    sel.label = hateful == non_hateful ? *first : (hateful > non_hateful ? Label::Hateful : Label::NonHateful);
    double best = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (labels[i] != sel.label) continue;
        const double s = gold_free_score(candidates[i], options);
        if (s > best) {
            best = s;
            sel.index = i;
        }
    }
    return sel;
}

InferenceResult infer_best_of_n(const ToyPolicy& policy, const PromptFeatures& prompt, std::size_t n,
                                const DecodeConfig& decode, std::mt19937_64& rng, const RewardOptions& options) {
    if (n == 0) throw InvalidConfig("best-of-n needs n >= 1");
    InferenceResult res{FormatReport{}, {}, 0};
    for (std::size_t i = 0; i < n; ++i)
        res.candidates.push_back(policy.vocab().render(sample(policy, prompt, decode, rng).tokens));
    const auto sel = select_best_of_n(res.candidates, options);
    res.selected = sel.index;
    const auto fields = extract_fields(res.candidates[sel.index]);
    if (!sel.label) {
        res.output = fields.report;
        return res;
    }
    StructuredOutput out;
    out.think = fields.think;
    out.label = *sel.label;
    out.explanation = fields.explanation.value_or("");
    out.raw = res.candidates[sel.index];
    res.output = std::move(out);
    return res;
}

InferenceResult infer_best_of_n(const ToyPolicy& policy, std::string_view prompt, std::size_t n,
                                const DecodeConfig& decode, std::mt19937_64& rng, const RewardOptions& options) {
    return infer_best_of_n(policy, policy.encode_prompt(prompt), n, decode, rng, options);
}

std::optional<Label> predicted_label(const InferenceResult& result) {
    if (const auto* out = std::get_if<StructuredOutput>(&result.output)) return out->label;
    return std::nullopt;
}

EvalReport evaluate(const ToyPolicy& policy, const std::vector<MemeRecord>& records, const EvalOptions& options) {
    validate(options.decode);
    if (options.best_of == 0) throw InvalidConfig("eval.best_of must be at least 1");
    EvalReport rep;
    rep.records = records.size();
    rep.best_of = options.best_of;
    std::vector<std::optional<Label>> preds;
    std::vector<Label> golds;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::mt19937_64 rng(derive_seed(options.decode.rng_seed, i));
        const auto res = infer_best_of_n(policy, build_prompt(r, options.prompt), options.best_of, options.decode,
                                         rng, options.reward);
        EvalPrediction p;
        p.id = r.id;
        p.gold = r.label;
        p.pred = predicted_label(res);
        p.output = res.candidates[res.selected];
        const auto fields = extract_fields(p.output);
        p.compliant = fields.report.compliant;
        if (fields.explanation && !trim(*fields.explanation).empty() && !trim(r.gold_explanation).empty())
            p.meteor = meteor(*fields.explanation, r.gold_explanation, options.reward.meteor);
        if (!p.pred) ++rep.parse_failures;
        if (!p.compliant) ++rep.non_compliant;
        rep.mean_meteor += p.meteor;
        preds.push_back(p.pred);
        golds.push_back(r.label);
        rep.predictions.push_back(std::move(p));
    }
    if (!records.empty()) rep.mean_meteor /= static_cast<double>(records.size());
    rep.classification = classification_report(preds, golds);
    return rep;
}

namespace {

nlohmann::ordered_json class_json(const ClassMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

}  // namespace

std::string eval_report_to_json(const EvalReport& rep) {
    nlohmann::ordered_json j;
    j["split"] = rep.split;
    j["records"] = rep.records;
    j["best_of"] = rep.best_of;
    j["selection"] = rep.best_of > 1 ? strprintf("best-of-%zu: majority label, then gold-free score", rep.best_of)
                                     : std::string("single sample");
    const auto& c = rep.classification;
    j["accuracy"] = c.accuracy;
    j["weighted_f1"] = c.weighted_f1;
    j["macro_f1"] = c.macro_f1;
    j["mean_meteor"] = rep.mean_meteor;
    j["parse_failures"] = rep.parse_failures;
    j["non_compliant"] = rep.non_compliant;
    j["per_class"] = {{"hateful", class_json(c.hateful)}, {"not_hateful", class_json(c.non_hateful)}};
    j["confusion"] = {{"hateful", c.confusion.counts[0]}, {"not_hateful", c.confusion.counts[1]}};
    auto& preds = j["predictions"] = nlohmann::ordered_json::array();
    for (const auto& p : rep.predictions)
        preds.push_back({{"id", p.id},
                         {"gold", std::string(label_name(p.gold))},
                         {"pred", p.pred ? nlohmann::ordered_json(std::string(label_name(*p.pred))) : nlohmann::ordered_json()},
                         {"compliant", p.compliant},
                         {"meteor", p.meteor},
                         {"output", p.output}});
    return j.dump(2) + "\n";
}

std::string eval_report_csv_row(const EvalReport& rep) {
    const auto& c = rep.classification;
    return rep.split + strprintf(",%zu,%zu,", rep.records, rep.best_of) + format_double(c.accuracy) + "," +
           format_double(c.weighted_f1) + "," + format_double(c.macro_f1) + "," + format_double(rep.mean_meteor) +
           strprintf(",%zu,%zu", rep.parse_failures, rep.non_compliant);
}

}  // namespace memerl
