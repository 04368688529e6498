#include "memerl/modelsvc.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/resources.hpp"
#include "memerl/util.hpp"

namespace memerl {

void validate(const ServiceClientConfig& c) {
    if (c.endpoint.empty()) throw InvalidConfig("modelsvc.endpoint must be set");
    if (c.max_concurrency == 0) throw InvalidConfig("modelsvc.max_concurrency must be at least 1");
    if (c.timeout.count() <= 0) throw InvalidConfig("modelsvc.timeout_ms must be positive");
    if (!(c.retry.backoff_multiplier >= 1.0)) throw InvalidConfig("modelsvc.backoff_multiplier must be >= 1");
    if (c.retry.initial_backoff.count() < 0) throw InvalidConfig("modelsvc.backoff_ms must be non-negative");
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& p, std::size_t attempt) {
    const double ms = static_cast<double>(p.initial_backoff.count()) *
                      std::pow(p.backoff_multiplier, static_cast<double>(attempt));
    const double capped = std::min(ms, static_cast<double>(p.max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(capped));
}

std::string complete_with_retries(ChatClient& client, const std::vector<ChatMessage>& messages,
                                  const RetryPolicy& policy, std::size_t* retries) {
    if (retries) *retries = 0;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return client.complete(messages);
        } catch (const TransientFailure& e) {
            if (attempt >= policy.max_retries)
                throw ServiceUnavailable(strprintf("gave up after %zu attempts: %s", attempt + 1, e.what()));
            const auto delay = backoff_delay(policy, attempt);
            if (policy.sleep)
                policy.sleep(delay);
            else
                std::this_thread::sleep_for(delay);
            if (retries) ++*retries;
        }
    }
}

void run_bounded(std::size_t n, std::size_t max_concurrency, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(n, std::max<std::size_t>(max_concurrency, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------

namespace {

std::string one_line(std::string_view text) {
    std::string out(text);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

std::vector<std::string> lower_words(std::string_view text) { return split_whitespace(to_lower(text)); }

// Value of the first line starting with `key` in any user message.
std::string field(const std::vector<ChatMessage>& messages, std::string_view key) {
    for (const auto& m : messages) {
        if (m.role != "user") continue;
        std::size_t pos = 0;
        while (pos <= m.content.size()) {
            std::size_t end = m.content.find('\n', pos);
            if (end == std::string::npos) end = m.content.size();
            const std::string_view line(m.content.data() + pos, end - pos);
            if (line.substr(0, key.size()) == key) return std::string(trim(line.substr(key.size())));
            pos = end + 1;
        }
    }
    return {};
}

std::string list_or_none(const std::vector<std::string>& xs) { return xs.empty() ? "none" : join(xs, ", "); }

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const LeakageDetected*>(&e)) return "LeakageDetected";
    if (dynamic_cast<const EmptyResponse*>(&e)) return "EmptyResponse";
    if (dynamic_cast<const ServiceUnavailable*>(&e)) return "ServiceUnavailable";
    if (dynamic_cast<const UnparseableScore*>(&e)) return "UnparseableScore";
    if (dynamic_cast<const InvalidConfig*>(&e)) return "InvalidConfig";
    return "Error";
}

}  // namespace

bool leaks_reference(std::string_view trace, std::string_view reference, std::size_t min_words) {
    const auto t = lower_words(trace);
    const auto r = lower_words(reference);
    if (min_words == 0 || t.size() < min_words || r.size() < min_words) return false;
    std::set<std::vector<std::string>> grams;
    for (std::size_t i = 0; i + min_words <= r.size(); ++i)
        grams.emplace(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(i + min_words));
    for (std::size_t i = 0; i + min_words <= t.size(); ++i)
        if (grams.count({t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + min_words)}))
            return true;
    return false;
}

std::vector<ChatMessage> distill_request(const MemeRecord& record, std::string_view guidelines) {
    std::vector<std::string> cats, attacks;
    for (auto c : record.protected_categories) cats.emplace_back(to_string(c));
    for (auto a : record.attack_types) attacks.emplace_back(to_string(a));
    std::string user = "Guidelines:\n" + std::string(guidelines) + "\n\n";
    user += "Image: " + one_line(record.image_ref) + "\n";
    user += "Meme text: " + one_line(record.ocr_text) + "\n";
    user += "Gold label: " + std::string(label_name(record.label)) + "\n";
    user += "Protected categories: " + list_or_none(cats) + "\n";
    user += "Attack types: " + list_or_none(attacks) + "\n";
    user += "Reference explanation: " + one_line(record.gold_explanation) + "\n";
    return {{"system", std::string(resources::kDistillPromptV1)}, {"user", user}};
}

std::string distill_cot(ChatClient& client, const MemeRecord& record, std::string_view guidelines,
                        const RetryPolicy& retry, std::size_t* retries) {
    const std::string trace(trim(complete_with_retries(client, distill_request(record, guidelines), retry, retries)));
    if (trace.empty()) throw EmptyResponse("teacher returned an empty trace for '" + record.id + "'");
    if (leaks_reference(trace, record.gold_explanation))
        throw LeakageDetected("trace for '" + record.id + "' copies the reference explanation");
    return trace;
}

DistillReport distill_corpus(ChatClient& client, std::vector<MemeRecord>& records, std::string_view guidelines,
                             const RetryPolicy& retry, std::size_t max_concurrency) {
    DistillReport rep;
    std::mutex mu;
    run_bounded(records.size(), max_concurrency, [&](std::size_t i) {
        auto& r = records[i];
        if (r.cot_trace && !trim(*r.cot_trace).empty()) return;
        std::size_t n_retries = 0;
        try {
            std::string trace = distill_cot(client, r, guidelines, retry, &n_retries);
            std::lock_guard lock(mu);
            r.cot_trace = std::move(trace);
            ++rep.succeeded;
            rep.retries += n_retries;
        } catch (const Error& e) {
            std::lock_guard lock(mu);
            rep.retries += n_retries;
            rep.failures.push_back({r.id, error_kind(e), e.what()});
        }
    });
    std::sort(rep.failures.begin(), rep.failures.end(),
              [](const ItemFailure& a, const ItemFailure& b) { return a.item_id < b.item_id; });
    return rep;
}

// ---------------------------------------------------------------------------

std::string_view judge_rubric(std::string_view version) {
    if (version == "v1") return resources::kJudgeRubricV1;
    throw UnknownTemplate("unknown judge rubric version '" + std::string(version) + "'");
}

std::vector<ChatMessage> judge_request(const MemeRecord& record, std::string_view explanation,
                                       std::string_view rubric_version) {
    std::string user = "Meme text: " + one_line(record.ocr_text) + "\n";
    user += "Image: " + one_line(record.image_ref) + "\n";
    user += "Reference explanation: " + one_line(record.gold_explanation) + "\n";
    user += "Candidate explanation: " + one_line(explanation) + "\n";
    return {{"system", std::string(judge_rubric(rubric_version))}, {"user", user}};
}

std::optional<std::array<int, 4>> parse_judge_response(std::string_view text) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    const auto j = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    std::array<int, 4> out{};
    for (auto d : kAllDimensions) {
        const auto it = j.find(std::string(to_string(d)));
        if (it == j.end() || !it->is_number_integer()) return std::nullopt;
        const int v = it->get<int>();
        if (v < 1 || v > 5) return std::nullopt;
        out[static_cast<std::size_t>(d)] = v;
    }
    return out;
}

JudgeScore judge_explanation(ChatClient& client, const MemeRecord& record, std::string_view explanation,
                             std::string_view judge_id, std::string_view rubric_version, const RetryPolicy& retry) {
    if (trim(explanation).empty()) throw InvalidConfig("cannot judge an empty explanation for '" + record.id + "'");
    const auto request = judge_request(record, explanation, rubric_version);
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (const auto parsed = parse_judge_response(complete_with_retries(client, request, retry)))
            return {record.id, std::string(judge_id), *parsed};
    }
    throw UnparseableScore("judge '" + std::string(judge_id) + "' gave no usable scores for '" + record.id + "'");
}

JudgeRunReport judge_corpus(const std::vector<NamedJudge>& judges, const std::vector<MemeRecord>& records,
                            const std::vector<std::string>& explanations, std::string_view rubric_version,
                            const RetryPolicy& retry, std::size_t max_concurrency) {
    if (explanations.size() != records.size()) throw LengthMismatch("one explanation per record required");
    judge_rubric(rubric_version);
    const std::size_t nj = judges.size();
    std::vector<std::optional<JudgeScore>> slots(records.size() * nj);
    JudgeRunReport rep;
    std::mutex mu;
    run_bounded(slots.size(), max_concurrency, [&](std::size_t k) {
        const auto& r = records[k / nj];
        const auto& judge = judges[k % nj];
        try {
            slots[k] = judge_explanation(*judge.client, r, explanations[k / nj], judge.id, rubric_version, retry);
        } catch (const Error& e) {
            std::lock_guard lock(mu);
            rep.failures.push_back({r.id, error_kind(e), judge.id + ": " + e.what()});
        }
    });
    for (auto& s : slots)
        if (s) rep.scores.push_back(std::move(*s));
    std::sort(rep.failures.begin(), rep.failures.end(), [](const ItemFailure& a, const ItemFailure& b) {
        return std::tie(a.item_id, a.message) < std::tie(b.item_id, b.message);
    });
    return rep;
}

// ---------------------------------------------------------------------------

RatingsMatrix ratings_matrix(const std::vector<JudgeScore>& scores) {
    std::vector<std::string> items, judges;
    std::map<std::pair<std::string, std::string>, const JudgeScore*> cell;
    for (const auto& s : scores) {
        if (std::find(items.begin(), items.end(), s.item_id) == items.end()) items.push_back(s.item_id);
        if (std::find(judges.begin(), judges.end(), s.judge_id) == judges.end()) judges.push_back(s.judge_id);
        if (!cell.emplace(std::make_pair(s.item_id, s.judge_id), &s).second)
            throw IncompleteRatings("item '" + s.item_id + "' rated twice by judge '" + s.judge_id + "'");
    }
    std::sort(judges.begin(), judges.end());
    if (judges.size() < 2) throw InsufficientJudges("agreement needs at least two judges");
    RatingsMatrix m;
    for (auto d : kAllDimensions) {
        auto& grid = m.grids[d];
        for (const auto& item : items) {
            auto& row = grid.emplace_back();
            for (const auto& judge : judges) {
                const auto it = cell.find({item, judge});
                if (it == cell.end())
                    throw IncompleteRatings("judge '" + judge + "' did not rate item '" + item + "'");
                row.push_back((*it->second)[d]);
            }
        }
    }
    return m;
}

JudgeAggregate aggregate_judgments(const std::vector<JudgeScore>& scores, AgreementMode mode) {
    const RatingsMatrix m = ratings_matrix(scores);
    JudgeAggregate agg;
    for (const auto& s : scores)
        if (std::find(agg.judges.begin(), agg.judges.end(), s.judge_id) == agg.judges.end())
            agg.judges.push_back(s.judge_id);
    std::sort(agg.judges.begin(), agg.judges.end());
    agg.items = m.grids.begin()->second.size();
    for (std::size_t j = 0; j < agg.judges.size(); ++j) {
        std::array<double, 4> means{};
        for (auto d : kAllDimensions) {
            double sum = 0.0;
            for (const auto& row : m.grids.at(d)) sum += row[j];
            means[static_cast<std::size_t>(d)] = sum / static_cast<double>(agg.items);
        }
        agg.means[agg.judges[j]] = means;
        agg.overall[agg.judges[j]] = (means[0] + means[1] + means[2] + means[3]) / 4.0;
    }
    const auto rwg = agreement_rwg(m, mode);
    for (auto d : kAllDimensions) agg.agreement[static_cast<std::size_t>(d)] = rwg.at(d);
    return agg;
}

std::string JudgeAggregate::to_table() const {
    std::size_t width = 8;
    for (const auto& j : judges) width = std::max(width, j.size() + 2);
    std::string out = strprintf("%-*s", static_cast<int>(width), "judge");
    for (auto d : kAllDimensions) out += strprintf("%16s", std::string(to_string(d)).c_str());
    out += strprintf("%10s\n", "average");
    for (const auto& j : judges) {
        out += strprintf("%-*s", static_cast<int>(width), j.c_str());
        for (double v : means.at(j)) out += strprintf("%16.3f", v);
        out += strprintf("%10.3f\n", overall.at(j));
    }
    out += strprintf("%-*s", static_cast<int>(width), "r*_wg");
    for (double v : agreement) out += strprintf("%16.3f", v);
    out += strprintf("%10s\n", "");
    out += strprintf("items: %zu\n", items);
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string ratings_to_csv(const std::vector<JudgeScore>& scores) {
    std::string out(kRatingsCsvHeader);
    out += '\n';
    for (const auto& s : scores)
        for (auto d : kAllDimensions)
            out += csv_field(s.item_id) + "," + csv_field(s.judge_id) + "," + std::string(to_string(d)) +
                   strprintf(",%d\n", s[d]);
    return out;
}

std::vector<JudgeScore> ratings_from_csv(std::string_view csv) {
    std::vector<JudgeScore> out;
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, unsigned>> index;  // -> (slot, dims seen)
    std::size_t pos = 0;
    bool header = true;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        std::string_view line = csv.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        if (header) {
            if (line != kRatingsCsvHeader)
                throw HeaderMismatch("ratings header must be exactly '" + std::string(kRatingsCsvHeader) + "'");
            header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw InvalidConfig("ratings rows need four fields: " + std::string(line));
        const auto dim = parse_dimension(f[2]);
        if (!dim) throw InvalidConfig("unknown judge dimension '" + f[2] + "'");
        char* tail = nullptr;
        const long v = std::strtol(f[3].c_str(), &tail, 10);
        if (tail == f[3].c_str() || *tail != '\0' || v < 1 || v > 5)
            throw InvalidConfig("rating must be an integer in 1..5, got '" + f[3] + "'");
        auto [it, fresh] = index.try_emplace({f[0], f[1]}, out.size(), 0u);
        if (fresh) out.push_back({f[0], f[1], {}});
        const unsigned bit = 1u << static_cast<unsigned>(*dim);
        if (it->second.second & bit) throw IncompleteRatings("duplicate rating for item '" + f[0] + "'");
        it->second.second |= bit;
        out[it->second.first][*dim] = static_cast<int>(v);
    }
    if (header) throw HeaderMismatch("ratings file is empty");
    for (const auto& [key, slot] : index)
        if (slot.second != 0xFu)
            throw IncompleteRatings("item '" + key.first + "' lacks a dimension from judge '" + key.second + "'");
    return out;
}

// ---------------------------------------------------------------------------

MockTeacherClient::MockTeacherClient(std::uint64_t seed, std::vector<std::string> trigger_words)
    : seed_(seed), triggers_(std::move(trigger_words)) {}

std::string MockTeacherClient::complete(const std::vector<ChatMessage>& messages) {
    const std::string text = field(messages, "Meme text:");
    const std::string label = field(messages, "Gold label:");
    const std::string cats = field(messages, "Protected categories:");
    std::uint64_t h = seed_;
    for (const auto& m : messages) h = derive_seed(h, fnv1a64(m.content));
    const bool variant = (h & 1u) != 0;

    const auto words = lower_words(text);
    std::string cue;
    for (const auto& w : words)
        if (std::find(triggers_.begin(), triggers_.end(), w) != triggers_.end()) {
            cue = w;
            break;
        }
    if (cue.empty() && !words.empty()) cue = words.front();
    const std::string opener = variant ? "first" : "step one";

    if (to_lower(label) == "hateful") {
        std::string target = cats.empty() || cats == "none" ? "a group" : split_whitespace(cats).front();
        if (!target.empty() && target.back() == ',') target.pop_back();
        return opener + " the word " + cue + " targets " + target + " so the meme is hateful";
    }
    return opener + " the word " + cue + " targets no group so the meme is benign";
}

MockJudgeClient::MockJudgeClient(std::uint64_t seed) : seed_(seed) {}

std::string MockJudgeClient::complete(const std::vector<ChatMessage>& messages) {
    const auto ref = lower_words(field(messages, "Reference explanation:"));
    const auto cand = lower_words(field(messages, "Candidate explanation:"));
    const std::set<std::string> rs(ref.begin(), ref.end()), cs(cand.begin(), cand.end());
    std::size_t overlap = 0;
    for (const auto& w : cs) overlap += rs.count(w);
    const double recall = rs.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(rs.size());
    const double precision = cs.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(cs.size());
    const double f1 = recall + precision > 0 ? 2 * recall * precision / (recall + precision) : 0.0;
    auto quant = [](double x) { return 1 + static_cast<int>(std::lround(4.0 * x)); };

    int clarity = 1;
    if (!cand.empty()) {
        const double ratio = ref.empty() ? 1.0 : static_cast<double>(cand.size()) / static_cast<double>(ref.size());
        clarity = ratio >= 0.5 && ratio <= 2.0 ? 5 : (ratio >= 0.25 && ratio <= 4.0 ? 4 : 3);
    }
    std::array<int, 4> s{quant(recall), clarity, quant(precision), quant(f1)};
    const std::uint64_t key = fnv1a64(join(ref, " ") + "\n" + join(cand, " "));
    for (std::size_t d = 0; d < 4; ++d) {
        if (s[d] <= 1 || s[d] >= 5) continue;
        s[d] += static_cast<int>(derive_seed(seed_, key, d) % 3) - 1;
    }
    nlohmann::ordered_json j;
    for (auto d : kAllDimensions) j[std::string(to_string(d))] = s[static_cast<std::size_t>(d)];
    return j.dump();
}

std::string FlakyClient::complete(const std::vector<ChatMessage>& messages) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
        if (remaining_ > 0) {
            --remaining_;
            throw TransientFailure("simulated transient failure");
        }
    }
    return inner_.complete(messages);
}

std::string UnreachableClient::complete(const std::vector<ChatMessage>&) {
    throw TransientFailure("endpoint unreachable");
}

std::string InstrumentedClient::complete(const std::vector<ChatMessage>& messages) {
    const std::size_t now = ++in_flight_;
    std::size_t peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<std::size_t>& n;
        ~Leave() { --n; }
    } leave{in_flight_};
    std::this_thread::sleep_for(hold_);
    return inner_.complete(messages);
}

}  // namespace memerl
