#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memerl/corpus.hpp"
#include "memerl/metrics.hpp"

namespace memerl {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

/// A chat-completion service: messages in, text out. One call is one attempt; failures that
/// may succeed on retry throw TransientFailure.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct RetryPolicy {
    std::size_t max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds max_backoff{5000};
    /// Replaceable for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct ServiceClientConfig {
    std::string endpoint = "http://127.0.0.1:8000";  // scheme://host[:port]
    std::string model = "teacher";
    std::string api_key_env = "MODELSVC_API_KEY";
    std::chrono::milliseconds timeout{30000};
    std::size_t max_concurrency = 4;
    RetryPolicy retry{};
};

void validate(const ServiceClientConfig& config);

/// Delay before retry number `attempt` (0-based): initial * multiplier^attempt, capped.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::size_t attempt);

/// Calls `client`, retrying TransientFailure up to policy.max_retries times with exponential
/// backoff. Throws ServiceUnavailable once the budget is spent. `retries` receives the number
/// of retries performed.
std::string complete_with_retries(ChatClient& client, const std::vector<ChatMessage>& messages,
                                  const RetryPolicy& policy, std::size_t* retries = nullptr);

/// POSTs {"model", "messages"} to {endpoint}/v1/chat/completions and returns
/// choices[0].message.content. The bearer token comes from the configured environment variable.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ServiceClientConfig config);
    std::string complete(const std::vector<ChatMessage>& messages) override;

private:
    ServiceClientConfig config_;
    std::string token_;
};

/// Request body and response extraction of the wire protocol.
std::string chat_request_json(std::string_view model, const std::vector<ChatMessage>& messages);
std::optional<std::string> chat_response_content(std::string_view body);

/// Runs fn(0..n-1) on at most `max_concurrency` threads at once.
void run_bounded(std::size_t n, std::size_t max_concurrency, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Distillation

/// True when trace and reference share a run of `min_words` consecutive (lowercased) words.
bool leaks_reference(std::string_view trace, std::string_view reference, std::size_t min_words = 8);

std::vector<ChatMessage> distill_request(const MemeRecord& record, std::string_view guidelines);

/// Asks the teacher for a reasoning trace. Throws EmptyResponse, LeakageDetected, ServiceUnavailable.
std::string distill_cot(ChatClient& client, const MemeRecord& record, std::string_view guidelines,
                        const RetryPolicy& retry = {}, std::size_t* retries = nullptr);

struct ItemFailure {
    std::string item_id;
    std::string kind;  // error class, e.g. "LeakageDetected"
    std::string message;
};

struct DistillReport {
    std::size_t succeeded = 0;
    std::size_t retries = 0;
    std::vector<ItemFailure> failures;
};

/// Distills every record without a trace; successful traces are written into `records`.
DistillReport distill_corpus(ChatClient& client, std::vector<MemeRecord>& records, std::string_view guidelines,
                             const RetryPolicy& retry, std::size_t max_concurrency);

// ---------------------------------------------------------------------------
// Judging

struct JudgeScore {
    std::string item_id;
    std::string judge_id;
    std::array<int, 4> scores{};  // indexed like kAllDimensions

    int& operator[](JudgeDimension d) { return scores[static_cast<std::size_t>(d)]; }
    int operator[](JudgeDimension d) const { return scores[static_cast<std::size_t>(d)]; }
    bool operator==(const JudgeScore&) const = default;
};

/// Rubric text for a version tag; throws UnknownTemplate.
std::string_view judge_rubric(std::string_view version);

std::vector<ChatMessage> judge_request(const MemeRecord& record, std::string_view explanation,
                                       std::string_view rubric_version = "v1");

/// Parses the first JSON object in `text`; all four dimensions must be integers in 1..5.
std::optional<std::array<int, 4>> parse_judge_response(std::string_view text);

/// Throws UnparseableScore when the response does not parse twice in a row.
JudgeScore judge_explanation(ChatClient& client, const MemeRecord& record, std::string_view explanation,
                             std::string_view judge_id, std::string_view rubric_version = "v1",
                             const RetryPolicy& retry = {});

struct JudgeRunReport {
    std::vector<JudgeScore> scores;  // ordered by item, then judge
    std::vector<ItemFailure> failures;
};

struct NamedJudge {
    std::string id;
    ChatClient* client = nullptr;
};

JudgeRunReport judge_corpus(const std::vector<NamedJudge>& judges, const std::vector<MemeRecord>& records,
                            const std::vector<std::string>& explanations, std::string_view rubric_version,
                            const RetryPolicy& retry, std::size_t max_concurrency);

/// Per-judge means, overall averages and per-dimension agreement.
struct JudgeAggregate {
    std::vector<std::string> judges;
    std::map<std::string, std::array<double, 4>> means;  // judge -> dimension means
    std::map<std::string, double> overall;               // judge -> mean over dimensions
    std::array<double, 4> agreement{};
    std::size_t items = 0;

    std::string to_table() const;
};

/// Throws InsufficientJudges (< 2 judges) or IncompleteRatings (some judge missed an item).
JudgeAggregate aggregate_judgments(const std::vector<JudgeScore>& scores,
                                   AgreementMode mode = AgreementMode::PerItem);

inline constexpr std::string_view kRatingsCsvHeader = "item_id,judge_id,dimension,rating";
std::string ratings_to_csv(const std::vector<JudgeScore>& scores);
/// Throws HeaderMismatch or IncompleteRatings (an item/judge pair missing a dimension).
std::vector<JudgeScore> ratings_from_csv(std::string_view csv);
RatingsMatrix ratings_matrix(const std::vector<JudgeScore>& scores);

// ---------------------------------------------------------------------------
// Offline clients

/// Deterministic teacher: a short trace naming the record's label, trigger word and category,
/// phrased as a pure function of (seed, request).
class MockTeacherClient : public ChatClient {
public:
    explicit MockTeacherClient(std::uint64_t seed, std::vector<std::string> trigger_words = {});
    std::string complete(const std::vector<ChatMessage>& messages) override;

private:
    std::uint64_t seed_;
    std::vector<std::string> triggers_;
};

/// Deterministic judge scoring unigram overlap with the reference plus a length band.
/// Identical texts score 5 everywhere and zero overlap gives informativeness 1. Interior
/// scores receive a seeded jitter of at most one point.
class MockJudgeClient : public ChatClient {
public:
    explicit MockJudgeClient(std::uint64_t seed);
    std::string complete(const std::vector<ChatMessage>& messages) override;

private:
    std::uint64_t seed_;
};

/// Fails the first `failures` calls with TransientFailure, then delegates.
class FlakyClient : public ChatClient {
public:
    FlakyClient(ChatClient& inner, std::size_t failures) : inner_(inner), remaining_(failures) {}
    std::string complete(const std::vector<ChatMessage>& messages) override;
    std::size_t calls() const { return calls_; }

private:
    ChatClient& inner_;
    std::mutex mu_;
    std::size_t remaining_;
    std::size_t calls_ = 0;
};

/// Always fails; stands in for an unreachable endpoint.
class UnreachableClient : public ChatClient {
public:
    std::string complete(const std::vector<ChatMessage>& messages) override;
};

/// Records the peak number of overlapping calls.
class InstrumentedClient : public ChatClient {
public:
    InstrumentedClient(ChatClient& inner, std::chrono::milliseconds hold) : inner_(inner), hold_(hold) {}
    std::string complete(const std::vector<ChatMessage>& messages) override;
    std::size_t peak_in_flight() const { return peak_.load(); }

private:
    ChatClient& inner_;
    std::chrono::milliseconds hold_;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

}  // namespace memerl
