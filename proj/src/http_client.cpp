#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/modelsvc.hpp"
#include "memerl/util.hpp"

namespace memerl {

std::string chat_request_json(std::string_view model, const std::vector<ChatMessage>& messages) {
    nlohmann::ordered_json j;
    j["model"] = std::string(model);
    auto& msgs = j["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return j.dump();
}

std::optional<std::string> chat_response_content(std::string_view body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
    const auto& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].contains("content")) return std::nullopt;
    const auto& content = first["message"]["content"];
    if (!content.is_string()) return std::nullopt;
    return content.get<std::string>();
}

namespace {

// "http://host:port/prefix" -> ("http://host:port", "/prefix")
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path_start), prefix};
}

}  // namespace

HttpChatClient::HttpChatClient(ServiceClientConfig config) : config_(std::move(config)) {
    validate(config_);
    if (config_.endpoint.rfind("http://", 0) != 0)
        throw InvalidConfig("modelsvc.endpoint must be an http:// address (put a TLS proxy in front for https)");
    if (const char* key = std::getenv(config_.api_key_env.c_str())) token_ = key;
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
    const auto [host, prefix] = split_endpoint(config_.endpoint);
    httplib::Client cli(host);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    const auto res = cli.Post(prefix + "/v1/chat/completions", headers, chat_request_json(config_.model, messages),
                              "application/json");
    if (!res) throw TransientFailure("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransientFailure(strprintf("service returned HTTP %d", res->status));
    if (res->status != 200) throw ServiceUnavailable(strprintf("service rejected the request with HTTP %d", res->status));
    const auto content = chat_response_content(res->body);
    if (!content) throw TransientFailure("malformed chat-completion response");
    return *content;
}

}  // namespace memerl
