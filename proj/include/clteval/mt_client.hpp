#pragma once

// Machine-translation client interface, the HTTP implementation, and the
// deterministic mock translators the offline test suite runs against.

#include <atomic>
#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "clteval/text.hpp"
#include "clteval/util.hpp"

namespace clteval::mt {

// Translates `text` from `source` to `target` (ISO 639-1 codes). Thread-safe
// implementations are required: the pipeline issues concurrent calls.
class MtClient {
public:
    virtual ~MtClient() = default;
    virtual std::string translate(const std::string& text, const std::string& source,
                                  const std::string& target) = 0;
};

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

// Speaks a minimal JSON protocol to a translation endpoint:
//   POST <path>  {"q": text, "source": "en", "target": "de"}
//   200          {"translatedText": "..."}
// An auth token is sent as a Bearer header when the configured environment
// variable is set. 5xx and transport failures are retryable; 4xx is not.
struct MtEndpoint {
    std::string host;  // e.g. "localhost"
    int port = 80;
    std::string path = "/translate";
    std::string token_env = "CLTEVAL_MT_TOKEN";
    int timeout_sec = 30;
};

class HttpMtClient : public MtClient {
public:
    explicit HttpMtClient(MtEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

    std::string translate(const std::string& text, const std::string& source,
                          const std::string& target) override {
        httplib::Client client(endpoint_.host, endpoint_.port);
        client.set_connection_timeout(endpoint_.timeout_sec);
        client.set_read_timeout(endpoint_.timeout_sec);
        httplib::Headers headers;
        if (auto token = util::getenv_opt(endpoint_.token_env)) {
            headers.emplace("Authorization", "Bearer " + *token);
        }
        nlohmann::json body{{"q", text}, {"source", source}, {"target", target}};
        auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
        if (!res) {
            throw util::TransportError("translation endpoint unreachable: " + endpoint_.host + ":" +
                                           std::to_string(endpoint_.port),
                                       /*retryable=*/true);
        }
        if (res->status >= 500) {
            throw util::TransportError("translation endpoint returned " +
                                           std::to_string(res->status),
                                       /*retryable=*/true);
        }
        if (res->status != 200) {
            throw util::TransportError("translation endpoint returned " +
                                           std::to_string(res->status),
                                       /*retryable=*/false);
        }
        try {
            nlohmann::json parsed = nlohmann::json::parse(res->body);
            return parsed.at("translatedText").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw util::TransportError(std::string("malformed translation response: ") + e.what(),
                                       /*retryable=*/false);
        }
    }

private:
    MtEndpoint endpoint_;
};

// ---------------------------------------------------------------------------
// Mock translators
// ---------------------------------------------------------------------------

// Returns the input unchanged: a perfect round trip.
class IdentityTranslator : public MtClient {
public:
    std::string translate(const std::string& text, const std::string&,
                          const std::string&) override {
        return text;
    }
};

// Tags text with the direction travelled, then strips any existing tag, so
// forward and backward legs are distinguishable but a round trip restores
// the original text exactly.
class TaggingTranslator : public MtClient {
public:
    std::string translate(const std::string& text, const std::string& source,
                          const std::string& target) override {
        if (util::starts_with(text, "[")) {
            auto pos = text.find("] ");
            if (pos != std::string::npos) return text.substr(pos + 2);
        }
        return "[" + source + ">" + target + "] " + text;
    }
};

// Replaces every stride-th token with a placeholder symbol on each leg.
// severity 0 is the identity; severity 9 destroys every token. Higher
// severity strictly lowers round-trip scores, giving the QE tests a dial.
class CorruptingTranslator : public MtClient {
public:
    explicit CorruptingTranslator(int severity)
        : severity_(std::clamp(severity, 0, 9)) {}

    std::string translate(const std::string& text, const std::string&,
                          const std::string&) override {
        if (severity_ <= 0) return text;
        std::vector<std::string> tokens = text::tokenize_script(text);
        int stride = 10 - severity_;  // 1..9
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (static_cast<int>(i % stride) == stride - 1) tokens[i] = "☒";
        }
        return util::join(tokens, " ");
    }

private:
    int severity_;
};

// Drops the final comma-separated clause (everything from the last comma on)
// when translating back into the pivot language; the forward leg is lossless.
// Texts without a comma pass through unchanged.
class ClauseDroppingTranslator : public MtClient {
public:
    explicit ClauseDroppingTranslator(std::string pivot_language)
        : pivot_(std::move(pivot_language)) {}

    std::string translate(const std::string& text, const std::string&,
                          const std::string& target) override {
        if (target != pivot_) return text;
        auto pos = text.rfind(',');
        if (pos == std::string::npos) return text;
        return util::trim(text.substr(0, pos));
    }

private:
    std::string pivot_;
};

// Maps every token to a symbol never seen in natural text: zero n-gram
// overlap with the original, hence BLEU 0.
class TokenPermutingTranslator : public MtClient {
public:
    std::string translate(const std::string& text, const std::string&,
                          const std::string&) override {
        std::vector<std::string> tokens = text::tokenize_script(text);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            tokens[i] = "⁂" + std::to_string(i);
        }
        return util::join(tokens, " ");
    }
};

// Fails the first `fail_count` calls with a retryable transport error, then
// delegates. Counts calls for retry tests.
class FlakyTranslator : public MtClient {
public:
    FlakyTranslator(std::shared_ptr<MtClient> inner, int fail_count)
        : inner_(std::move(inner)), remaining_failures_(fail_count) {}

    std::string translate(const std::string& text, const std::string& source,
                          const std::string& target) override {
        calls_.fetch_add(1);
        if (remaining_failures_.fetch_sub(1) > 0) {
            throw util::TransportError("injected translation failure", /*retryable=*/true);
        }
        return inner_->translate(text, source, target);
    }

    int calls() const { return calls_.load(); }

private:
    std::shared_ptr<MtClient> inner_;
    std::atomic<int> remaining_failures_;
    std::atomic<int> calls_{0};
};

// Wraps a client and records the peak number of concurrent in-flight calls,
// for verifying the pipeline's concurrency bound.
class ConcurrencyProbeTranslator : public MtClient {
public:
    explicit ConcurrencyProbeTranslator(std::shared_ptr<MtClient> inner)
        : inner_(std::move(inner)) {}

    std::string translate(const std::string& text, const std::string& source,
                          const std::string& target) override {
        int now = in_flight_.fetch_add(1) + 1;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
        std::string out = inner_->translate(text, source, target);
        in_flight_.fetch_sub(1);
        return out;
    }

    int peak() const { return peak_.load(); }

private:
    std::shared_ptr<MtClient> inner_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

// Factory used by the CLI: mock translators are selected by name so offline
// runs never touch the network.
inline std::shared_ptr<MtClient> make_mock_translator(const std::string& name,
                                                      const std::string& pivot_language) {
    if (name == "identity") return std::make_shared<IdentityTranslator>();
    if (name == "tagging") return std::make_shared<TaggingTranslator>();
    if (name == "drop-clause") return std::make_shared<ClauseDroppingTranslator>(pivot_language);
    if (name == "scramble") return std::make_shared<TokenPermutingTranslator>();
    if (util::starts_with(name, "corrupt:")) {
        return std::make_shared<CorruptingTranslator>(std::stoi(name.substr(8)));
    }
    throw util::ConfigError("unknown mock translator: " + name);
}

}  // namespace clteval::mt
