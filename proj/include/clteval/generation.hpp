#pragma once

// Text-generation dispatch: completion-client interface (HTTP + mocks), a
// content-addressed on-disk response cache, retry handling, answer parsing,
// and order-preserving bounded-concurrency batching.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "clteval/util.hpp"

namespace clteval::infer {

// ---------------------------------------------------------------------------
// Decode parameters
// ---------------------------------------------------------------------------

// Greedy decoding is fixed (temperature 0) so repeated runs are
// reproducible; the stop list must be non-empty because answer parsing is
// defined by truncation at the first stop.
struct DecodeParams {
    int max_new_tokens = 32;
    double temperature = 0.0;
    std::vector<std::string> stop_sequences{"\n"};

    void validate() const {
        if (max_new_tokens <= 0) throw util::ConfigError("max_new_tokens must be positive");
        if (temperature != 0.0) {
            throw util::ConfigError("only greedy decoding (temperature 0) is supported");
        }
        if (stop_sequences.empty()) throw util::ConfigError("stop_sequences must be non-empty");
    }

    // Canonical serialization used in the request digest: any change to the
    // decode parameters must change the cache key.
    std::string canonical() const {
        std::string out = "max_new_tokens=" + std::to_string(max_new_tokens) +
                          ";temperature=" + util::fmt_fixed(temperature, 6) + ";stop=";
        for (std::size_t i = 0; i < stop_sequences.size(); ++i) {
            if (i) out += '\x1f';
            out += stop_sequences[i];
        }
        return out;
    }
};

inline std::string request_key(const std::string& model_id, const std::string& prompt,
                               const DecodeParams& params) {
    return util::sha256_hex(model_id + '\x1f' + prompt + '\x1f' + params.canonical());
}

// Truncate at the earliest occurrence of any stop sequence, then trim.
inline std::string parse_answer(const std::string& raw_output, const DecodeParams& params) {
    std::size_t cut = raw_output.size();
    for (const auto& stop : params.stop_sequences) {
        if (stop.empty()) continue;
        auto pos = raw_output.find(stop);
        if (pos != std::string::npos && pos < cut) cut = pos;
    }
    return util::trim(raw_output.substr(0, cut));
}

// ---------------------------------------------------------------------------
// GenerationRecord
// ---------------------------------------------------------------------------

struct GenerationRecord {
    std::string request_key;
    std::string prompt;
    std::string raw_output;
    std::string parsed_answer;
    double latency_ms = 0.0;
    bool from_cache = false;
};

// `volatile_fields` controls whether latency/from_cache are serialized.
// Result files written by the runner exclude them so a warm-cache rerun is
// byte-identical to the original run.
inline nlohmann::json record_to_json(const GenerationRecord& rec, bool volatile_fields) {
    nlohmann::json j{
        {"request_key", rec.request_key},
        {"prompt", rec.prompt},
        {"raw_output", rec.raw_output},
        {"parsed_answer", rec.parsed_answer},
    };
    if (volatile_fields) {
        j["latency_ms"] = rec.latency_ms;
        j["from_cache"] = rec.from_cache;
    }
    return j;
}

inline GenerationRecord record_from_json(const nlohmann::json& j) {
    GenerationRecord rec;
    rec.request_key = j.at("request_key").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.raw_output = j.at("raw_output").get<std::string>();
    rec.parsed_answer = j.at("parsed_answer").get<std::string>();
    rec.latency_ms = j.value("latency_ms", 0.0);
    rec.from_cache = j.value("from_cache", false);
    return rec;
}

// ---------------------------------------------------------------------------
// Completion clients
// ---------------------------------------------------------------------------

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    // Returns the raw generated continuation for `prompt`.
    virtual std::string complete(const std::string& prompt, const DecodeParams& params) = 0;
};

// HTTP completion endpoint:
//   POST <path>  {"model": ..., "prompt": ..., "max_new_tokens": ...,
//                 "temperature": ..., "stop": [...]}
//   200          {"text": "..."}
struct GenerationEndpoint {
    std::string model_id;
    std::string host;
    int port = 80;
    std::string path = "/v1/completions";
    std::string token_env = "CLTEVAL_GEN_TOKEN";
    int timeout_sec = 120;
};

class HttpCompletionClient : public CompletionClient {
public:
    explicit HttpCompletionClient(GenerationEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

    std::string complete(const std::string& prompt, const DecodeParams& params) override {
        httplib::Client client(endpoint_.host, endpoint_.port);
        client.set_connection_timeout(endpoint_.timeout_sec);
        client.set_read_timeout(endpoint_.timeout_sec);
        httplib::Headers headers;
        if (auto token = util::getenv_opt(endpoint_.token_env)) {
            headers.emplace("Authorization", "Bearer " + *token);
        }
        nlohmann::json body{{"model", endpoint_.model_id},
                            {"prompt", prompt},
                            {"max_new_tokens", params.max_new_tokens},
                            {"temperature", params.temperature},
                            {"stop", params.stop_sequences}};
        auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
        if (!res) {
            throw util::TransportError("generation endpoint unreachable: " + endpoint_.host + ":" +
                                           std::to_string(endpoint_.port),
                                       /*retryable=*/true);
        }
        if (res->status >= 500) {
            throw util::TransportError(
                "generation endpoint returned " + std::to_string(res->status),
                /*retryable=*/true);
        }
        if (res->status != 200) {
            throw util::TransportError(
                "generation endpoint returned " + std::to_string(res->status),
                /*retryable=*/false);
        }
        try {
            nlohmann::json parsed = nlohmann::json::parse(res->body);
            return parsed.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw util::TransportError(std::string("malformed generation response: ") + e.what(),
                                       /*retryable=*/false);
        }
    }

private:
    GenerationEndpoint endpoint_;
};

// Offline oracle endpoint: initialized with a question->gold-answer table, it
// scans the prompt for the question occurring LAST (the query section is the
// prompt's tail) and returns that question's gold answer followed by a
// newline, exercising stop-sequence truncation.
class EchoGoldClient : public CompletionClient {
public:
    explicit EchoGoldClient(std::map<std::string, std::string> answer_by_question)
        : answer_by_question_(std::move(answer_by_question)) {}

    std::string complete(const std::string& prompt, const DecodeParams&) override {
        calls_.fetch_add(1);
        std::size_t best_pos = std::string::npos;
        const std::string* best_answer = nullptr;
        for (const auto& [question, answer] : answer_by_question_) {
            if (question.empty()) continue;
            std::size_t pos = prompt.rfind(question);
            if (pos != std::string::npos && (best_pos == std::string::npos || pos > best_pos)) {
                best_pos = pos;
                best_answer = &answer;
            }
        }
        if (best_answer == nullptr) return "\n";
        return *best_answer + "\n";
    }

    int calls() const { return calls_.load(); }

private:
    std::map<std::string, std::string> answer_by_question_;
    std::atomic<int> calls_{0};
};

// Always returns the same text.
class FixedClient : public CompletionClient {
public:
    explicit FixedClient(std::string text) : text_(std::move(text)) {}
    std::string complete(const std::string&, const DecodeParams&) override { return text_; }

private:
    std::string text_;
};

// Fails the first `fail_count` calls with a retryable error, then delegates.
class FlakyClient : public CompletionClient {
public:
    FlakyClient(std::shared_ptr<CompletionClient> inner, int fail_count)
        : inner_(std::move(inner)), remaining_failures_(fail_count) {}

    std::string complete(const std::string& prompt, const DecodeParams& params) override {
        if (remaining_failures_.fetch_sub(1) > 0) {
            throw util::TransportError("injected generation failure", /*retryable=*/true);
        }
        return inner_->complete(prompt, params);
    }

private:
    std::shared_ptr<CompletionClient> inner_;
    std::atomic<int> remaining_failures_;
};

// Fails permanently when the prompt contains a marker substring; used to
// test per-item error isolation in batches.
class PoisonClient : public CompletionClient {
public:
    PoisonClient(std::shared_ptr<CompletionClient> inner, std::string marker)
        : inner_(std::move(inner)), marker_(std::move(marker)) {}

    std::string complete(const std::string& prompt, const DecodeParams& params) override {
        if (prompt.find(marker_) != std::string::npos) {
            throw util::TransportError("poisoned prompt", /*retryable=*/false);
        }
        return inner_->complete(prompt, params);
    }

private:
    std::shared_ptr<CompletionClient> inner_;
    std::string marker_;
};

// Wraps a client, counting calls and the peak number of concurrent calls.
// An optional artificial delay widens the window so concurrency is
// observable in tests.
class ConcurrencyProbeClient : public CompletionClient {
public:
    explicit ConcurrencyProbeClient(std::shared_ptr<CompletionClient> inner, int delay_ms = 0)
        : inner_(std::move(inner)), delay_ms_(delay_ms) {}

    std::string complete(const std::string& prompt, const DecodeParams& params) override {
        calls_.fetch_add(1);
        int now = in_flight_.fetch_add(1) + 1;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
        if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
        std::string out = inner_->complete(prompt, params);
        in_flight_.fetch_sub(1);
        return out;
    }

    int calls() const { return calls_.load(); }
    int peak() const { return peak_.load(); }

private:
    std::shared_ptr<CompletionClient> inner_;
    int delay_ms_;
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

// ---------------------------------------------------------------------------
// Disk cache
// ---------------------------------------------------------------------------

// Content-addressed store: <dir>/<key[0:2]>/<key>.json, written atomically
// (temp file + rename) so concurrent readers and writers are safe. A
// corrupt entry is treated as a miss and rewritten, never an error.
class DiskCache {
public:
    explicit DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::optional<GenerationRecord> get(const std::string& key) const {
        std::filesystem::path path = entry_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        try {
            nlohmann::json j = nlohmann::json::parse(util::read_text_file(path));
            return record_from_json(j);
        } catch (const std::exception& e) {
            std::cerr << "[clteval] warning: discarding corrupt cache entry " << path << ": "
                      << e.what() << "\n";
            return std::nullopt;
        }
    }

    void put(const GenerationRecord& rec) {
        std::lock_guard<std::mutex> lock(write_mutex_);
        // Stored records never claim cache provenance; readers set it.
        nlohmann::json j = record_to_json(rec, /*volatile_fields=*/true);
        j["from_cache"] = false;
        util::write_text_file_atomic(entry_path(rec.request_key), j.dump(2) + "\n");
    }

private:
    std::filesystem::path entry_path(const std::string& key) const {
        return dir_ / key.substr(0, 2) / (key + ".json");
    }

    std::filesystem::path dir_;
    mutable std::mutex write_mutex_;
};

// ---------------------------------------------------------------------------
// generate / run_batch
// ---------------------------------------------------------------------------

// Cache-first single generation. On a hit, no client call is made and the
// stored record is returned with from_cache=true; otherwise the endpoint is
// called (with retries), the record stored, and returned with
// from_cache=false.
inline GenerationRecord generate(const std::string& prompt, CompletionClient& client,
                                 const std::string& model_id, const DecodeParams& params = {},
                                 DiskCache* cache = nullptr,
                                 const util::RetryPolicy& retry = {}) {
    params.validate();
    std::string key = request_key(model_id, prompt, params);
    if (cache != nullptr) {
        if (auto hit = cache->get(key)) {
            hit->from_cache = true;
            return *hit;
        }
    }
    auto started = std::chrono::steady_clock::now();
    std::string raw =
        util::with_retries([&] { return client.complete(prompt, params); }, retry);
    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             started);
    GenerationRecord rec;
    rec.request_key = key;
    rec.prompt = prompt;
    rec.raw_output = raw;
    rec.parsed_answer = parse_answer(raw, params);
    rec.latency_ms = elapsed.count();
    rec.from_cache = false;
    if (cache != nullptr) cache->put(rec);
    return rec;
}

struct BatchRequest {
    std::string prompt;
    DecodeParams params;
};

struct BatchItemResult {
    std::optional<GenerationRecord> record;  // set on success
    std::string error;                       // set on failure
};

// Executes requests with at most `limit` in flight; results are returned in
// request order regardless of completion order. Per-item failures are
// isolated unless `fail_fast` is set, in which case no new work is started
// after the first failure and the batch throws. A batch where every item
// failed throws regardless.
inline std::vector<BatchItemResult> run_batch(const std::vector<BatchRequest>& requests,
                                              CompletionClient& client,
                                              const std::string& model_id, int limit,
                                              DiskCache* cache = nullptr,
                                              const util::RetryPolicy& retry = {},
                                              bool fail_fast = false) {
    if (limit < 1) throw util::ConfigError("run_batch: in-flight limit must be >= 1");
    std::vector<BatchItemResult> results(requests.size());
    if (requests.empty()) return results;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    auto worker = [&] {
        for (;;) {
            if (abort.load()) return;
            std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                results[i].record =
                    generate(requests[i].prompt, client, model_id, requests[i].params, cache, retry);
            } catch (const std::exception& e) {
                results[i].error = e.what();
                if (fail_fast) abort.store(true);
            }
        }
    };
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(limit), requests.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    std::size_t failures = 0;
    std::string first_error;
    for (const auto& r : results) {
        if (!r.record.has_value()) {
            ++failures;
            if (first_error.empty() && !r.error.empty()) first_error = r.error;
        }
    }
    if (fail_fast && failures > 0) {
        throw util::PipelineError("run_batch aborted (fail-fast): " + first_error);
    }
    if (failures == requests.size()) {
        throw util::PipelineError("run_batch: all " + std::to_string(failures) +
                                  " requests failed; first error: " + first_error);
    }
    return results;
}

}  // namespace clteval::infer
