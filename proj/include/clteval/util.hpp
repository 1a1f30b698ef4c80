#pragma once

// Shared plumbing: error taxonomy, filesystem helpers, hashing, retry.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <openssl/evp.h>

namespace clteval::util {

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

// Bad run configuration, unknown identifiers, unresolvable resources.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A network/endpoint failure. `retryable` distinguishes transient transport
// problems (timeouts, 5xx, connection resets) from permanent ones (4xx).
struct TransportError : std::runtime_error {
    bool retryable;
    explicit TransportError(const std::string& what, bool retryable_ = true)
        : std::runtime_error(what), retryable(retryable_) {}
};

// A failure inside the dataset pipeline or evaluation run, carrying context
// (typically the item id) in the message.
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Retry
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;     // total attempts, including the first
    int backoff_ms = 10;      // initial backoff; doubles per retry
};

// Runs `fn` until it succeeds or the attempt budget is exhausted. Only
// retryable TransportErrors are retried; anything else propagates at once.
template <typename Fn>
auto with_retries(Fn&& fn, const RetryPolicy& policy = {}) -> decltype(fn()) {
    int attempt = 0;
    int backoff = policy.backoff_ms;
    for (;;) {
        try {
            return fn();
        } catch (const TransportError& e) {
            ++attempt;
            if (!e.retryable || attempt >= policy.max_attempts) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
    }
}

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

inline std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Fixed-format floating point (printf %.*f), used everywhere a number is
// written to a report so output bytes are locale-independent.
inline std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

inline std::optional<std::string> getenv_opt(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
}

// ---------------------------------------------------------------------------
// Filesystem
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes via a sibling temp file + rename so concurrent readers never see a
// partial file.
inline void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(
        std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffffu);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open file for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("short write: " + tmp.string());
    }
    fs::rename(tmp, path);
}

// Reads a file of newline-separated records, skipping blank lines.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::string content = read_text_file(path);
    std::vector<std::string> lines;
    std::string cur;
    for (char c : content) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
              EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("sha256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_text_file(path));
}

}  // namespace clteval::util
