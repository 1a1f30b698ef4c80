#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>

#include "clteval/util.hpp"
#include "test_util.hpp"

using namespace clteval;

TEST_CASE("split handles empty fields and missing trailing delimiter") {
    CHECK(util::split("a\tb\tc", '\t') == std::vector<std::string>{"a", "b", "c"});
    CHECK(util::split("a\t\tc", '\t') == std::vector<std::string>{"a", "", "c"});
    CHECK(util::split("", '\t') == std::vector<std::string>{""});
    CHECK(util::split("a\t", '\t') == std::vector<std::string>{"a", ""});
}

TEST_CASE("join is the inverse of split for delimiter-free parts") {
    std::vector<std::string> parts{"x", "y", "z"};
    CHECK(util::join(parts, ", ") == "x, y, z");
    CHECK(util::split(util::join(parts, "\t"), '\t') == parts);
    CHECK(util::join({}, ",").empty());
}

TEST_CASE("trim strips surrounding whitespace only") {
    CHECK(util::trim("  a b \t\n") == "a b");
    CHECK(util::trim("\r\n") == "");
    CHECK(util::trim("plain") == "plain");
}

TEST_CASE("starts_with / ends_with") {
    CHECK(util::starts_with("foobar", "foo"));
    CHECK_FALSE(util::starts_with("fo", "foo"));
    CHECK(util::ends_with("foobar", "bar"));
    CHECK_FALSE(util::ends_with("ar", "bar"));
}

TEST_CASE("fmt_fixed renders fixed decimals") {
    CHECK(util::fmt_fixed(22.749999, 2) == "22.75");
    CHECK(util::fmt_fixed(0.0, 4) == "0.0000");
    CHECK(util::fmt_fixed(-1.5, 1) == "-1.5");
}

TEST_CASE("sha256_hex matches the published test vector") {
    // FIPS 180-2 appendix B.1
    CHECK(util::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(util::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(util::sha256_hex("abc") != util::sha256_hex("abd"));
}

TEST_CASE("atomic write then read round-trips, creating parent dirs") {
    testutil::TempDir tmp;
    auto path = tmp.path() / "nested" / "dir" / "file.txt";
    util::write_text_file_atomic(path, "line1\nline2\n");
    CHECK(util::read_text_file(path) == "line1\nline2\n");
    CHECK(util::read_lines(path) == std::vector<std::string>{"line1", "line2"});
    // No temp litter left behind.
    std::size_t entries = 0;
    for ([[maybe_unused]] auto& e : std::filesystem::directory_iterator(path.parent_path()))
        ++entries;
    CHECK(entries == 1);
}

TEST_CASE("read_text_file throws DataError on missing files") {
    CHECK_THROWS_AS(util::read_text_file("/nonexistent/clteval/file"), util::DataError);
}

TEST_CASE("with_retries retries retryable transport errors and then succeeds") {
    std::atomic<int> calls{0};
    util::RetryPolicy policy;
    policy.max_attempts = 3;
    policy.backoff_ms = 1;
    int result = util::with_retries(
        [&]() -> int {
            if (calls.fetch_add(1) < 2) throw util::TransportError("flaky", true);
            return 42;
        },
        policy);
    CHECK(result == 42);
    CHECK(calls.load() == 3);
}

TEST_CASE("with_retries gives up after max_attempts") {
    std::atomic<int> calls{0};
    util::RetryPolicy policy;
    policy.max_attempts = 2;
    policy.backoff_ms = 1;
    CHECK_THROWS_AS(util::with_retries(
                        [&]() -> int {
                            calls.fetch_add(1);
                            throw util::TransportError("always down", true);
                        },
                        policy),
                    util::TransportError);
    CHECK(calls.load() == 2);
}

TEST_CASE("with_retries does not retry non-retryable errors") {
    std::atomic<int> calls{0};
    util::RetryPolicy policy;
    policy.max_attempts = 5;
    policy.backoff_ms = 1;
    CHECK_THROWS_AS(util::with_retries(
                        [&]() -> int {
                            calls.fetch_add(1);
                            throw util::TransportError("bad request", false);
                        },
                        policy),
                    util::TransportError);
    CHECK(calls.load() == 1);
}

TEST_CASE("with_retries passes through non-transport exceptions immediately") {
    std::atomic<int> calls{0};
    CHECK_THROWS_AS(util::with_retries([&]() -> int {
                        calls.fetch_add(1);
                        throw util::DataError("not transport");
                    }),
                    util::DataError);
    CHECK(calls.load() == 1);
}
