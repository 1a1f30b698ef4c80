#pragma once

// Unicode text plumbing shared by the BLEU scorer and the answer metrics:
// UTF-8 codepoint access, NFC normalization, case folding, punctuation
// stripping, and the script-aware tokenizer (whitespace split plus
// single-character tokens for CJK/Thai scripts).

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "clteval/util.hpp"

namespace clteval::text {

// ---------------------------------------------------------------------------
// UTF-8 <-> UTF-32
// ---------------------------------------------------------------------------

// Decodes UTF-8; invalid sequences decode to U+FFFD (one replacement per
// bad byte) so tokenization is total.
inline std::u32string to_u32(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < s.size() &&
                   (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80) {
            cp = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
            len = 2;
            if (cp < 0x80) cp = 0xFFFD;  // overlong
        } else if ((b0 >> 4) == 0xE && i + 2 < s.size() &&
                   (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80 &&
                   (static_cast<unsigned char>(s[i + 2]) & 0xC0) == 0x80) {
            cp = ((b0 & 0x0Fu) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
                 (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
            len = 3;
            if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
        } else if ((b0 >> 3) == 0x1E && i + 3 < s.size() &&
                   (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80 &&
                   (static_cast<unsigned char>(s[i + 2]) & 0xC0) == 0x80 &&
                   (static_cast<unsigned char>(s[i + 3]) & 0xC0) == 0x80) {
            cp = ((b0 & 0x07u) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
                 ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
                 (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
            len = 4;
            if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
        }
        if (cp == 0xFFFD && len > 1) len = 1;
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_u8(std::string& out, char32_t cp) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

inline std::string to_u8(const std::u32string& s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) append_u8(out, cp);
    return out;
}

// ---------------------------------------------------------------------------
// Normalization and character classes
// ---------------------------------------------------------------------------

inline std::string nfc(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC instance unavailable");
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString normalized = norm->normalize(u, status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

inline bool is_space(char32_t cp) {
    return u_isWhitespace(static_cast<UChar32>(cp)) != 0;
}

// Punctuation stripped by answer normalization: every Unicode P* codepoint
// plus the ASCII symbol characters ($ + < = > ^ ` | ~) that conventional
// QA scorers also delete even though Unicode files them under S*.
inline bool is_strip_punct(char32_t cp) {
    if (u_ispunct(static_cast<UChar32>(cp)) != 0) return true;
    switch (cp) {
        case U'$': case U'+': case U'<': case U'=': case U'>':
        case U'^': case U'`': case U'|': case U'~':
            return true;
        default:
            return false;
    }
}

// Scripts whose characters tokenize one codepoint per token (no spaces
// between words). Keep this table in sync with the Python reference
// implementation in tests/oracles/gen_bleu_fixture.py.
inline bool is_char_token(char32_t cp) {
    static constexpr std::array<std::pair<char32_t, char32_t>, 9> kRanges{{
        {0x0E00, 0x0E7F},    // Thai
        {0x1100, 0x11FF},    // Hangul Jamo
        {0x3040, 0x309F},    // Hiragana
        {0x30A0, 0x30FF},    // Katakana
        {0x3400, 0x4DBF},    // CJK Extension A
        {0x4E00, 0x9FFF},    // CJK Unified Ideographs
        {0xAC00, 0xD7AF},    // Hangul Syllables
        {0xF900, 0xFAFF},    // CJK Compatibility Ideographs
        {0x20000, 0x2FFFF},  // CJK Extensions B and beyond
    }};
    for (auto [lo, hi] : kRanges) {
        if (cp >= lo && cp <= hi) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

// Splits on whitespace; characters of space-less scripts (CJK, Thai, Hangul)
// become single-character tokens. Everything else is kept verbatim — no case
// folding, no punctuation handling — so the function is usable both for BLEU
// (raw surface tokens) and, after normalization, for answer F1.
inline std::vector<std::string> tokenize_script(std::string_view s) {
    std::vector<std::string> tokens;
    std::string run;
    for (char32_t cp : to_u32(s)) {
        if (is_space(cp)) {
            if (!run.empty()) {
                tokens.push_back(std::move(run));
                run.clear();
            }
        } else if (is_char_token(cp)) {
            if (!run.empty()) {
                tokens.push_back(std::move(run));
                run.clear();
            }
            std::string one;
            append_u8(one, cp);
            tokens.push_back(std::move(one));
        } else {
            append_u8(run, cp);
        }
    }
    if (!run.empty()) tokens.push_back(std::move(run));
    return tokens;
}

// ---------------------------------------------------------------------------
// Answer normalization (metrics)
// ---------------------------------------------------------------------------

// NFC -> lowercase -> delete punctuation -> script-aware tokenize; for
// English additionally drop the articles {a, an, the}. Mirrors the standard
// SQuAD v1.1 normalizer on English input while staying well-defined for
// space-less scripts.
inline std::vector<std::string> normalize_answer_tokens(std::string_view answer,
                                                        std::string_view language) {
    std::u32string filtered;
    for (char32_t cp : to_u32(nfc(answer))) {
        if (is_strip_punct(cp)) continue;
        filtered.push_back(static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp))));
    }
    std::vector<std::string> tokens = tokenize_script(to_u8(filtered));
    if (language == "en") {
        std::vector<std::string> kept;
        kept.reserve(tokens.size());
        for (auto& t : tokens) {
            if (t == "a" || t == "an" || t == "the") continue;
            kept.push_back(std::move(t));
        }
        tokens = std::move(kept);
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Deduplication keys
// ---------------------------------------------------------------------------

// NFC + whitespace-collapsed comparison key. MT output whitespace is
// unstable, so duplicate detection must not depend on it.
inline std::string dedup_key(std::string_view s) {
    std::string normalized = nfc(s);
    std::string out;
    bool pending_space = false;
    for (char32_t cp : to_u32(normalized)) {
        if (is_space(cp)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            append_u8(out, cp);
        }
    }
    return out;
}

// Exact substring containment after NFC normalization of both sides.
inline bool contains_nfc(std::string_view haystack, std::string_view needle) {
    return nfc(haystack).find(nfc(needle)) != std::string::npos;
}

}  // namespace clteval::text
