#pragma once

// Shared bits for the two text frontends: a source-positioned error type, a
// character scanner that tracks line/column, and token scanners for the
// lexical atoms both languages share (identifiers, numbers).

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ionpulse {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int col, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ", col " + std::to_string(col) +
                             ": " + message),
          line_(line), col_(col) {}

    int line() const { return line_; }
    int col() const { return col_; }

private:
    int line_;
    int col_;
};

enum class TokenKind { ident, number, punct, newline, end };

struct Token {
    TokenKind kind = TokenKind::end;
    std::string text;
    double value = 0; // numbers only
    int line = 1;
    int col = 1;

    bool is_punct(char c) const { return kind == TokenKind::punct && text.size() == 1 && text[0] == c; }
    bool is_ident(std::string_view s) const { return kind == TokenKind::ident && text == s; }
};

inline std::string describe_token(const Token& t) {
    switch (t.kind) {
    case TokenKind::ident: return "'" + t.text + "'";
    case TokenKind::number: return "number '" + t.text + "'";
    case TokenKind::punct: return "'" + t.text + "'";
    case TokenKind::newline: return "end of line";
    case TokenKind::end: return "end of input";
    }
    return "?";
}

namespace lex {

inline bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

class Scanner {
public:
    explicit Scanner(std::string_view src) : src_(src) {}

    bool done() const { return pos_ >= src_.size(); }
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }
    char take() {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }
    void skip_to_line_end() {
        while (!done() && peek() != '\n') take();
    }

    int line() const { return line_; }
    int col() const { return col_; }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

inline Token scan_ident(Scanner& s) {
    Token t;
    t.kind = TokenKind::ident;
    t.line = s.line();
    t.col = s.col();
    while (!s.done() && ident_char(s.peek())) t.text.push_back(s.take());
    return t;
}

/// Decimal floating literal (digits, optional fraction and exponent) or a
/// binary literal 0b...; the caller guarantees the first character starts one.
inline Token scan_number(Scanner& s) {
    Token t;
    t.kind = TokenKind::number;
    t.line = s.line();
    t.col = s.col();

    if (s.peek() == '0' && (s.peek(1) == 'b' || s.peek(1) == 'B')) {
        t.text.push_back(s.take());
        t.text.push_back(s.take());
        std::uint64_t v = 0;
        bool any = false;
        while (s.peek() == '0' || s.peek() == '1') {
            const char c = s.take();
            v = v * 2 + static_cast<std::uint64_t>(c - '0');
            t.text.push_back(c);
            any = true;
        }
        if (!any || ident_char(s.peek()))
            throw ParseError(t.line, t.col, "malformed binary literal");
        t.value = static_cast<double>(v);
        return t;
    }

    while (digit(s.peek())) t.text.push_back(s.take());
    if (s.peek() == '.' && digit(s.peek(1))) {
        t.text.push_back(s.take());
        while (digit(s.peek())) t.text.push_back(s.take());
    } else if (s.peek() == '.' && !t.text.empty()) {
        t.text.push_back(s.take());
    }
    if ((s.peek() == 'e' || s.peek() == 'E') &&
        (digit(s.peek(1)) || ((s.peek(1) == '+' || s.peek(1) == '-') && digit(s.peek(2))))) {
        t.text.push_back(s.take());
        if (s.peek() == '+' || s.peek() == '-') t.text.push_back(s.take());
        while (digit(s.peek())) t.text.push_back(s.take());
    }
    if (t.text.empty()) throw ParseError(t.line, t.col, "malformed number");

    const char* begin = t.text.data();
    const char* end = begin + t.text.size();
    auto [ptr, ec] = std::from_chars(begin, end, t.value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(t.line, t.col, "malformed number '" + t.text + "'");
    return t;
}

} // namespace lex
} // namespace ionpulse
