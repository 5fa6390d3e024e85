#pragma once

// Assembly frontend for gate programs:
//
//   from MyDefs.Demo usepulses *
//   register q[3]
//
//   flip q[0]
//   loop 10 {
//       half_flip q[1] 90
//   }
//   < flip q[0] | flip q[2] >
//
// Statements end at a newline or ';'.  Loops repeat a braced block; angle
// brackets run branches in parallel ('|' separates them).  Gate arguments
// are register references q[i] or numeric literals.  Elaboration resolves
// each call against a bound pulse set, validates the pulses, and emits
// per-channel encoded streams: register slot i drives channel i+1, and the
// shared channel 0 is reached through GLOBAL_BEAM targets in the pulse set.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ionpulse/parse_util.hpp"
#include "ionpulse/pulsedefs.hpp"
#include "ionpulse/schedule.hpp"

namespace ionpulse {

// ---------------------------------------------------------------------------
// AST.  Equality ignores source positions so round-trip checks compare
// structure only.
// ---------------------------------------------------------------------------

struct QubitRef {
    std::string reg;
    std::uint64_t index = 0;
    friend bool operator==(const QubitRef&, const QubitRef&) = default;
};

using CallArg = std::variant<QubitRef, double>;

struct GateCall {
    std::string name;
    std::vector<CallArg> args;
    int line = 1, col = 1;
    friend bool operator==(const GateCall& a, const GateCall& b) {
        return a.name == b.name && a.args == b.args;
    }
};

struct Statement;

struct Block {
    std::vector<Statement> stmts;
    friend bool operator==(const Block&, const Block&);
};

struct LoopStmt {
    std::uint64_t count = 0;
    Block body;
    int line = 1, col = 1;
    friend bool operator==(const LoopStmt& a, const LoopStmt& b) {
        return a.count == b.count && a.body == b.body;
    }
};

struct ParallelStmt {
    std::vector<Statement> branches;
    int line = 1, col = 1;
    friend bool operator==(const ParallelStmt&, const ParallelStmt&);
};

struct Statement {
    std::variant<GateCall, LoopStmt, ParallelStmt, Block> node;
    friend bool operator==(const Statement& a, const Statement& b) { return a.node == b.node; }
};

inline bool operator==(const Block& a, const Block& b) { return a.stmts == b.stmts; }
inline bool operator==(const ParallelStmt& a, const ParallelStmt& b) {
    return a.branches == b.branches;
}

struct Program {
    std::string defs_file; // X in 'from X.Y usepulses *'
    std::string set_name;  // Y
    std::string register_name;
    std::uint64_t register_size = 0; // 0: no register declared
    Block body;
    int use_line = 1, use_col = 1;
    int register_line = 1, register_col = 1;

    friend bool operator==(const Program& a, const Program& b) {
        return a.defs_file == b.defs_file && a.set_name == b.set_name &&
               a.register_name == b.register_name && a.register_size == b.register_size &&
               a.body == b.body;
    }
};

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Token> jaqal_tokens(std::string_view src) {
    lex::Scanner s(src);
    std::vector<Token> out;
    while (!s.done()) {
        const char c = s.peek();
        if (c == ' ' || c == '\t' || c == '\r') {
            s.take();
            continue;
        }
        if (c == '\n') {
            Token t;
            t.kind = TokenKind::newline;
            t.line = s.line();
            t.col = s.col();
            s.take();
            out.push_back(t);
            continue;
        }
        if (c == '/' && s.peek(1) == '/') {
            s.skip_to_line_end();
            continue;
        }
        if (lex::ident_start(c)) {
            out.push_back(lex::scan_ident(s));
            continue;
        }
        if (lex::digit(c) || (c == '.' && lex::digit(s.peek(1)))) {
            out.push_back(lex::scan_number(s));
            continue;
        }
        if (c == '-' && (lex::digit(s.peek(1)) || (s.peek(1) == '.' && lex::digit(s.peek(2))))) {
            const int line = s.line(), col = s.col();
            s.take();
            Token t = lex::scan_number(s);
            t.value = -t.value;
            t.text.insert(t.text.begin(), '-');
            t.line = line;
            t.col = col;
            out.push_back(t);
            continue;
        }
        if (std::string_view(".*[]{}<>|;").find(c) != std::string_view::npos) {
            Token t;
            t.kind = TokenKind::punct;
            t.line = s.line();
            t.col = s.col();
            t.text.push_back(s.take());
            out.push_back(t);
            continue;
        }
        throw ParseError(s.line(), s.col(), std::string("unexpected character '") + c + "'");
    }
    Token end;
    end.kind = TokenKind::end;
    end.line = s.line();
    end.col = s.col();
    out.push_back(end);
    return out;
}

class JaqalParser {
public:
    explicit JaqalParser(std::string_view src) : toks_(jaqal_tokens(src)) {}

    Program parse() {
        Program prog;
        skip_separators();
        prog.use_line = peek().line;
        prog.use_col = peek().col;
        expect_ident("from");
        prog.defs_file = take_name("definition file name");
        expect_punct('.');
        prog.set_name = take_name("pulse set name");
        expect_ident("usepulses");
        expect_punct('*');
        end_statement();

        skip_separators();
        if (peek().is_ident("register")) {
            prog.register_line = peek().line;
            prog.register_col = peek().col;
            ++pos_;
            prog.register_name = take_name("register name");
            expect_punct('[');
            prog.register_size = take_index("register size");
            if (prog.register_size == 0)
                throw ParseError(prog.register_line, prog.register_col,
                                 "register size must be at least 1");
            expect_punct(']');
            end_statement();
        }
        register_name_ = prog.register_name;
        register_size_ = prog.register_size;

        for (;;) {
            skip_separators();
            if (peek().kind == TokenKind::end) break;
            prog.body.stmts.push_back(parse_statement());
            end_statement();
        }
        return prog;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::string register_name_;
    std::uint64_t register_size_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }


    void skip_separators() {
        while (peek().kind == TokenKind::newline || peek().is_punct(';')) ++pos_;
    }

    bool at_statement_end() const {
        const Token& t = peek();
        return t.kind == TokenKind::newline || t.kind == TokenKind::end || t.is_punct(';') ||
               t.is_punct('}') || t.is_punct('|') || t.is_punct('>');
    }

    void end_statement() {
        if (!at_statement_end())
            throw ParseError(peek().line, peek().col,
                             "expected end of statement, found " + describe_token(peek()));
        if (peek().kind == TokenKind::newline || peek().is_punct(';')) ++pos_;
    }

    void expect_ident(std::string_view kw) {
        if (!peek().is_ident(kw))
            throw ParseError(peek().line, peek().col,
                             "expected '" + std::string(kw) + "', found " + describe_token(peek()));
        ++pos_;
    }

    void expect_punct(char c) {
        if (!peek().is_punct(c))
            throw ParseError(peek().line, peek().col,
                             std::string("expected '") + c + "', found " + describe_token(peek()));
        ++pos_;
    }

    std::string take_name(std::string_view what) {
        const Token& t = peek();
        if (t.kind != TokenKind::ident)
            throw ParseError(t.line, t.col,
                             "expected " + std::string(what) + ", found " + describe_token(t));
        ++pos_;
        return t.text;
    }

    std::uint64_t take_index(std::string_view what) {
        const Token& t = peek();
        if (t.kind != TokenKind::number || t.value < 0 || t.value != std::floor(t.value))
            throw ParseError(t.line, t.col,
                             "expected " + std::string(what) +
                                 " (a non-negative integer), found " + describe_token(t));
        ++pos_;
        return static_cast<std::uint64_t>(t.value);
    }

    Statement parse_statement() {
        const Token& t = peek();
        if (t.is_punct('{')) return Statement{parse_block()};
        if (t.is_punct('<')) return Statement{parse_parallel()};
        if (t.is_ident("loop")) return Statement{parse_loop()};
        if (t.is_ident("register"))
            throw ParseError(t.line, t.col, "register must be declared before any gates");
        if (t.is_ident("from"))
            throw ParseError(t.line, t.col, "usepulses must be the first statement");
        if (t.kind == TokenKind::ident) return Statement{parse_gate_call()};
        throw ParseError(t.line, t.col, "expected a statement, found " + describe_token(t));
    }

    Block parse_block() {
        expect_punct('{');
        Block b;
        for (;;) {
            skip_separators();
            if (peek().is_punct('}')) break;
            if (peek().kind == TokenKind::end)
                throw ParseError(peek().line, peek().col, "unterminated block");
            b.stmts.push_back(parse_statement());
            if (!peek().is_punct('}')) end_statement();
        }
        ++pos_;
        return b;
    }

    LoopStmt parse_loop() {
        LoopStmt l;
        l.line = peek().line;
        l.col = peek().col;
        ++pos_; // loop
        l.count = take_index("loop count");
        if (!peek().is_punct('{'))
            throw ParseError(peek().line, peek().col,
                             "expected '{' after the loop count, found " + describe_token(peek()));
        l.body = parse_block();
        return l;
    }

    ParallelStmt parse_parallel() {
        ParallelStmt p;
        p.line = peek().line;
        p.col = peek().col;
        expect_punct('<');
        for (;;) {
            while (peek().kind == TokenKind::newline) ++pos_;
            p.branches.push_back(parse_statement());
            while (peek().kind == TokenKind::newline) ++pos_;
            if (peek().is_punct('|')) {
                ++pos_;
                continue;
            }
            expect_punct('>');
            break;
        }
        return p;
    }

    GateCall parse_gate_call() {
        GateCall g;
        g.line = peek().line;
        g.col = peek().col;
        g.name = take_name("gate name");
        while (!at_statement_end()) {
            const Token& t = peek();
            if (t.kind == TokenKind::number) {
                g.args.push_back(t.value);
                ++pos_;
                continue;
            }
            if (t.kind == TokenKind::ident) {
                QubitRef q;
                q.reg = t.text;
                const int line = t.line, col = t.col;
                ++pos_;
                expect_punct('[');
                q.index = take_index("qubit index");
                expect_punct(']');
                if (register_size_ == 0)
                    throw ParseError(line, col, "no register was declared");
                if (q.reg != register_name_)
                    throw ParseError(line, col, "unknown register '" + q.reg + "'");
                if (q.index >= register_size_)
                    throw ParseError(line, col,
                                     "index " + std::to_string(q.index) + " is out of range for " +
                                         register_name_ + "[" +
                                         std::to_string(register_size_) + "]");
                g.args.push_back(std::move(q));
                continue;
            }
            throw ParseError(t.line, t.col,
                             "expected a gate argument (q[i] or a number), found " + describe_token(t));
        }
        return g;
    }
};

} // namespace detail

inline Program parse_program(std::string_view src) { return detail::JaqalParser(src).parse(); }

// ---------------------------------------------------------------------------
// Canonical text form.  parse_program(pretty_print(p)) == p for valid p.
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest decimal form that parses back to exactly the same double.
inline std::string fmt_number(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline void print_statement(std::string& out, const Statement& s, int indent);

inline void print_inline(std::string& out, const Statement& s);

inline void print_gate(std::string& out, const GateCall& g) {
    out += g.name;
    for (const auto& a : g.args) {
        out += ' ';
        if (const auto* q = std::get_if<QubitRef>(&a))
            out += q->reg + "[" + std::to_string(q->index) + "]";
        else
            out += fmt_number(std::get<double>(a));
    }
}

inline void print_inline_block(std::string& out, const Block& b) {
    out += "{ ";
    for (std::size_t i = 0; i < b.stmts.size(); ++i) {
        if (i) out += " ; ";
        print_inline(out, b.stmts[i]);
    }
    out += " }";
}

inline void print_inline(std::string& out, const Statement& s) {
    if (const auto* g = std::get_if<GateCall>(&s.node)) {
        print_gate(out, *g);
    } else if (const auto* l = std::get_if<LoopStmt>(&s.node)) {
        out += "loop " + std::to_string(l->count) + " ";
        print_inline_block(out, l->body);
    } else if (const auto* p = std::get_if<ParallelStmt>(&s.node)) {
        out += "< ";
        for (std::size_t i = 0; i < p->branches.size(); ++i) {
            if (i) out += " | ";
            print_inline(out, p->branches[i]);
        }
        out += " >";
    } else {
        print_inline_block(out, std::get<Block>(s.node));
    }
}

inline void print_statement(std::string& out, const Statement& s, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (const auto* l = std::get_if<LoopStmt>(&s.node)) {
        out += pad + "loop " + std::to_string(l->count) + " {\n";
        for (const auto& inner : l->body.stmts) print_statement(out, inner, indent + 1);
        out += pad + "}\n";
    } else if (const auto* b = std::get_if<Block>(&s.node)) {
        out += pad + "{\n";
        for (const auto& inner : b->stmts) print_statement(out, inner, indent + 1);
        out += pad + "}\n";
    } else {
        out += pad;
        print_inline(out, s);
        out += '\n';
    }
}

} // namespace detail

inline std::string pretty_print(const Program& prog) {
    std::string out = "from " + prog.defs_file + "." + prog.set_name + " usepulses *\n";
    if (prog.register_size > 0)
        out += "register " + prog.register_name + "[" + std::to_string(prog.register_size) +
               "]\n";
    if (!prog.body.stmts.empty()) out += "\n";
    for (const auto& s : prog.body.stmts) detail::print_statement(out, s, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------------

namespace detail {

struct Elaborator {
    const BoundPulseSet& set;
    int channel_count;
    std::vector<std::string>* notes;

    ChannelStreams block(const Block& b) const {
        ChannelStreams out = make_streams(channel_count);
        for (const auto& s : b.stmts) append_streams(out, statement(s));
        return out;
    }

    ChannelStreams statement(const Statement& s) const {
        if (const auto* g = std::get_if<GateCall>(&s.node)) return gate(*g);
        if (const auto* l = std::get_if<LoopStmt>(&s.node)) {
            ChannelStreams once = block(l->body);
            ChannelStreams out = make_streams(channel_count);
            for (std::uint64_t i = 0; i < l->count; ++i) append_streams(out, once);
            return out;
        }
        if (const auto* p = std::get_if<ParallelStmt>(&s.node)) {
            std::vector<ChannelStreams> branches;
            branches.reserve(p->branches.size());
            for (const auto& b : p->branches) branches.push_back(statement(b));
            try {
                return merge_parallel(branches, channel_count, notes);
            } catch (const CollisionError& e) {
                throw ParseError(p->line, p->col, e.what());
            }
        }
        return block(std::get<Block>(s.node));
    }

    ChannelStreams gate(const GateCall& call) const {
        if (!set.has_gate(call.name))
            throw ParseError(call.line, call.col,
                             "pulse set '" + set.name() + "' defines no gate '" + call.name +
                                 "'");
        const auto& params = set.gate_params(call.name);
        if (params.size() != call.args.size())
            throw ParseError(call.line, call.col,
                             "gate '" + call.name + "' takes " +
                                 std::to_string(params.size()) + " argument(s), got " +
                                 std::to_string(call.args.size()));
        std::vector<GateArg> args;
        args.reserve(call.args.size());
        for (std::size_t i = 0; i < call.args.size(); ++i) {
            const bool want_qubit = params[i].kind == ParamDef::Kind::qubit;
            if (const auto* q = std::get_if<QubitRef>(&call.args[i])) {
                if (!want_qubit)
                    throw ParseError(call.line, call.col,
                                     "argument " + std::to_string(i + 1) + " of '" + call.name +
                                         "' must be a number");
                args.push_back(GateArg::qubit(static_cast<ChannelId>(q->index + 1)));
            } else {
                if (want_qubit)
                    throw ParseError(call.line, call.col,
                                     "argument " + std::to_string(i + 1) + " of '" + call.name +
                                         "' must be a qubit");
                args.push_back(GateArg::number(std::get<double>(call.args[i])));
            }
        }
        GateBlock gb;
        try {
            gb = set.instantiate(call.name, args);
        } catch (const ParseError& e) {
            throw ParseError(call.line, call.col,
                             "gate '" + call.name + "': " + e.what() +
                                 " (in the pulse definitions)");
        }
        for (const auto& p : gb.pulses) {
            const auto diags = validate_pulse(p, channel_count);
            if (!diags.empty()) {
                std::string msg = "gate '" + call.name + "' produced an invalid pulse: ";
                for (std::size_t i = 0; i < diags.size(); ++i) {
                    if (i) msg += "; ";
                    msg += to_string(diags[i]);
                }
                throw ParseError(call.line, call.col, msg);
            }
        }
        return sequence(std::vector<GateBlock>{std::move(gb)}, channel_count);
    }
};

} // namespace detail

/// Resolve every gate call against the pulse set and produce per-channel
/// encoded pulse streams.  Loops unroll; parallel branches merge with
/// identical shared-channel pulses deduplicated and anything else rejected.
inline ChannelStreams elaborate(const Program& prog, const BoundPulseSet& set,
                                int channel_count = default_channel_count,
                                std::vector<std::string>* notes = nullptr) {
    if (prog.set_name != set.name())
        throw ParseError(prog.use_line, prog.use_col,
                         "program uses pulse set '" + prog.set_name + "' but '" + set.name() +
                             "' was loaded");
    if (prog.register_size + 1 > static_cast<std::uint64_t>(channel_count))
        throw ParseError(prog.register_line, prog.register_col,
                         "register " + prog.register_name + "[" +
                             std::to_string(prog.register_size) + "] needs " +
                             std::to_string(prog.register_size + 1) + " channels, only " +
                             std::to_string(channel_count) + " available");
    detail::Elaborator el{set, channel_count, notes};
    return el.block(prog.body);
}

} // namespace ionpulse
