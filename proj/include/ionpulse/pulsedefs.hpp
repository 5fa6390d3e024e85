#pragma once

// Pulse definition files bind gate names to the channel pulses they emit.
// A file holds one pulse set: declared calibration keys (values come from a
// separate calibration file), named constants, and gate definitions whose
// bodies are pulse() statements with per-parameter expressions.
//
//   pulseset Demo {
//       calib qubit0_freq        // Hz
//       let red = discretize_frequency(qubit0_freq - 1e5)
//
//       gate gate_flip(qubit q, number angle) {
//           pulse(q, 1.25e-6, freq0 = red, phase0 = angle, amp0 = 50,
//                 sync_mask = 0b01)
//       }
//   }
//
// Gates whose names carry the gate_ prefix are exposed to assembly programs
// under the stripped name; bare names stay internal.  Expressions evaluate
// in double precision except that discretize_frequency() yields a quantized
// value: sums and differences of quantized frequencies combine their integer
// words, so derived tones stay exact on the hardware grid.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ionpulse/core.hpp"
#include "ionpulse/parse_util.hpp"
#include "ionpulse/words.hpp"

namespace ionpulse {

// ---------------------------------------------------------------------------
// Expression AST
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct NumberLit { double value = 0; };
struct BoolLit { bool value = false; };
struct NameRef { std::string name; };
struct UnaryNeg { ExprPtr operand; };
struct BinaryOp { char op = '+'; ExprPtr lhs, rhs; };
struct CallExpr { std::string fn; std::vector<ExprPtr> args; };
struct ListLit { std::vector<ExprPtr> elems; };   // stepped values
struct TupleLit { std::vector<ExprPtr> elems; };  // spline knots

struct Expr {
    std::variant<NumberLit, BoolLit, NameRef, UnaryNeg, BinaryOp, CallExpr, ListLit, TupleLit>
        node;
    int line = 1;
    int col = 1;
};

// ---------------------------------------------------------------------------
// Pulse set AST
// ---------------------------------------------------------------------------

struct CalibDecl {
    std::string key;
    int line = 1, col = 1;
};

struct LetDef {
    std::string name;
    ExprPtr value;
    int line = 1, col = 1;
};

struct ParamDef {
    enum class Kind { qubit, number };
    Kind kind = Kind::number;
    std::string name;
};

struct PulseStmt {
    std::string target; // qubit parameter name or GLOBAL_BEAM
    int target_line = 1, target_col = 1;
    ExprPtr duration;
    std::vector<std::pair<std::string, ExprPtr>> settings;
    int line = 1, col = 1;
};

struct GateDef {
    std::string name;
    std::vector<ParamDef> params;
    std::vector<PulseStmt> pulses;
    int line = 1, col = 1;
};

struct PulseSetDef {
    std::string name;
    std::vector<CalibDecl> calibs;
    std::vector<LetDef> lets;
    std::vector<GateDef> gates;
};

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

namespace detail {

inline const std::set<std::string>& pdef_keywords() {
    static const std::set<std::string> k = {"pulseset", "calib", "let",  "gate",
                                            "qubit",    "number", "pulse", "true",
                                            "false"};
    return k;
}

inline std::vector<Token> pdef_tokens(std::string_view src) {
    lex::Scanner s(src);
    std::vector<Token> out;
    while (!s.done()) {
        const char c = s.peek();
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            s.take();
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
        if (std::string_view("(){}[],=+-*/").find(c) != std::string_view::npos) {
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

class PdefParser {
public:
    explicit PdefParser(std::string_view src) : toks_(pdef_tokens(src)) {}

    PulseSetDef parse() {
        PulseSetDef set;
        expect_ident("pulseset");
        set.name = take_name("pulse set name");
        expect_punct('{');
        std::set<std::string> names; // calibs, lets, gate defs share one namespace
        std::set<std::string> exposed;
        while (!peek().is_punct('}')) {
            if (peek().is_ident("calib")) {
                CalibDecl d;
                d.line = peek().line;
                d.col = peek().col;
                ++pos_;
                d.key = take_name("calibration key");
                claim(names, d.key, d.line, d.col);
                set.calibs.push_back(std::move(d));
            } else if (peek().is_ident("let")) {
                LetDef d;
                d.line = peek().line;
                d.col = peek().col;
                ++pos_;
                d.name = take_name("name");
                claim(names, d.name, d.line, d.col);
                expect_punct('=');
                d.value = parse_expr();
                set.lets.push_back(std::move(d));
            } else if (peek().is_ident("gate")) {
                GateDef g = parse_gate();
                claim(names, g.name, g.line, g.col);
                if (g.name.starts_with("gate_")) {
                    const std::string e = g.name.substr(5);
                    if (e.empty())
                        throw ParseError(g.line, g.col, "gate name 'gate_' has no visible name");
                    if (!exposed.insert(e).second)
                        throw ParseError(g.line, g.col,
                                         "gate '" + e + "' is already defined");
                }
                set.gates.push_back(std::move(g));
            } else {
                throw ParseError(peek().line, peek().col,
                                 "expected 'calib', 'let', 'gate', or '}', found " +
                                     describe_token(peek()));
            }
        }
        ++pos_; // '}'
        if (peek().kind != TokenKind::end)
            throw ParseError(peek().line, peek().col, "trailing input after pulse set");
        return set;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
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
        if (pdef_keywords().count(t.text))
            throw ParseError(t.line, t.col, "'" + t.text + "' is a reserved word");
        ++pos_;
        return t.text;
    }

    static void claim(std::set<std::string>& names, const std::string& n, int line, int col) {
        if (!names.insert(n).second)
            throw ParseError(line, col, "'" + n + "' is already defined");
    }

    GateDef parse_gate() {
        GateDef g;
        g.line = peek().line;
        g.col = peek().col;
        ++pos_; // gate
        g.name = take_name("gate name");
        expect_punct('(');
        std::set<std::string> param_names;
        if (!peek().is_punct(')')) {
            for (;;) {
                ParamDef p;
                if (peek().is_ident("qubit")) p.kind = ParamDef::Kind::qubit;
                else if (peek().is_ident("number")) p.kind = ParamDef::Kind::number;
                else
                    throw ParseError(peek().line, peek().col,
                                     "expected 'qubit' or 'number', found " + describe_token(peek()));
                ++pos_;
                const int line = peek().line, col = peek().col;
                p.name = take_name("parameter name");
                if (p.name == "GLOBAL_BEAM")
                    throw ParseError(line, col, "'GLOBAL_BEAM' names the shared channel");
                claim(param_names, p.name, line, col);
                g.params.push_back(std::move(p));
                if (peek().is_punct(',')) { ++pos_; continue; }
                break;
            }
        }
        expect_punct(')');
        expect_punct('{');
        while (!peek().is_punct('}')) g.pulses.push_back(parse_pulse());
        ++pos_;
        return g;
    }

    PulseStmt parse_pulse() {
        PulseStmt p;
        p.line = peek().line;
        p.col = peek().col;
        expect_ident("pulse");
        expect_punct('(');
        p.target_line = peek().line;
        p.target_col = peek().col;
        p.target = take_name("pulse target");
        expect_punct(',');
        p.duration = parse_expr();
        std::set<std::string> seen;
        while (peek().is_punct(',')) {
            ++pos_;
            const Token& key = peek();
            if (key.kind != TokenKind::ident)
                throw ParseError(key.line, key.col,
                                 "expected parameter name, found " + describe_token(key));
            if (!seen.insert(key.text).second)
                throw ParseError(key.line, key.col, "duplicate parameter '" + key.text + "'");
            ++pos_;
            expect_punct('=');
            p.settings.emplace_back(key.text, parse_expr());
        }
        expect_punct(')');
        return p;
    }

    ExprPtr make(Expr e) { return std::make_unique<Expr>(std::move(e)); }

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        while (peek().is_punct('+') || peek().is_punct('-')) {
            Expr e;
            e.line = peek().line;
            e.col = peek().col;
            const char op = peek().text[0];
            ++pos_;
            e.node = BinaryOp{op, std::move(lhs), parse_term()};
            lhs = make(std::move(e));
        }
        return lhs;
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_unary();
        while (peek().is_punct('*') || peek().is_punct('/')) {
            Expr e;
            e.line = peek().line;
            e.col = peek().col;
            const char op = peek().text[0];
            ++pos_;
            e.node = BinaryOp{op, std::move(lhs), parse_unary()};
            lhs = make(std::move(e));
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (peek().is_punct('-')) {
            Expr e;
            e.line = peek().line;
            e.col = peek().col;
            ++pos_;
            e.node = UnaryNeg{parse_unary()};
            return make(std::move(e));
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        Expr e;
        e.line = peek().line;
        e.col = peek().col;
        const Token& t = peek();

        if (t.kind == TokenKind::number) {
            e.node = NumberLit{t.value};
            ++pos_;
            return make(std::move(e));
        }
        if (t.is_ident("true") || t.is_ident("false")) {
            e.node = BoolLit{t.text == "true"};
            ++pos_;
            return make(std::move(e));
        }
        if (t.kind == TokenKind::ident) {
            if (pdef_keywords().count(t.text))
                throw ParseError(t.line, t.col, "'" + t.text + "' is a reserved word");
            const std::string name = t.text;
            ++pos_;
            if (peek().is_punct('(')) {
                ++pos_;
                CallExpr call;
                call.fn = name;
                if (!peek().is_punct(')')) {
                    call.args.push_back(parse_expr());
                    while (peek().is_punct(',')) {
                        ++pos_;
                        call.args.push_back(parse_expr());
                    }
                }
                expect_punct(')');
                e.node = std::move(call);
            } else {
                e.node = NameRef{name};
            }
            return make(std::move(e));
        }
        if (t.is_punct('(')) {
            ++pos_;
            std::vector<ExprPtr> elems;
            elems.push_back(parse_expr());
            while (peek().is_punct(',')) {
                ++pos_;
                elems.push_back(parse_expr());
            }
            expect_punct(')');
            if (elems.size() == 1) return std::move(elems[0]); // plain grouping
            e.node = TupleLit{std::move(elems)};
            return make(std::move(e));
        }
        if (t.is_punct('[')) {
            ++pos_;
            ListLit list;
            if (peek().is_punct(']'))
                throw ParseError(peek().line, peek().col, "value list cannot be empty");
            list.elems.push_back(parse_expr());
            while (peek().is_punct(',')) {
                ++pos_;
                list.elems.push_back(parse_expr());
            }
            expect_punct(']');
            e.node = std::move(list);
            return make(std::move(e));
        }
        throw ParseError(t.line, t.col, "expected an expression, found " + describe_token(t));
    }
};

} // namespace detail

inline PulseSetDef parse_pulse_defs(std::string_view src) {
    return detail::PdefParser(src).parse();
}

// ---------------------------------------------------------------------------
// Calibration files: '#' comments and 'key = value' lines
// ---------------------------------------------------------------------------

using Calibration = std::map<std::string, double>;

inline Calibration parse_calibration(std::string_view src) {
    Calibration out;
    lex::Scanner s(src);
    while (!s.done()) {
        const char c = s.peek();
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            s.take();
            continue;
        }
        if (c == '#') {
            s.skip_to_line_end();
            continue;
        }
        if (!lex::ident_start(c))
            throw ParseError(s.line(), s.col(),
                             std::string("expected a calibration key, found '") + c + "'");
        Token key = lex::scan_ident(s);
        while (s.peek() == ' ' || s.peek() == '\t') s.take();
        if (s.peek() != '=')
            throw ParseError(s.line(), s.col(), "expected '=' after '" + key.text + "'");
        s.take();
        while (s.peek() == ' ' || s.peek() == '\t') s.take();
        bool negative = false;
        if (s.peek() == '-') {
            negative = true;
            s.take();
        }
        if (!lex::digit(s.peek()) && !(s.peek() == '.' && lex::digit(s.peek(1))))
            throw ParseError(s.line(), s.col(), "expected a number for '" + key.text + "'");
        Token num = lex::scan_number(s);
        while (s.peek() == ' ' || s.peek() == '\t') s.take();
        if (s.peek() == '#') s.skip_to_line_end();
        else if (!s.done() && s.peek() != '\n')
            throw ParseError(s.line(), s.col(), "trailing input after value");
        if (!out.emplace(key.text, negative ? -num.value : num.value).second)
            throw ParseError(key.line, key.col, "duplicate calibration key '" + key.text + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Frequency pinned to the synthesis grid.  Additive arithmetic happens on
/// the integer word, so expressions over quantized frequencies hit the grid
/// exactly instead of within rounding distance.
struct QuantizedFreq {
    std::int64_t word = 0;
    friend bool operator==(const QuantizedFreq&, const QuantizedFreq&) = default;
};

struct ListValue {
    std::vector<double> values;
    friend bool operator==(const ListValue&, const ListValue&) = default;
};

struct KnotsValue {
    std::vector<double> values;
    friend bool operator==(const KnotsValue&, const KnotsValue&) = default;
};

using Value = std::variant<double, QuantizedFreq, bool, ListValue, KnotsValue>;

namespace detail {

struct EvalContext {
    const std::map<std::string, Value>* env = nullptr;
    const std::map<std::string, ChannelId>* qubits = nullptr;
};

inline double value_as_number(const Value& v, int line, int col) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* q = std::get_if<QuantizedFreq>(&v)) return to_hz(FreqWord{q->word});
    throw ParseError(line, col, "expected a number");
}

inline Value eval_expr(const Expr& e, const EvalContext& cx);

inline std::vector<double> eval_number_list(const std::vector<ExprPtr>& elems,
                                            const EvalContext& cx) {
    std::vector<double> out;
    out.reserve(elems.size());
    for (const auto& el : elems)
        out.push_back(value_as_number(eval_expr(*el, cx), el->line, el->col));
    return out;
}

inline Value eval_call(const CallExpr& call, const Expr& e, const EvalContext& cx) {
    auto arg_number = [&](std::size_t i) {
        return value_as_number(eval_expr(*call.args[i], cx), call.args[i]->line,
                               call.args[i]->col);
    };
    auto expect_arity = [&](std::size_t n) {
        if (call.args.size() != n)
            throw ParseError(e.line, e.col,
                             call.fn + "() takes " + std::to_string(n) + " argument" +
                                 (n == 1 ? "" : "s"));
    };
    try {
        if (call.fn == "discretize_frequency") {
            expect_arity(1);
            const Value v = eval_expr(*call.args[0], cx);
            if (const auto* q = std::get_if<QuantizedFreq>(&v)) return *q;
            return QuantizedFreq{
                discretize_frequency(value_as_number(v, e.line, e.col)).value};
        }
        if (call.fn == "discretize_phase") {
            expect_arity(1);
            return to_degrees(discretize_phase(arg_number(0)));
        }
        if (call.fn == "discretize_amplitude") {
            expect_arity(1);
            return to_amplitude(discretize_amplitude(arg_number(0)));
        }
        if (call.fn == "to_hz") {
            expect_arity(1);
            return value_as_number(eval_expr(*call.args[0], cx), e.line, e.col);
        }
    } catch (const std::out_of_range& ex) {
        throw ParseError(e.line, e.col, "in " + call.fn + "(): " + ex.what());
    } catch (const std::domain_error& ex) {
        throw ParseError(e.line, e.col, "in " + call.fn + "(): " + ex.what());
    }
    throw ParseError(e.line, e.col, "unknown function '" + call.fn + "'");
}

inline Value eval_expr(const Expr& e, const EvalContext& cx) {
    if (const auto* n = std::get_if<NumberLit>(&e.node)) return n->value;
    if (const auto* b = std::get_if<BoolLit>(&e.node)) return b->value;
    if (const auto* r = std::get_if<NameRef>(&e.node)) {
        if (cx.env) {
            auto it = cx.env->find(r->name);
            if (it != cx.env->end()) return it->second;
        }
        if (cx.qubits && cx.qubits->count(r->name))
            throw ParseError(e.line, e.col,
                             "qubit parameter '" + r->name + "' is not a number");
        throw ParseError(e.line, e.col, "unknown name '" + r->name + "'");
    }
    if (const auto* u = std::get_if<UnaryNeg>(&e.node)) {
        const Value v = eval_expr(*u->operand, cx);
        if (const auto* q = std::get_if<QuantizedFreq>(&v)) return QuantizedFreq{-q->word};
        return -value_as_number(v, e.line, e.col);
    }
    if (const auto* b = std::get_if<BinaryOp>(&e.node)) {
        const Value lhs = eval_expr(*b->lhs, cx);
        const Value rhs = eval_expr(*b->rhs, cx);
        if ((b->op == '+' || b->op == '-') && std::holds_alternative<QuantizedFreq>(lhs) &&
            std::holds_alternative<QuantizedFreq>(rhs)) {
            const auto l = std::get<QuantizedFreq>(lhs).word;
            const auto r = std::get<QuantizedFreq>(rhs).word;
            return QuantizedFreq{b->op == '+' ? l + r : l - r};
        }
        const double x = value_as_number(lhs, b->lhs->line, b->lhs->col);
        const double y = value_as_number(rhs, b->rhs->line, b->rhs->col);
        switch (b->op) {
        case '+': return x + y;
        case '-': return x - y;
        case '*': return x * y;
        case '/': return x / y;
        }
        throw ParseError(e.line, e.col, "bad operator");
    }
    if (const auto* c = std::get_if<CallExpr>(&e.node)) return eval_call(*c, e, cx);
    if (const auto* l = std::get_if<ListLit>(&e.node))
        return ListValue{eval_number_list(l->elems, cx)};
    const auto& t = std::get<TupleLit>(e.node);
    return KnotsValue{eval_number_list(t.elems, cx)};
}

inline ParamSource value_as_param(const Value& v, int line, int col) {
    if (const auto* d = std::get_if<double>(&v)) return Constant{*d};
    if (const auto* q = std::get_if<QuantizedFreq>(&v)) return Constant{to_hz(FreqWord{q->word})};
    if (const auto* l = std::get_if<ListValue>(&v)) return Discrete{l->values};
    if (const auto* k = std::get_if<KnotsValue>(&v)) {
        if (k->values.size() < 2)
            throw ParseError(line, col, "spline knots need at least two values");
        return SplineKnots{k->values};
    }
    throw ParseError(line, col, "expected a number, list, or knot tuple");
}

inline std::uint8_t value_as_mask(const Value& v, int line, int col) {
    const double d = value_as_number(v, line, col);
    if (d != std::floor(d) || d < 0 || d > 3)
        throw ParseError(line, col, "mask must be an integer between 0 and 3");
    return static_cast<std::uint8_t>(d);
}

inline bool value_as_bool(const Value& v, int line, int col) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ParseError(line, col, "expected true or false");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Binding and instantiation
// ---------------------------------------------------------------------------

struct GateArg {
    enum class Kind { qubit, number };
    Kind kind = Kind::number;
    ChannelId channel = 0;
    double value = 0;

    static GateArg qubit(ChannelId ch) {
        GateArg a;
        a.kind = Kind::qubit;
        a.channel = ch;
        return a;
    }
    static GateArg number(double v) {
        GateArg a;
        a.value = v;
        return a;
    }
};

/// A pulse set joined with its calibration: named constants are evaluated and
/// exposed gates can be instantiated into pulse blocks.
class BoundPulseSet {
public:
    BoundPulseSet(PulseSetDef def, const Calibration& calib) : def_(std::move(def)) {
        for (const auto& c : def_.calibs) {
            auto it = calib.find(c.key);
            if (it == calib.end())
                throw ParseError(c.line, c.col,
                                 "calibration value for '" + c.key + "' is missing");
            env_.emplace(c.key, it->second);
        }
        detail::EvalContext cx{&env_, nullptr};
        for (const auto& l : def_.lets) env_.emplace(l.name, detail::eval_expr(*l.value, cx));
        for (const auto& g : def_.gates)
            if (g.name.starts_with("gate_")) exposed_.emplace(g.name.substr(5), &g);
    }

    BoundPulseSet(const BoundPulseSet&) = delete;
    BoundPulseSet& operator=(const BoundPulseSet&) = delete;

    const std::string& name() const { return def_.name; }

    std::vector<std::string> gate_names() const {
        std::vector<std::string> out;
        out.reserve(exposed_.size());
        for (const auto& [n, g] : exposed_) out.push_back(n);
        return out;
    }

    bool has_gate(const std::string& gate) const { return exposed_.count(gate) != 0; }

    const std::vector<ParamDef>& gate_params(const std::string& gate) const {
        return find_gate(gate).params;
    }

    /// Evaluated binding of a calibration key or let name; throws
    /// std::out_of_range for unknown names.
    const Value& value(const std::string& name) const { return env_.at(name); }

    GateBlock instantiate(const std::string& gate, std::span<const GateArg> args) const {
        const GateDef& g = find_gate(gate);
        if (args.size() != g.params.size())
            throw std::invalid_argument("gate '" + gate + "' takes " +
                                        std::to_string(g.params.size()) + " argument(s), got " +
                                        std::to_string(args.size()));

        std::map<std::string, Value> env = env_;
        std::map<std::string, ChannelId> qubits;
        for (std::size_t i = 0; i < args.size(); ++i) {
            const ParamDef& p = g.params[i];
            const bool want_qubit = p.kind == ParamDef::Kind::qubit;
            if (want_qubit != (args[i].kind == GateArg::Kind::qubit))
                throw std::invalid_argument("gate '" + gate + "' argument " +
                                            std::to_string(i + 1) + " ('" + p.name + "') must be a " +
                                            (want_qubit ? "qubit" : "number"));
            if (want_qubit) qubits.emplace(p.name, args[i].channel);
            else env.insert_or_assign(p.name, args[i].value);
        }

        detail::EvalContext cx{&env, &qubits};
        GateBlock block;
        for (const auto& stmt : g.pulses) {
            ChannelId channel = 0;
            if (stmt.target == "GLOBAL_BEAM") {
                channel = global_beam_channel;
            } else {
                auto it = qubits.find(stmt.target);
                if (it == qubits.end())
                    throw ParseError(stmt.target_line, stmt.target_col,
                                     "pulse target '" + stmt.target +
                                         "' is not a qubit parameter of '" + g.name + "'");
                channel = it->second;
            }
            const double dur = detail::value_as_number(detail::eval_expr(*stmt.duration, cx),
                                                       stmt.duration->line, stmt.duration->col);
            PulseRecord p = nop(channel, dur);
            for (const auto& [key, expr] : stmt.settings) {
                const Value v = detail::eval_expr(*expr, cx);
                const int line = expr->line, col = expr->col;
                if (key == "freq0") p.freq0 = detail::value_as_param(v, line, col);
                else if (key == "freq1") p.freq1 = detail::value_as_param(v, line, col);
                else if (key == "phase0") p.phase0 = detail::value_as_param(v, line, col);
                else if (key == "phase1") p.phase1 = detail::value_as_param(v, line, col);
                else if (key == "amp0") p.amp0 = detail::value_as_param(v, line, col);
                else if (key == "amp1") p.amp1 = detail::value_as_param(v, line, col);
                else if (key == "framerot0") p.framerot0 = detail::value_as_param(v, line, col);
                else if (key == "framerot1") p.framerot1 = detail::value_as_param(v, line, col);
                else if (key == "sync_mask") p.sync_mask = detail::value_as_mask(v, line, col);
                else if (key == "enable_mask") p.enable_mask = detail::value_as_mask(v, line, col);
                else if (key == "fb_enable_mask")
                    p.fb_enable_mask = detail::value_as_mask(v, line, col);
                else if (key == "fwd_frame0_mask")
                    p.fwd_frame0_mask = detail::value_as_mask(v, line, col);
                else if (key == "fwd_frame1_mask")
                    p.fwd_frame1_mask = detail::value_as_mask(v, line, col);
                else if (key == "inv_frame0_mask")
                    p.inv_frame0_mask = detail::value_as_mask(v, line, col);
                else if (key == "inv_frame1_mask")
                    p.inv_frame1_mask = detail::value_as_mask(v, line, col);
                else if (key == "apply_at_end_mask")
                    p.apply_at_end_mask = detail::value_as_mask(v, line, col);
                else if (key == "rst_frame_mask")
                    p.rst_frame_mask = detail::value_as_mask(v, line, col);
                else if (key == "waittrig") p.waittrig = detail::value_as_bool(v, line, col);
                else
                    throw ParseError(line, col, "unknown pulse parameter '" + key + "'");
            }
            block.pulses.push_back(std::move(p));
        }
        return block;
    }

private:
    PulseSetDef def_;
    std::map<std::string, Value> env_;
    std::map<std::string, const GateDef*> exposed_;

    const GateDef& find_gate(const std::string& gate) const {
        auto it = exposed_.find(gate);
        if (it == exposed_.end())
            throw std::invalid_argument("pulse set '" + def_.name +
                                        "' defines no gate named '" + gate + "'");
        return *it->second;
    }
};

} // namespace ionpulse
