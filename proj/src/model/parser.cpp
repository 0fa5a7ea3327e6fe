#include "hita/model/parser.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "hita/common/vtime.hpp"
#include "hita/model/checker.hpp"

namespace hita::model {

namespace {

enum class Tok { Ident, Int, Float, Duration, Datetime, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifier / punctuation / raw number / decoded string
    SourcePos pos;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.pos = {line_, col_};
            if (at_end()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            const char c = peek();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.kind = Tok::Ident;
                while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) t.text += take();
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_number(t);
            } else if (c == '"') {
                lex_string(t);
            } else if (c == '@') {
                take();
                t.kind = Tok::Datetime;
                while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-' || peek() == ':' ||
                                     peek() == '.'))
                    t.text += take();
                if (!vtime::parse_datetime(t.text)) throw ParseError(t.pos.line, t.pos.column, "bad datetime literal '@" + t.text + "'");
            } else {
                t.kind = Tok::Punct;
                static const char* kTwo[] = {"->", "=>", "==", "!=", "<=", ">=", ":=", ".."};
                bool matched = false;
                for (const char* p : kTwo) {
                    if (src_.substr(pos_, 2) == p) {
                        t.text = p;
                        take();
                        take();
                        matched = true;
                        break;
                    }
                }
                if (!matched) {
                    if (std::string_view("{}()[],;:.|<>=+-*/%").find(c) == std::string_view::npos)
                        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
                    t.text = std::string(1, take());
                }
            }
            out.push_back(std::move(t));
        }
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }
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

    void skip_space() {
        while (!at_end()) {
            if (std::isspace(static_cast<unsigned char>(peek()))) {
                take();
            } else if (peek() == '#') {
                while (!at_end() && peek() != '\n') take();
            } else {
                break;
            }
        }
    }

    void lex_number(Token& t) {
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            t.text += take();
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
            if (peek() == 'e' || peek() == 'E') lex_exponent(t);
            t.kind = Tok::Float;
            return;
        }
        if ((peek() == 'e' || peek() == 'E') &&
            (std::isdigit(static_cast<unsigned char>(peek(1))) || ((peek(1) == '-' || peek(1) == '+') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
            lex_exponent(t);
            t.kind = Tok::Float;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(peek()))) {
            // Duration literal: one or more <digits><unit> groups.
            while (!at_end() && std::isalnum(static_cast<unsigned char>(peek()))) t.text += take();
            if (!vtime::parse_duration(t.text)) throw ParseError(t.pos.line, t.pos.column, "bad duration literal '" + t.text + "'");
            t.kind = Tok::Duration;
            return;
        }
        t.kind = Tok::Int;
    }

    void lex_exponent(Token& t) {
        t.text += take();
        if (peek() == '-' || peek() == '+') t.text += take();
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
    }

    void lex_string(Token& t) {
        t.kind = Tok::String;
        take();
        for (;;) {
            if (at_end() || peek() == '\n') throw ParseError(t.pos.line, t.pos.column, "unterminated string");
            char c = take();
            if (c == '"') break;
            if (c == '\\') {
                if (at_end()) throw ParseError(t.pos.line, t.pos.column, "unterminated string");
                const char e = take();
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: throw ParseError(line_, col_, std::string("unknown escape \\") + e);
                }
            }
            t.text += c;
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

const std::set<std::string, std::less<>> kKeywords = {"and", "or", "not", "in", "true", "false", "implies"};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    DeviceModel model() {
        DeviceModel m;
        expect_ident("twinmodel");
        const Token& v = next();
        if (v.kind != Tok::Int || v.text != "1") fail(v, "unsupported format version (expected 'twinmodel 1')");

        expect_ident("device");
        m.name = ident("device name");
        expect_ident("version");
        m.version = string_lit("version string");
        expect(";");

        if (accept_ident("properties")) properties(m);
        if (accept_ident("constraints")) constraints(m);
        expect_ident("states");
        states(m);
        if (accept_ident("transitions")) transitions(m);
        expect_ident("api");
        api(m);
        if (peek().kind != Tok::End) fail(peek(), "unexpected '" + peek().text + "' after api section");
        return m;
    }

    Expr expression_only() {
        Expr e = expr();
        if (peek().kind != Tok::End) fail(peek(), "unexpected '" + peek().text + "' after expression");
        return e;
    }

private:
    // ---- sections --------------------------------------------------------

    void properties(DeviceModel& m) {
        expect("{");
        while (!accept("}")) {
            PropertyDef p;
            p.pos = peek().pos;
            p.name = ident("property name");
            expect(":");
            p.type = type();
            if (accept_ident("unit")) p.unit = string_lit("unit");
            if (accept("=")) p.default_value = literal();
            expect(";");
            m.properties.push_back(std::move(p));
        }
    }

    void constraints(DeviceModel& m) {
        expect("{");
        while (!accept("}")) {
            Constraint c;
            c.pos = peek().pos;
            c.id = ident("constraint id");
            expect(":");
            c.expr = expr();
            expect_ident("message");
            c.message = string_lit("constraint message");
            expect(";");
            m.constraints.push_back(std::move(c));
        }
    }

    void states(DeviceModel& m) {
        expect("{");
        while (!accept("}")) {
            State s;
            s.pos = peek().pos;
            bool initial = false;
            if (peek().kind == Tok::Ident && peek().text == "initial" && peek(1).kind == Tok::Ident) {
                next();
                initial = true;
            }
            s.name = ident("state name");
            if (initial) {
                if (!m.behavior.initial.empty()) fail(toks_[pos_ - 1], "second initial state '" + s.name + "'");
                m.behavior.initial = s.name;
            }
            if (accept("{")) {
                expect_ident("entry");
                expect("{");
                while (!accept("}")) s.entry.push_back(action());
                expect("}");
            } else {
                expect(";");
            }
            m.behavior.states.push_back(std::move(s));
        }
    }

    void transitions(DeviceModel& m) {
        expect("{");
        while (!accept("}")) {
            Transition t;
            t.pos = peek().pos;
            if (accept("*")) {
                t.sources.emplace_back(kAnyState);
            } else {
                t.sources.push_back(ident("source state"));
                while (accept("|")) t.sources.push_back(ident("source state"));
            }
            expect("->");
            if (accept("*")) t.target = std::string(kAnyState);
            else t.target = ident("target state");
            expect_ident("on");
            t.trigger = ident("trigger");
            if (accept_ident("when")) t.guard = expr();
            if (accept("{")) {
                while (!accept("}")) t.actions.push_back(action());
            } else {
                expect(";");
            }
            m.behavior.transitions.push_back(std::move(t));
        }
    }

    void api(DeviceModel& m) {
        expect("{");
        expect_ident("outcomes");
        m.outcomes.push_back(ident("outcome"));
        while (accept(",")) m.outcomes.push_back(ident("outcome"));
        expect(";");
        while (!accept("}")) {
            EndpointDef ep;
            ep.pos = peek().pos;
            expect_ident("op");
            ep.operation = ident("operation name");
            expect("(");
            ep.request = fields(")");
            if (accept("->")) {
                expect("(");
                ep.response = fields(")");
            }
            expect(";");
            m.api.push_back(std::move(ep));
        }
    }

    std::vector<FieldDef> fields(const char* close) {
        std::vector<FieldDef> out;
        if (accept(close)) return out;
        do {
            FieldDef f;
            f.name = ident("field name");
            expect(":");
            f.type = type();
            if (accept_ident("range")) {
                Range r;
                r.lo = signed_number();
                expect("..");
                r.hi = signed_number();
                f.range = r;
            }
            out.push_back(std::move(f));
        } while (accept(","));
        expect(close);
        return out;
    }

    double signed_number() {
        const bool neg = accept("-");
        const Token& t = next();
        if (t.kind != Tok::Int && t.kind != Tok::Float) fail(t, "expected number");
        const double v = std::stod(t.text);
        return neg ? -v : v;
    }

    Type type() {
        const Token& t = next();
        if (t.kind != Tok::Ident) fail(t, "expected type");
        if (t.text == "int") return Type::of(TypeKind::Int);
        if (t.text == "float") return Type::of(TypeKind::Float);
        if (t.text == "bool") return Type::of(TypeKind::Bool);
        if (t.text == "string") return Type::of(TypeKind::String);
        if (t.text == "datetime") return Type::of(TypeKind::Datetime);
        if (t.text == "duration") return Type::of(TypeKind::Duration);
        if (t.text == "plan") return Type::of(TypeKind::Plan);
        if (t.text == "enum") {
            expect("{");
            std::vector<std::string> values;
            if (!accept("}")) {
                do {
                    values.push_back(ident("enum value"));
                } while (accept(","));
                expect("}");
            }
            return Type::enumeration(std::move(values));
        }
        fail(t, "unknown type '" + t.text + "'");
    }

    Action action() {
        Action a;
        a.pos = peek().pos;
        if (peek().kind == Tok::Ident && peek().text == "plan" && peek(1).text == ".") {
            next();
            next();
            const std::string op = ident("plan operation");
            if (op == "load") {
                a.kind = ActionKind::PlanLoad;
                expect("(");
                a.target = dotted("request field");
                expect(")");
            } else if (op == "advance") {
                a.kind = ActionKind::PlanAdvance;
            } else if (op == "clear") {
                a.kind = ActionKind::PlanClear;
            } else {
                fail(toks_[pos_ - 1], "unknown plan operation '" + op + "'");
            }
        } else if (accept_ident("respond")) {
            a.kind = ActionKind::Respond;
            a.target = ident("outcome");
            if (peek().text == "{") a.fields = field_inits();
        } else if (accept_ident("notify")) {
            a.kind = ActionKind::Notify;
            a.target = ident("event name");
            if (peek().text == "{") a.fields = field_inits();
        } else {
            a.kind = ActionKind::Assign;
            a.target = ident("property name");
            expect(":=");
            a.value = expr();
        }
        expect(";");
        return a;
    }

    std::vector<FieldInit> field_inits() {
        expect("{");
        std::vector<FieldInit> out;
        if (accept("}")) return out;
        do {
            FieldInit f;
            f.name = ident("field name");
            expect(":");
            f.value = expr();
            out.push_back(std::move(f));
        } while (accept(","));
        expect("}");
        return out;
    }

    // ---- expressions -----------------------------------------------------

    Expr expr() { return implies(); }

    Expr implies() {
        Expr lhs = disjunction();
        const SourcePos p = peek().pos;
        if (accept("=>") || accept_ident("implies")) return Expr::bin(BinaryOp::Implies, std::move(lhs), implies(), p);
        return lhs;
    }

    Expr disjunction() {
        Expr lhs = conjunction();
        for (;;) {
            const SourcePos p = peek().pos;
            if (!accept_ident("or")) return lhs;
            lhs = Expr::bin(BinaryOp::Or, std::move(lhs), conjunction(), p);
        }
    }

    Expr conjunction() {
        Expr lhs = negation();
        for (;;) {
            const SourcePos p = peek().pos;
            if (!accept_ident("and")) return lhs;
            lhs = Expr::bin(BinaryOp::And, std::move(lhs), negation(), p);
        }
    }

    Expr negation() {
        const SourcePos p = peek().pos;
        if (accept_ident("not")) return Expr::un(UnaryOp::Not, negation(), p);
        return comparison();
    }

    Expr comparison() {
        Expr lhs = additive();
        const SourcePos p = peek().pos;
        static const std::pair<const char*, BinaryOp> kOps[] = {{"==", BinaryOp::Eq}, {"!=", BinaryOp::Ne}, {"<=", BinaryOp::Le},
                                                               {">=", BinaryOp::Ge}, {"<", BinaryOp::Lt},   {">", BinaryOp::Gt}};
        for (const auto& [text, op] : kOps) {
            if (accept(text)) return Expr::bin(op, std::move(lhs), additive(), p);
        }
        if (accept_ident("in")) {
            expect("{");
            std::vector<Literal> values;
            if (!accept("}")) {
                do {
                    values.push_back(literal());
                } while (accept(","));
                expect("}");
            }
            return Expr::member(std::move(lhs), std::move(values), p);
        }
        return lhs;
    }

    Expr additive() {
        Expr lhs = multiplicative();
        for (;;) {
            const SourcePos p = peek().pos;
            if (accept("+")) lhs = Expr::bin(BinaryOp::Add, std::move(lhs), multiplicative(), p);
            else if (accept("-")) lhs = Expr::bin(BinaryOp::Sub, std::move(lhs), multiplicative(), p);
            else return lhs;
        }
    }

    Expr multiplicative() {
        Expr lhs = unary();
        for (;;) {
            const SourcePos p = peek().pos;
            if (accept("*")) lhs = Expr::bin(BinaryOp::Mul, std::move(lhs), unary(), p);
            else if (accept("/")) lhs = Expr::bin(BinaryOp::Div, std::move(lhs), unary(), p);
            else if (accept("%")) lhs = Expr::bin(BinaryOp::Mod, std::move(lhs), unary(), p);
            else return lhs;
        }
    }

    Expr unary() {
        const SourcePos p = peek().pos;
        if (accept("-")) return Expr::un(UnaryOp::Neg, unary(), p);
        return primary();
    }

    Expr primary() {
        const Token& t = peek();
        if (accept("(")) {
            Expr e = expr();
            expect(")");
            return e;
        }
        if (t.kind == Tok::Ident && !kKeywords.count(t.text)) {
            const SourcePos p = t.pos;
            return Expr::reference(dotted("name"), p);
        }
        const SourcePos p = t.pos;
        return Expr::lit(literal(), p);
    }

    std::string dotted(const char* what) {
        std::string path = ident(what);
        while (peek().text == "." && peek().kind == Tok::Punct && peek(1).kind == Tok::Ident) {
            next();
            path += "." + next().text;
        }
        return path;
    }

    Literal literal() {
        const bool neg = peek().text == "-" && peek().kind == Tok::Punct;
        if (neg) next();
        const Token& t = next();
        Literal l;
        switch (t.kind) {
            case Tok::Int: {
                l.kind = Literal::Kind::Int;
                try {
                    const std::int64_t v = std::stoll(t.text);
                    l.value = neg ? -v : v;
                } catch (const std::out_of_range&) {
                    fail(t, "integer literal out of range");
                }
                return l;
            }
            case Tok::Float: {
                l.kind = Literal::Kind::Float;
                const double v = std::stod(t.text);
                l.value = neg ? -v : v;
                return l;
            }
            case Tok::Duration: {
                l.kind = Literal::Kind::Duration;
                const std::int64_t v = *vtime::parse_duration(t.text);
                l.value = neg ? -v : v;
                return l;
            }
            default: break;
        }
        if (neg) fail(t, "expected number after '-'");
        switch (t.kind) {
            case Tok::Datetime:
                l.kind = Literal::Kind::Datetime;
                l.value = *vtime::parse_datetime(t.text);
                return l;
            case Tok::String:
                l.kind = Literal::Kind::String;
                l.value = t.text;
                return l;
            case Tok::Ident:
                if (t.text == "true" || t.text == "false") {
                    l.kind = Literal::Kind::Bool;
                    l.value = t.text == "true";
                    return l;
                }
                if (kKeywords.count(t.text)) break;
                l.kind = Literal::Kind::Symbol;
                l.value = t.text;
                return l;
            default: break;
        }
        fail(t, "expected literal, found '" + t.text + "'");
    }

    // ---- token helpers ---------------------------------------------------

    const Token& peek(std::size_t ahead = 0) const {
        const std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool accept(std::string_view punct) {
        if (peek().kind == Tok::Punct && peek().text == punct) {
            next();
            return true;
        }
        return false;
    }
    bool accept_ident(std::string_view word) {
        if (peek().kind == Tok::Ident && peek().text == word) {
            next();
            return true;
        }
        return false;
    }
    void expect(std::string_view punct) {
        if (!accept(punct)) fail(peek(), "expected '" + std::string(punct) + "', found " + describe(peek()));
    }
    void expect_ident(std::string_view word) {
        if (!accept_ident(word)) fail(peek(), "expected '" + std::string(word) + "', found " + describe(peek()));
    }
    std::string ident(const char* what) {
        const Token& t = peek();
        if (t.kind != Tok::Ident || kKeywords.count(t.text)) fail(t, std::string("expected ") + what + ", found " + describe(t));
        return next().text;
    }
    std::string string_lit(const char* what) {
        const Token& t = peek();
        if (t.kind != Tok::String) fail(t, std::string("expected ") + what + ", found " + describe(t));
        return next().text;
    }
    static std::string describe(const Token& t) {
        if (t.kind == Tok::End) return "end of input";
        if (t.kind == Tok::String) return "string \"" + t.text + "\"";
        return "'" + t.text + "'";
    }
    [[noreturn]] static void fail(const Token& t, const std::string& msg) { throw ParseError(t.pos.line, t.pos.column, msg); }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace

DeviceModel parse_model_syntax(std::string_view text) {
    Parser p(Lexer(text).run());
    return p.model();
}

DeviceModel parse_model(std::string_view text) {
    DeviceModel m = parse_model_syntax(text);
    resolve_symbols(m);
    for (const auto& d : check_model(m)) {
        if (d.severity == Severity::Error && d.code != DiagCode::Nondeterminism)
            throw ParseError(d.pos.line, d.pos.column, std::string(to_string(d.code)) + ": " + d.message);
    }
    return m;
}

DeviceModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

Expr parse_expression(std::string_view text) {
    Parser p(Lexer(text).run());
    return p.expression_only();
}

}  // namespace hita::model
