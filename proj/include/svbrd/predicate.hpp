#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

enum class CompareOp { less, less_equal, greater, greater_equal, equal };

constexpr std::string_view to_string(CompareOp op) {
    switch (op) {
        case CompareOp::less: return "<";
        case CompareOp::less_equal: return "<=";
        case CompareOp::greater: return ">";
        case CompareOp::greater_equal: return ">=";
        case CompareOp::equal: return "=";
    }
    return "?";
}

/// Boolean expression over feature atoms.
///
/// Grammar (keywords case-insensitive, AND binds tighter than OR):
///
///     expr    := conj ('OR' conj)*
///     conj    := clause ('AND' clause)*
///     clause  := 'NOT' clause | '(' expr ')'
///              | atom cmp number | atom 'IN' number '..' number
///     cmp     := '<' | '<=' | '>' | '>=' | '=' | '==' | '≤' | '≥'
///
/// Parsed trees are canonical: AND/OR chains are flattened into n-ary nodes.
struct Predicate {
    enum class Kind { compare, range, all_of, any_of, negate };

    Kind kind = Kind::compare;
    FeatureAtom atom = FeatureAtom::mean_speed;
    CompareOp op = CompareOp::less;
    double value = 0.0;  ///< comparison literal, or range lower bound
    double upper = 0.0;  ///< range upper bound
    std::vector<Predicate> children;

    static Predicate compare(FeatureAtom atom, CompareOp op, double value) {
        Predicate p;
        p.kind = Kind::compare;
        p.atom = atom;
        p.op = op;
        p.value = value;
        return p;
    }
    static Predicate range(FeatureAtom atom, double lo, double hi) {
        Predicate p;
        p.kind = Kind::range;
        p.atom = atom;
        p.value = lo;
        p.upper = hi;
        return p;
    }
    static Predicate all_of(std::vector<Predicate> cs) { return combine(Kind::all_of, std::move(cs)); }
    static Predicate any_of(std::vector<Predicate> cs) { return combine(Kind::any_of, std::move(cs)); }
    static Predicate negate(Predicate c) {
        Predicate p;
        p.kind = Kind::negate;
        p.children.push_back(std::move(c));
        return p;
    }

    friend bool operator==(const Predicate& a, const Predicate& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::compare: return a.atom == b.atom && a.op == b.op && a.value == b.value;
            case Kind::range: return a.atom == b.atom && a.value == b.value && a.upper == b.upper;
            default: return a.children == b.children;
        }
    }

private:
    static Predicate combine(Kind kind, std::vector<Predicate> cs) {
        Predicate p;
        p.kind = kind;
        for (auto& c : cs) {
            if (c.kind == kind) {
                for (auto& g : c.children) p.children.push_back(std::move(g));
            } else {
                p.children.push_back(std::move(c));
            }
        }
        return p;
    }
};

namespace detail {

struct Token {
    enum class Type { atom_or_keyword, number, op, lparen, rparen, dotdot, end };
    Type type = Type::end;
    std::string text;
    std::size_t pos = 0;
    double number = 0.0;
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (i_ >= src_.size()) {
                out.push_back({Token::Type::end, "", i_, 0.0});
                return out;
            }
            out.push_back(next());
        }
    }

private:
    void skip_space() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    }

    bool starts_number(std::size_t at) const {
        if (at >= src_.size()) return false;
        const char c = src_[at];
        if (std::isdigit(static_cast<unsigned char>(c))) return true;
        if (c == '.' && at + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at + 1]))) return true;
        return false;
    }

    Token next() {
        const std::size_t start = i_;
        const char c = src_[i_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) {
                ++i_;
            }
            return {Token::Type::atom_or_keyword, std::string(src_.substr(start, i_ - start)), start, 0.0};
        }
        if (starts_number(i_) || ((c == '-' || c == '+') && starts_number(i_ + 1))) {
            return lex_number();
        }
        if (c == '(') return {Token::Type::lparen, "(", i_++, 0.0};
        if (c == ')') return {Token::Type::rparen, ")", i_++, 0.0};
        if (src_.substr(i_, 2) == "..") {
            i_ += 2;
            return {Token::Type::dotdot, "..", start, 0.0};
        }
        for (std::string_view op : {"<=", ">=", "==", "≤", "≥", "<", ">", "="}) {
            if (src_.substr(i_, op.size()) == op) {
                i_ += op.size();
                return {Token::Type::op, std::string(op), start, 0.0};
            }
        }
        throw ParseError(ErrorCode::SyntaxError, start, "unexpected character '" + std::string(1, c) + "'");
    }

    Token lex_number() {
        const std::size_t start = i_;
        if (src_[i_] == '-' || src_[i_] == '+') ++i_;
        auto digits = [&] {
            while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
        };
        digits();
        // a '.' belongs to the number only when a digit follows ("0.2..0.3")
        if (i_ + 1 < src_.size() && src_[i_] == '.' && std::isdigit(static_cast<unsigned char>(src_[i_ + 1]))) {
            ++i_;
            digits();
        } else if (i_ < src_.size() && src_[i_] == '.' && (i_ + 1 >= src_.size() || src_[i_ + 1] != '.')) {
            ++i_;  // trailing dot, e.g. "2."
        }
        if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
            std::size_t j = i_ + 1;
            if (j < src_.size() && (src_[j] == '-' || src_[j] == '+')) ++j;
            if (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) {
                i_ = j;
                digits();
            }
        }
        const std::string text(src_.substr(start, i_ - start));
        const double value = std::strtod(text.c_str(), nullptr);
        if (!std::isfinite(value)) {
            throw ParseError(ErrorCode::NonFiniteLiteral, start, "literal '" + text + "' is not finite");
        }
        return {Token::Type::number, text, start, value};
    }

    std::string_view src_;
    std::size_t i_ = 0;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Predicate parse() {
        Predicate p = parse_or();
        if (peek().type != Token::Type::end) fail(peek(), "unexpected '" + peek().text + "'");
        return p;
    }

private:
    const Token& peek() const { return toks_[i_]; }
    const Token& take() { return toks_[i_++]; }

    [[noreturn]] static void fail(const Token& t, const std::string& msg) {
        throw ParseError(ErrorCode::SyntaxError, t.pos, t.type == Token::Type::end ? "unexpected end of input" : msg);
    }

    bool at_keyword(std::string_view kw) const {
        return peek().type == Token::Type::atom_or_keyword && upper(peek().text) == kw;
    }

    Predicate parse_or() {
        std::vector<Predicate> parts{parse_and()};
        while (at_keyword("OR")) {
            take();
            parts.push_back(parse_and());
        }
        return parts.size() == 1 ? std::move(parts.front()) : Predicate::any_of(std::move(parts));
    }

    Predicate parse_and() {
        std::vector<Predicate> parts{parse_clause()};
        while (at_keyword("AND")) {
            take();
            parts.push_back(parse_clause());
        }
        return parts.size() == 1 ? std::move(parts.front()) : Predicate::all_of(std::move(parts));
    }

    double number() {
        const Token& t = peek();
        if (t.type == Token::Type::atom_or_keyword) {
            const std::string u = upper(t.text);
            if (u == "INF" || u == "INFINITY" || u == "NAN") {
                throw ParseError(ErrorCode::NonFiniteLiteral, t.pos, "literal '" + t.text + "' is not finite");
            }
        }
        if (t.type != Token::Type::number) fail(t, "expected a number, found '" + t.text + "'");
        return take().number;
    }

    Predicate parse_clause() {
        if (at_keyword("NOT")) {
            take();
            return Predicate::negate(parse_clause());
        }
        if (peek().type == Token::Type::lparen) {
            take();
            Predicate inner = parse_or();
            if (peek().type != Token::Type::rparen) fail(peek(), "expected ')', found '" + peek().text + "'");
            take();
            return inner;
        }
        const Token& name = peek();
        if (name.type != Token::Type::atom_or_keyword) fail(name, "expected a feature name, found '" + name.text + "'");
        const auto atom = find_atom(name.text);
        if (!atom) throw ParseError(ErrorCode::UnknownAtom, name.pos, "unknown feature atom '" + name.text + "'");
        take();

        if (at_keyword("IN")) {
            take();
            const std::size_t lo_pos = peek().pos;
            const double lo = number();
            if (peek().type != Token::Type::dotdot) fail(peek(), "expected '..', found '" + peek().text + "'");
            take();
            const double hi = number();
            if (lo > hi) throw ParseError(ErrorCode::InvalidRange, lo_pos, "range lower bound exceeds upper bound");
            return Predicate::range(*atom, lo, hi);
        }

        const Token& op = peek();
        if (op.type != Token::Type::op) fail(op, "expected a comparison operator, found '" + op.text + "'");
        take();
        CompareOp cmp = CompareOp::equal;
        if (op.text == "<") cmp = CompareOp::less;
        else if (op.text == "<=" || op.text == "≤") cmp = CompareOp::less_equal;
        else if (op.text == ">") cmp = CompareOp::greater;
        else if (op.text == ">=" || op.text == "≥") cmp = CompareOp::greater_equal;
        return Predicate::compare(*atom, cmp, number());
    }

    std::vector<Token> toks_;
    std::size_t i_ = 0;
};

inline std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline void print_into(const Predicate& p, std::string& out) {
    using K = Predicate::Kind;
    switch (p.kind) {
        case K::compare:
            out += to_string(p.atom);
            out += ' ';
            out += to_string(p.op);
            out += ' ';
            out += format_number(p.value);
            return;
        case K::range:
            out += to_string(p.atom);
            out += " IN ";
            out += format_number(p.value);
            out += "..";
            out += format_number(p.upper);
            return;
        case K::negate: {
            out += "NOT ";
            const auto& c = p.children.front();
            const bool wrap = c.kind == K::all_of || c.kind == K::any_of;
            if (wrap) out += '(';
            print_into(c, out);
            if (wrap) out += ')';
            return;
        }
        case K::all_of:
        case K::any_of: {
            const std::string_view sep = p.kind == K::all_of ? " AND " : " OR ";
            for (std::size_t i = 0; i < p.children.size(); ++i) {
                if (i) out += sep;
                const auto& c = p.children[i];
                const bool wrap = c.kind == K::any_of || (c.kind == K::all_of && p.kind == K::all_of);
                if (wrap) out += '(';
                print_into(c, out);
                if (wrap) out += ')';
            }
            return;
        }
    }
}

inline bool eval_node(const Predicate& p, const FeatureVector& f) {
    using K = Predicate::Kind;
    switch (p.kind) {
        case K::compare: {
            const double x = *f.value(p.atom);
            switch (p.op) {
                case CompareOp::less: return x < p.value;
                case CompareOp::less_equal: return x <= p.value;
                case CompareOp::greater: return x > p.value;
                case CompareOp::greater_equal: return x >= p.value;
                case CompareOp::equal: return x == p.value;
            }
            return false;
        }
        case K::range: {
            const double x = *f.value(p.atom);
            return p.value <= x && x <= p.upper;
        }
        case K::negate: return !eval_node(p.children.front(), f);
        case K::all_of:
            for (const auto& c : p.children) {
                if (!eval_node(c, f)) return false;
            }
            return true;
        case K::any_of:
            for (const auto& c : p.children) {
                if (eval_node(c, f)) return true;
            }
            return false;
    }
    return false;
}

inline void collect_atoms(const Predicate& p, std::vector<FeatureAtom>& out) {
    if (p.kind == Predicate::Kind::compare || p.kind == Predicate::Kind::range) {
        out.push_back(p.atom);
        return;
    }
    for (const auto& c : p.children) collect_atoms(c, out);
}

}  // namespace detail

inline Predicate parse_predicate(std::string_view text) {
    return detail::Parser(detail::Lexer(text).run()).parse();
}

/// Canonical text form; parse_predicate(to_string(p)) == p for canonical p.
inline std::string to_string(const Predicate& p) {
    std::string out;
    detail::print_into(p, out);
    return out;
}

inline std::vector<FeatureAtom> referenced_atoms(const Predicate& p) {
    std::vector<FeatureAtom> atoms;
    detail::collect_atoms(p, atoms);
    return atoms;
}

/// Evaluates the predicate; nullopt when any referenced atom is absent
/// from the feature vector.
inline std::optional<bool> evaluate(const Predicate& p, const FeatureVector& f) {
    for (FeatureAtom a : referenced_atoms(p)) {
        if (!f.value(a)) return std::nullopt;
    }
    return detail::eval_node(p, f);
}

}  // namespace svbrd
