#include "linad/text.hpp"

#include <cctype>
#include <charconv>
#include <unordered_map>

#include "linad/rules.hpp"

namespace linad {

namespace {

enum class Tok {
  ident,
  number,
  newline,
  lparen,
  rparen,
  lbracket,
  rbracket,
  lbrace,
  rbrace,
  comma,
  colon,
  equals,
  arrow,
  end,
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::newline: return "end of line";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbracket: return "'['";
    case Tok::rbracket: return "']'";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::comma: return "','";
    case Tok::colon: return "':'";
    case Tok::equals: return "'='";
    case Tok::arrow: return "'->'";
    case Tok::end: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}
bool digit(char c) {
  return std::isdigit(static_cast<unsigned char>(c));
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : s_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') {
          advance();
        }
        continue;
      }
      int line = line_, col = col_;
      if (c == '\n') {
        advance();
        out.push_back({Tok::newline, "\n", line, col});
        continue;
      }
      if (ident_start(c)) {
        size_t start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) {
          advance();
        }
        std::string word = s_.substr(start, pos_ - start);
        // inf/nan are number spellings, not identifiers
        Tok kind = (word == "inf" || word == "nan") ? Tok::number : Tok::ident;
        out.push_back({kind, std::move(word), line, col});
        continue;
      }
      if (digit(c) || c == '.') {
        out.push_back({Tok::number, lex_number(false), line, col});
        continue;
      }
      switch (c) {
        case '(': advance(); out.push_back({Tok::lparen, "(", line, col}); continue;
        case ')': advance(); out.push_back({Tok::rparen, ")", line, col}); continue;
        case '[': advance(); out.push_back({Tok::lbracket, "[", line, col}); continue;
        case ']': advance(); out.push_back({Tok::rbracket, "]", line, col}); continue;
        case '{': advance(); out.push_back({Tok::lbrace, "{", line, col}); continue;
        case '}': advance(); out.push_back({Tok::rbrace, "}", line, col}); continue;
        case ',': advance(); out.push_back({Tok::comma, ",", line, col}); continue;
        case ':': advance(); out.push_back({Tok::colon, ":", line, col}); continue;
        case '=': advance(); out.push_back({Tok::equals, "=", line, col}); continue;
        default: break;
      }
      if (c == '-' || c == '+') {
        if (c == '-' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '>') {
          advance();
          advance();
          out.push_back({Tok::arrow, "->", line, col});
          continue;
        }
        out.push_back({Tok::number, lex_number(true), line, col});
        continue;
      }
      throw ParseError(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::end, "", line_, col_});
    return out;
  }

 private:
  void advance() {
    if (s_[pos_] == '\n') {
      line_++;
      col_ = 1;
    } else {
      col_++;
    }
    pos_++;
  }

  // Greedy number: [sign] (inf | nan | hex-float | decimal-float). The text
  // is validated later by from_chars; this just finds the extent.
  std::string lex_number(bool signed_start) {
    size_t start = pos_;
    int line = line_, col = col_;
    if (signed_start) {
      advance(); // the sign
      if (s_.compare(pos_, 3, "inf") == 0 || s_.compare(pos_, 3, "nan") == 0) {
        advance();
        advance();
        advance();
        return s_.substr(start, pos_ - start);
      }
    }
    if (pos_ + 1 < s_.size() && s_[pos_] == '0' && (s_[pos_ + 1] == 'x' || s_[pos_ + 1] == 'X')) {
      advance();
      advance();
      while (pos_ < s_.size() &&
             (std::isxdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
        advance();
      }
      if (pos_ < s_.size() && (s_[pos_] == 'p' || s_[pos_] == 'P')) {
        advance();
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
          advance();
        }
        while (pos_ < s_.size() && digit(s_[pos_])) {
          advance();
        }
      }
      return s_.substr(start, pos_ - start);
    }
    bool any = false;
    while (pos_ < s_.size() && (digit(s_[pos_]) || s_[pos_] == '.')) {
      any = true;
      advance();
    }
    if (!any) {
      throw ParseError(line, col, "expected a number");
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      advance();
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
        advance();
      }
      while (pos_ < s_.size() && digit(s_[pos_])) {
        advance();
      }
    }
    return s_.substr(start, pos_ - start);
  }

  const std::string& s_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program parse() {
    skip_newlines();
    expect_keyword("fn");
    Program prog;
    prog.name = expect(Tok::ident, "program name").text;
    expect(Tok::lparen, "'('");
    if (peek().kind != Tok::rparen) {
      while (true) {
        Token name = expect(Tok::ident, "parameter name");
        expect(Tok::colon, "':'");
        Shape shape = parse_type();
        define(name, Var{name.text, shape});
        prog.inputs.push_back(Var{name.text, shape});
        if (peek().kind != Tok::comma) {
          break;
        }
        next();
      }
    }
    expect(Tok::rparen, "')'");
    expect(Tok::arrow, "'->'");
    std::vector<Shape> out_types;
    out_types.push_back(parse_type());
    while (peek().kind == Tok::comma) {
      next();
      out_types.push_back(parse_type());
    }
    expect(Tok::newline, "end of line after the signature");

    while (true) {
      skip_newlines();
      Token head = expect(Tok::ident, "equation or 'return'");
      if (head.text == "return") {
        prog.outputs.push_back(parse_atom());
        while (peek().kind == Tok::comma) {
          next();
          prog.outputs.push_back(parse_atom());
        }
        break;
      }
      parse_eqn_tail(prog, head);
    }
    if (peek().kind == Tok::newline) {
      skip_newlines();
    }
    Token tail = peek();
    if (tail.kind != Tok::end) {
      throw ParseError(tail.line, tail.col, "unexpected text after return");
    }
    if (prog.outputs.size() != out_types.size()) {
      throw ParseError(
          1, 1,
          "signature declares " + std::to_string(out_types.size()) + " outputs, return has " +
              std::to_string(prog.outputs.size()));
    }
    for (size_t i = 0; i < out_types.size(); ++i) {
      if (!(prog.outputs[i].shape() == out_types[i])) {
        throw ParseError(
            1, 1,
            "output " + std::to_string(i) + " has shape " + prog.outputs[i].shape().str() +
                ", signature declares " + out_types[i].str());
      }
    }
    return prog;
  }

  Tensor parse_single_tensor() {
    skip_newlines();
    Tensor t = parse_tensor_literal();
    skip_newlines();
    Token tail = peek();
    if (tail.kind != Tok::end) {
      throw ParseError(tail.line, tail.col, "unexpected text after the tensor");
    }
    return t;
  }

  std::vector<Tensor> parse_tensor_sequence() {
    std::vector<Tensor> out;
    skip_newlines();
    while (peek().kind != Tok::end) {
      out.push_back(parse_tensor_literal());
      skip_newlines();
    }
    return out;
  }

 private:
  const Token& peek() const {
    return toks_[pos_];
  }
  Token next() {
    return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_];
  }

  Token expect(Tok kind, const char* what) {
    Token t = next();
    if (t.kind != kind) {
      throw ParseError(
          t.line, t.col,
          std::string("expected ") + what + ", got " +
              (t.kind == Tok::ident || t.kind == Tok::number ? "'" + t.text + "'"
                                                             : tok_name(t.kind)));
    }
    return t;
  }

  void expect_keyword(const char* kw) {
    Token t = next();
    if (t.kind != Tok::ident || t.text != kw) {
      throw ParseError(t.line, t.col, std::string("expected '") + kw + "'");
    }
  }

  void skip_newlines() {
    while (peek().kind == Tok::newline) {
      next();
    }
  }

  void define(const Token& at, Var v) {
    if (v.name == "fn" || v.name == "return") {
      throw ParseError(at.line, at.col, "'" + v.name + "' is a reserved word");
    }
    if (!vars_.emplace(v.name, std::move(v)).second) {
      throw ParseError(at.line, at.col, "redefinition of " + v.name);
    }
  }

  Shape parse_type() {
    Token t = expect(Tok::ident, "a type");
    if (t.text != "f64") {
      throw ParseError(t.line, t.col, "expected 'f64', got '" + t.text + "'");
    }
    if (peek().kind != Tok::lbracket) {
      return scalar_shape();
    }
    next();
    std::int64_t d0 = parse_int(expect(Tok::number, "a dimension"));
    if (peek().kind == Tok::comma) {
      next();
      std::int64_t d1 = parse_int(expect(Tok::number, "a dimension"));
      expect(Tok::rbracket, "']'");
      return mat_shape(d0, d1);
    }
    expect(Tok::rbracket, "']'");
    return vec_shape(d0);
  }

  std::int64_t parse_int(const Token& t) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size()) {
      throw ParseError(t.line, t.col, "expected an integer, got '" + t.text + "'");
    }
    return v;
  }

  double parse_double(const Token& t) {
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    double v = 0.0;
    bool neg = false;
    if (b != e && (*b == '+' || *b == '-')) {
      neg = *b == '-';
      ++b;
    }
    std::from_chars_result r{};
    if (e - b > 2 && b[0] == '0' && (b[1] == 'x' || b[1] == 'X')) {
      r = std::from_chars(b + 2, e, v, std::chars_format::hex);
    } else {
      r = std::from_chars(b, e, v); // handles inf/nan spellings too
    }
    if (r.ec != std::errc() || r.ptr != e) {
      throw ParseError(t.line, t.col, "malformed number '" + t.text + "'");
    }
    return neg ? -v : v;
  }

  Tensor parse_tensor_literal() {
    Token t = peek();
    if (t.kind == Tok::number) {
      return Tensor::scalar(parse_double(next()));
    }
    expect(Tok::lbracket, "a tensor literal");
    if (peek().kind == Tok::lbracket) {
      std::vector<std::vector<double>> rows;
      rows.push_back(parse_row());
      while (peek().kind == Tok::comma) {
        next();
        rows.push_back(parse_row());
        if (rows.back().size() != rows[0].size()) {
          throw ParseError(t.line, t.col, "matrix rows differ in length");
        }
      }
      expect(Tok::rbracket, "']'");
      std::vector<double> data;
      for (auto& r : rows) {
        data.insert(data.end(), r.begin(), r.end());
      }
      return Tensor::mat(
          static_cast<std::int64_t>(rows.size()), static_cast<std::int64_t>(rows[0].size()),
          std::move(data));
    }
    std::vector<double> data;
    data.push_back(parse_double(expect(Tok::number, "a number")));
    while (peek().kind == Tok::comma) {
      next();
      data.push_back(parse_double(expect(Tok::number, "a number")));
    }
    expect(Tok::rbracket, "']'");
    return Tensor::vec(std::move(data));
  }

  std::vector<double> parse_row() {
    expect(Tok::lbracket, "'['");
    std::vector<double> row;
    row.push_back(parse_double(expect(Tok::number, "a number")));
    while (peek().kind == Tok::comma) {
      next();
      row.push_back(parse_double(expect(Tok::number, "a number")));
    }
    expect(Tok::rbracket, "']'");
    return row;
  }

  Atom parse_atom() {
    Token t = peek();
    if (t.kind == Tok::ident) {
      next();
      auto it = vars_.find(t.text);
      if (it == vars_.end()) {
        throw ParseError(t.line, t.col, "undefined variable " + t.text);
      }
      return Atom(it->second);
    }
    return Atom(parse_tensor_literal());
  }

  void parse_eqn_tail(Program& prog, const Token& out_name) {
    expect(Tok::equals, "'='");
    Token prim_tok = expect(Tok::ident, "a primitive name");
    auto prim = prim_from_name(prim_tok.text);
    if (!prim) {
      throw ParseError(prim_tok.line, prim_tok.col, "unknown primitive '" + prim_tok.text + "'");
    }
    std::vector<Atom> atoms;
    atoms.push_back(parse_atom());
    while (peek().kind == Tok::comma) {
      next();
      atoms.push_back(parse_atom());
    }
    Params params;
    if (peek().kind == Tok::lbrace) {
      next();
      while (true) {
        Token key = expect(Tok::ident, "a parameter name");
        expect(Tok::equals, "'='");
        params.emplace_back(key.text, parse_int(expect(Tok::number, "an integer")));
        if (peek().kind != Tok::comma) {
          break;
        }
        next();
      }
      expect(Tok::rbrace, "'}'");
    }
    if (peek().kind == Tok::end) {
      Token t = peek();
      throw ParseError(t.line, t.col, "missing 'return'");
    }
    expect(Tok::newline, "end of line after the equation");

    std::vector<Shape> shapes;
    for (auto& a : atoms) {
      shapes.push_back(a.shape());
    }
    Shape out_shape;
    try {
      out_shape = infer_shape(*prim, shapes, params);
    } catch (const std::invalid_argument& e) {
      throw ParseError(out_name.line, out_name.col, e.what());
    }
    Var out{out_name.text, out_shape};
    define(out_name, out);
    prog.eqns.push_back(Equation{out, *prim, std::move(atoms), std::move(params)});
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::unordered_map<std::string, Var> vars_;
};

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

void print_tensor_to(std::string& out, const Tensor& t) {
  if (t.shape.rank() == 0) {
    out += num(t.data[0]);
    return;
  }
  if (t.shape.count() == 0) {
    throw std::invalid_argument(
        "[print] tensor literal of shape " + t.shape.str() + " has no text form");
  }
  if (t.shape.rank() == 1) {
    out += '[';
    for (size_t i = 0; i < t.data.size(); ++i) {
      if (i) {
        out += ", ";
      }
      out += num(t.data[i]);
    }
    out += ']';
    return;
  }
  auto cols = static_cast<size_t>(t.shape.dims[1]);
  out += '[';
  for (size_t i = 0; i < static_cast<size_t>(t.shape.dims[0]); ++i) {
    if (i) {
      out += ", ";
    }
    out += '[';
    for (size_t j = 0; j < cols; ++j) {
      if (j) {
        out += ", ";
      }
      out += num(t.data[i * cols + j]);
    }
    out += ']';
  }
  out += ']';
}

void print_atom_to(std::string& out, const Atom& a) {
  if (a.is_var()) {
    out += a.var().name;
  } else {
    print_tensor_to(out, a.lit());
  }
}

} // namespace

Program parse_program(const std::string& text) {
  return Parser(Lexer(text).run()).parse();
}

std::string print_program(const Program& prog) {
  std::string out = "fn " + prog.name + "(";
  for (size_t i = 0; i < prog.inputs.size(); ++i) {
    if (i) {
      out += ", ";
    }
    out += prog.inputs[i].name + ": " + prog.inputs[i].shape.str();
  }
  out += ") -> ";
  for (size_t i = 0; i < prog.outputs.size(); ++i) {
    if (i) {
      out += ", ";
    }
    out += prog.outputs[i].shape().str();
  }
  out += '\n';
  for (auto& eqn : prog.eqns) {
    out += "  " + eqn.out.name + " = ";
    out += prim_name(eqn.prim);
    out += ' ';
    for (size_t i = 0; i < eqn.inputs.size(); ++i) {
      if (i) {
        out += ", ";
      }
      print_atom_to(out, eqn.inputs[i]);
    }
    if (!eqn.params.empty()) {
      out += " {";
      for (size_t i = 0; i < eqn.params.size(); ++i) {
        if (i) {
          out += ", ";
        }
        out += eqn.params[i].first + "=" + std::to_string(eqn.params[i].second);
      }
      out += '}';
    }
    out += '\n';
  }
  out += "  return ";
  for (size_t i = 0; i < prog.outputs.size(); ++i) {
    if (i) {
      out += ", ";
    }
    print_atom_to(out, prog.outputs[i]);
  }
  out += '\n';
  return out;
}

Tensor parse_tensor(const std::string& text) {
  return Parser(Lexer(text).run()).parse_single_tensor();
}

std::vector<Tensor> parse_tensor_list(const std::string& text) {
  return Parser(Lexer(text).run()).parse_tensor_sequence();
}

std::string print_tensor(const Tensor& t) {
  std::string out;
  print_tensor_to(out, t);
  return out;
}

} // namespace linad
