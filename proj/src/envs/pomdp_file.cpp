#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "asymac/envs.hpp"

namespace asymac::envs {

PomdpSyntaxError::PomdpSyntaxError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

PomdpSemanticError::PomdpSemanticError(std::string where, const std::string& message)
    : std::runtime_error(where + ": " + message), where_(std::move(where)) {}

namespace {

struct Token {
  std::string text;
  int line;
  int column;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      column = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++column;
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == ':') {
      tokens.push_back({":", line, column});
      ++column;
      ++i;
      continue;
    }
    const int start_col = column;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ':' && text[j] != '#') ++j;
    tokens.push_back({std::string(text.substr(i, j - i)), line, start_col});
    column += static_cast<int>(j - i);
    i = j;
  }
  return tokens;
}

bool parse_int(const std::string& s, int& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool is_keyword(const std::string& s) {
  return s == "discount" || s == "values" || s == "states" || s == "actions" || s == "observations" ||
         s == "start" || s == "T" || s == "O" || s == "O0" || s == "R";
}

// Declared symbol set: either a count or a list of names.
struct Symbols {
  int count = -1;
  std::vector<std::string> names;

  // Resolves a symbol reference; -1 stands for the wildcard.
  std::optional<int> resolve(const std::string& ref) const {
    if (ref == "*") return -1;
    int idx = 0;
    if (parse_int(ref, idx) && idx >= 0 && idx < count) return idx;
    auto it = std::find(names.begin(), names.end(), ref);
    if (it != names.end()) return static_cast<int>(it - names.begin());
    return std::nullopt;
  }
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Environment parse(std::string name) {
    while (pos_ < tokens_.size()) statement();
    return build(std::move(name));
  }

 private:
  const Token& peek() const {
    if (pos_ >= tokens_.size()) {
      static const Token eof{"<end of file>", 0, 0};
      if (!tokens_.empty()) {
        eof_ = {"<end of file>", tokens_.back().line, tokens_.back().column + 1};
        return eof_;
      }
      return eof;
    }
    return tokens_[pos_];
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < tokens_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw PomdpSyntaxError(t.line, t.column, msg);
  }
  void expect_colon() {
    const Token& t = next();
    if (t.text != ":") fail(t, "expected ':' but found '" + t.text + "'");
  }
  double real() {
    const Token& t = next();
    double v = 0.0;
    if (!parse_real(t.text, v)) fail(t, "expected a number but found '" + t.text + "'");
    return v;
  }
  int symbol(const Symbols& set, const char* what) {
    const Token& t = next();
    if (set.count < 0) fail(t, std::string(what) + " referenced before being declared");
    auto idx = set.resolve(t.text);
    if (!idx) fail(t, std::string("unknown ") + what + " '" + t.text + "'");
    return *idx;
  }
  void declare(Symbols& set, const char* what) {
    expect_colon();
    const Token& first = next();
    int count = 0;
    if (parse_int(first.text, count)) {
      if (count <= 0) fail(first, std::string(what) + " count must be positive");
      set.count = count;
      return;
    }
    if (is_keyword(first.text) || first.text == ":") fail(first, std::string("expected ") + what + " count or names");
    set.names.push_back(first.text);
    while (pos_ < tokens_.size() && !is_keyword(peek().text) && peek().text != ":") set.names.push_back(next().text);
    // A keyword immediately followed by ':' starts the next statement; a name
    // that happens to be a keyword is not supported.
    set.count = static_cast<int>(set.names.size());
  }

  void require_dims(const Token& at) const {
    if (states_.count < 0 || actions_.count < 0 || obs_.count < 0)
      fail(at, "states, actions and observations must be declared before tables");
  }
  void ensure_tables() {
    if (!t_rows_.empty()) return;
    t_rows_.resize(static_cast<std::size_t>(actions_.count) * states_.count);
    o_rows_.resize(static_cast<std::size_t>(actions_.count) * states_.count);
    reward_.assign(static_cast<std::size_t>(states_.count) * actions_.count, 0.0);
  }

  template <typename F>
  static void expand(int idx, int n, F&& f) {
    if (idx >= 0) {
      f(idx);
      return;
    }
    for (int i = 0; i < n; ++i) f(i);
  }

  static void assign(std::map<int, double>& row, int idx, double v) {
    if (v == 0.0)
      row.erase(idx);
    else
      row[idx] = v;
  }

  void statement() {
    const Token& kw = next();
    const std::string word = kw.text;
    if (word == "discount") {
      expect_colon();
      discount_ = real();
      have_discount_ = true;
    } else if (word == "values") {
      expect_colon();
      const Token& t = next();
      if (t.text != "reward") fail(t, "only 'values: reward' is supported");
    } else if (word == "states") {
      declare(states_, "states");
    } else if (word == "actions") {
      declare(actions_, "actions");
    } else if (word == "observations") {
      declare(obs_, "observations");
    } else if (word == "start") {
      if (states_.count < 0) fail(kw, "start given before states");
      expect_colon();
      if (peek().text == "uniform") {
        next();
        start_.assign(states_.count, 1.0 / states_.count);
      } else {
        start_.clear();
        for (int i = 0; i < states_.count; ++i) start_.push_back(real());
      }
    } else if (word == "T") {
      require_dims(kw);
      ensure_tables();
      expect_colon();
      const int a = symbol(actions_, "action");
      expect_colon();
      const int s = symbol(states_, "state");
      expect_colon();
      const int next_s = symbol(states_, "state");
      const double prob = real();
      expand(a, actions_.count, [&](int ai) {
        expand(s, states_.count, [&](int si) {
          expand(next_s, states_.count,
                 [&](int ni) { assign(t_rows_[static_cast<std::size_t>(ai) * states_.count + si], ni, prob); });
        });
      });
    } else if (word == "O") {
      require_dims(kw);
      ensure_tables();
      expect_colon();
      const int a = symbol(actions_, "action");
      expect_colon();
      const int next_s = symbol(states_, "state");
      expect_colon();
      const int o = symbol(obs_, "observation");
      const double prob = real();
      expand(a, actions_.count, [&](int ai) {
        expand(next_s, states_.count, [&](int ni) {
          expand(o, obs_.count,
                 [&](int oi) { assign(o_rows_[static_cast<std::size_t>(ai) * states_.count + ni], oi, prob); });
        });
      });
    } else if (word == "O0") {
      require_dims(kw);
      if (o0_rows_.empty()) o0_rows_.resize(states_.count);
      expect_colon();
      const int s = symbol(states_, "state");
      expect_colon();
      const int o = symbol(obs_, "observation");
      const double prob = real();
      expand(s, states_.count,
             [&](int si) { expand(o, obs_.count, [&](int oi) { assign(o0_rows_[si], oi, prob); }); });
    } else if (word == "R") {
      require_dims(kw);
      ensure_tables();
      expect_colon();
      const int a = symbol(actions_, "action");
      expect_colon();
      const int s = symbol(states_, "state");
      expect_colon();
      const Token& t1 = next();
      if (t1.text != "*") fail(t1, "rewards may not depend on the next state; expected '*'");
      expect_colon();
      const Token& t2 = next();
      if (t2.text != "*") fail(t2, "rewards may not depend on the observation; expected '*'");
      const double r = real();
      expand(a, actions_.count, [&](int ai) {
        expand(s, states_.count, [&](int si) { reward_[static_cast<std::size_t>(si) * actions_.count + ai] = r; });
      });
    } else {
      fail(kw, "unexpected token '" + word + "'");
    }
  }

  Environment build(std::string name) {
    if (!have_discount_) throw PomdpSemanticError("discount", "missing discount");
    if (!(discount_ >= 0.0 && discount_ < 1.0))
      throw PomdpSemanticError("discount", "gamma must lie in [0, 1), got " + std::to_string(discount_));
    if (states_.count < 0 || actions_.count < 0 || obs_.count < 0)
      throw PomdpSemanticError("header", "states, actions and observations must all be declared");
    if (start_.empty()) throw PomdpSemanticError("start", "missing start distribution");
    ensure_tables();

    Environment env;
    env.name = std::move(name);
    Pomdp& p = env.pomdp;
    p = Pomdp::with_dimensions(states_.count, actions_.count, obs_.count, discount_);
    p.initial = start_;
    p.reward = reward_;
    for (int s = 0; s < states_.count; ++s) {
      for (int a = 0; a < actions_.count; ++a) {
        auto& row = p.outcomes(s, a);
        for (auto [next_s, prob] : t_rows_[static_cast<std::size_t>(a) * states_.count + s]) {
          const auto& orow = o_rows_[static_cast<std::size_t>(a) * states_.count + next_s];
          row.push_back({next_s, prob, SparseRow(orow.begin(), orow.end())});
        }
      }
    }
    if (!o0_rows_.empty()) {
      p.initial_emission.resize(states_.count);
      for (int s = 0; s < states_.count; ++s) p.initial_emission[s] = SparseRow(o0_rows_[s].begin(), o0_rows_[s].end());
    }
    p.state_labels = states_.names;
    p.action_labels = actions_.names;
    p.obs_labels = obs_.names;

    const auto diags = validate(p, env.terminals);
    if (!diags.empty()) throw PomdpSemanticError(diags.front().where, diags.front().message);
    return env;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  mutable Token eof_;

  Symbols states_, actions_, obs_;
  double discount_ = 0.0;
  bool have_discount_ = false;
  std::vector<double> start_;
  std::vector<std::map<int, double>> t_rows_;  // [a * S + s] -> s'
  std::vector<std::map<int, double>> o_rows_;  // [a * S + s'] -> o
  std::vector<std::map<int, double>> o0_rows_;
  std::vector<double> reward_;
};

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Environment load_pomdp_text(std::string_view text, std::string name) {
  return Parser(tokenize(text)).parse(std::move(name));
}

Environment load_pomdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open POMDP file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_pomdp_text(buf.str(), path);
}

std::string export_pomdp_text(const Pomdp& p) {
  // O(. | a, s') must be the same for every source state that reaches s'.
  std::vector<const SparseRow*> o_rows(static_cast<std::size_t>(p.n_actions) * p.n_states, nullptr);
  for (int s = 0; s < p.n_states; ++s) {
    for (int a = 0; a < p.n_actions; ++a) {
      for (const auto& out : p.outcomes(s, a)) {
        auto& slot = o_rows[static_cast<std::size_t>(a) * p.n_states + out.next];
        if (slot == nullptr)
          slot = &out.observation;
        else if (*slot != out.observation)
          throw std::invalid_argument("observation function depends on the source state; cannot export");
      }
    }
  }

  std::ostringstream out;
  out << "# tabular POMDP\n";
  out << "discount: " << fmt_real(p.gamma) << "\n";
  out << "values: reward\n";
  auto symbols = [&out](const char* kw, int n, const std::vector<std::string>& labels) {
    out << kw << ":";
    if (static_cast<int>(labels.size()) == n) {
      for (const auto& l : labels) out << ' ' << l;
    } else {
      out << ' ' << n;
    }
    out << "\n";
  };
  symbols("states", p.n_states, p.state_labels);
  symbols("actions", p.n_actions, p.action_labels);
  symbols("observations", p.n_obs, p.obs_labels);
  out << "start:";
  for (double b : p.initial) out << ' ' << fmt_real(b);
  out << "\n\n";
  for (int s = 0; s < p.n_states; ++s)
    for (int a = 0; a < p.n_actions; ++a)
      for (const auto& o : p.outcomes(s, a))
        out << "T: " << a << " : " << s << " : " << o.next << ' ' << fmt_real(o.prob) << "\n";
  out << "\n";
  for (int a = 0; a < p.n_actions; ++a)
    for (int sn = 0; sn < p.n_states; ++sn)
      if (const SparseRow* row = o_rows[static_cast<std::size_t>(a) * p.n_states + sn])
        for (auto [o, prob] : *row) out << "O: " << a << " : " << sn << " : " << o << ' ' << fmt_real(prob) << "\n";
  if (p.has_initial_observation()) {
    out << "\n";
    for (int s = 0; s < p.n_states; ++s)
      for (auto [o, prob] : p.initial_emission[s]) out << "O0: " << s << " : " << o << ' ' << fmt_real(prob) << "\n";
  }
  out << "\n";
  for (int s = 0; s < p.n_states; ++s)
    for (int a = 0; a < p.n_actions; ++a)
      if (p.R(s, a) != 0.0) out << "R: " << a << " : " << s << " : * : * " << fmt_real(p.R(s, a)) << "\n";
  return out.str();
}

}  // namespace asymac::envs
