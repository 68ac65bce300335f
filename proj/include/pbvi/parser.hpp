#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace pbvi {

namespace detail {

struct Token {
  std::string text;
  int line = 0;
};

// Whitespace-separated tokens with '#' comments stripped; ':' always becomes
// its own token so "T:0:1" and "T: 0 : 1" read the same.
inline std::vector<Token> tokenize_pomdp(std::istream& in) {
  std::vector<Token> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) {
        out.push_back({cur, lineno});
        cur.clear();
      }
    };
    for (char c : line) {
      if (c == '#') break;
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        flush();
      } else if (c == ':') {
        flush();
        out.push_back({":", lineno});
      } else {
        cur.push_back(c);
      }
    }
    flush();
  }
  return out;
}

inline std::optional<double> token_as_number(const std::string& t) {
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

inline std::optional<long> token_as_int(const std::string& t) {
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

class PomdpParser {
 public:
  // Published benchmark files print six decimals, so rows can drift a few
  // 1e-6 from 1; accept that and renormalize, reject anything worse.
  static constexpr double kRowTol = 1e-5;

  explicit PomdpParser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  PomdpModel parse() {
    while (!at_end()) {
      const Token& t = next();
      if (t.text == "discount") {
        expect_colon();
        file_discount_ = need_number("discount value");
      } else if (t.text == "values") {
        expect_colon();
        const Token& v = need_token("'reward' or 'cost'");
        if (v.text == "cost") cost_values_ = true;
        else if (v.text != "reward") throw ParseError(v.line, "expected 'reward' or 'cost', got '" + v.text + "'");
      } else if (t.text == "states") {
        parse_name_list(states_, t.line);
      } else if (t.text == "actions") {
        parse_name_list(actions_, t.line);
      } else if (t.text == "observations") {
        parse_name_list(observations_, t.line);
      } else if (t.text == "start") {
        parse_start(t.line);
      } else if (t.text == "goals") {
        // Non-standard extension seen in some published files; skip the list.
        expect_colon();
        while (!at_end() && peek().line == t.line) next();
      } else if (t.text == "T") {
        parse_transition(t.line);
      } else if (t.text == "O") {
        parse_observation(t.line);
      } else if (t.text == "R") {
        parse_reward(t.line);
      } else {
        throw ParseError(t.line, "unexpected token '" + t.text + "'");
      }
    }
    return build();
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  std::vector<std::string> states_, actions_, observations_;
  std::unordered_map<std::string, Eigen::Index> state_ix_, action_ix_, obs_ix_;
  double file_discount_ = 1.0;
  bool cost_values_ = false;

  std::vector<Eigen::MatrixXd> T_, O_;
  std::vector<double> R4_;                    // ((a*S + s)*S + s')*O + o
  std::vector<int> t_row_line_, o_row_line_;  // last line touching each row, for diagnostics
  std::optional<Eigen::VectorXd> start_;

  bool at_end() const { return pos_ >= toks_.size(); }
  int last_line() const { return toks_.empty() ? 0 : toks_.back().line; }

  const Token& peek() const {
    if (at_end()) throw ParseError(last_line(), "unexpected end of file");
    return toks_[pos_];
  }
  const Token& next() { const Token& t = peek(); ++pos_; return t; }
  const Token& need_token(const char* what) {
    if (at_end()) throw ParseError(last_line(), std::string("expected ") + what + " before end of file");
    return toks_[pos_++];
  }
  void expect_colon() {
    const Token& t = need_token("':'");
    if (t.text != ":") throw ParseError(t.line, "expected ':', got '" + t.text + "'");
  }
  bool peek_colon() const { return !at_end() && toks_[pos_].text == ":"; }

  double need_number(const char* what) {
    const Token& t = need_token(what);
    auto v = token_as_number(t.text);
    if (!v) throw ParseError(t.line, std::string("expected ") + what + ", got '" + t.text + "'");
    return *v;
  }

  double need_probability(const char* what) {
    const Token& t = need_token(what);
    auto v = token_as_number(t.text);
    if (!v) throw ParseError(t.line, std::string("expected ") + what + ", got '" + t.text + "'");
    if (*v < 0.0 || *v > 1.0 + 1e-6) throw ParseError(t.line, "probability out of range: " + t.text);
    return *v;
  }

  Eigen::Index S() const { return static_cast<Eigen::Index>(states_.size()); }
  Eigen::Index A() const { return static_cast<Eigen::Index>(actions_.size()); }
  Eigen::Index O() const { return static_cast<Eigen::Index>(observations_.size()); }

  void require_declarations(int line) const {
    if (states_.empty() || actions_.empty() || observations_.empty())
      throw ParseError(line, "states, actions and observations must be declared first");
  }

  void parse_name_list(std::vector<std::string>& names, int line) {
    expect_colon();
    if (!names.empty()) throw ParseError(line, "duplicate declaration");
    const Token& first = need_token("a count or a list of names");
    auto count = token_as_int(first.text);
    if (count) {
      if (*count < 1) throw ParseError(first.line, "count must be positive");
      names.reserve(static_cast<std::size_t>(*count));
      for (long i = 0; i < *count; ++i) names.push_back(std::to_string(i));
    } else {
      names.push_back(first.text);
      while (!at_end() && peek().line == first.line && peek().text != ":") names.push_back(next().text);
    }
    auto& map = &names == &states_ ? state_ix_ : (&names == &actions_ ? action_ix_ : obs_ix_);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!map.emplace(names[i], static_cast<Eigen::Index>(i)).second)
        throw ParseError(line, "duplicate name '" + names[i] + "'");
    }
    if (!states_.empty() && !actions_.empty() && !observations_.empty() && T_.empty()) {
      T_.assign(static_cast<std::size_t>(A()), Eigen::MatrixXd::Zero(S(), S()));
      O_.assign(static_cast<std::size_t>(A()), Eigen::MatrixXd::Zero(S(), O()));
      R4_.assign(static_cast<std::size_t>(A() * S() * S() * O()), 0.0);
      t_row_line_.assign(static_cast<std::size_t>(A() * S()), 0);
      o_row_line_.assign(static_cast<std::size_t>(A() * S()), 0);
    }
  }

  // Resolves a state/action/observation token; '*' gives -1 (wildcard).
  Eigen::Index id_index(const Token& t, const std::vector<std::string>& names,
                        const std::unordered_map<std::string, Eigen::Index>& map, const char* kind) {
    if (t.text == "*") return -1;
    auto it = map.find(t.text);
    if (it != map.end()) return it->second;
    auto ix = token_as_int(t.text);
    if (ix && *ix >= 0 && *ix < static_cast<long>(names.size())) return static_cast<Eigen::Index>(*ix);
    throw ParseError(t.line, std::string("unknown ") + kind + " identifier '" + t.text + "'");
  }

  Eigen::Index state_id() { return id_index(need_token("a state"), states_, state_ix_, "state"); }
  Eigen::Index action_id() { return id_index(need_token("an action"), actions_, action_ix_, "action"); }
  Eigen::Index obs_id() { return id_index(need_token("an observation"), observations_, obs_ix_, "observation"); }

  template <class F>
  static void for_wildcard(Eigen::Index ix, Eigen::Index n, F&& f) {
    if (ix >= 0) f(ix);
    else for (Eigen::Index i = 0; i < n; ++i) f(i);
  }

  Eigen::VectorXd read_prob_row(Eigen::Index len) {
    if (peek().text == "uniform") {
      next();
      return Eigen::VectorXd::Constant(len, 1.0 / static_cast<double>(len));
    }
    Eigen::VectorXd row(len);
    for (Eigen::Index i = 0; i < len; ++i) row[i] = need_probability("a probability");
    return row;
  }

  void parse_start(int line) {
    require_declarations(line);
    if (peek_colon()) {
      next();
      const Token& t = peek();
      if (t.text == "uniform") {
        next();
        start_ = Eigen::VectorXd::Constant(S(), 1.0 / static_cast<double>(S()));
      } else if (token_as_number(t.text)) {
        Eigen::VectorXd row(S());
        for (Eigen::Index i = 0; i < S(); ++i) row[i] = need_probability("a probability");
        start_ = row;
      } else {
        start_ = Eigen::VectorXd::Unit(S(), state_id());
      }
      return;
    }
    const Token& mode = need_token("'include' or 'exclude'");
    if (mode.text != "include" && mode.text != "exclude")
      throw ParseError(mode.line, "expected 'include' or 'exclude' after 'start'");
    expect_colon();
    std::vector<bool> in(static_cast<std::size_t>(S()), mode.text == "exclude");
    bool saw_any = false;
    while (!at_end() && peek().line == mode.line && peek().text != ":") {
      in[static_cast<std::size_t>(state_id())] = (mode.text == "include");
      saw_any = true;
    }
    if (!saw_any) throw ParseError(mode.line, "empty state list");
    Eigen::VectorXd row = Eigen::VectorXd::Zero(S());
    for (Eigen::Index s = 0; s < S(); ++s) row[s] = in[static_cast<std::size_t>(s)] ? 1.0 : 0.0;
    double total = row.sum();
    if (total == 0.0) throw ParseError(mode.line, "start set excludes every state");
    start_ = row / total;
  }

  void set_t_row(Eigen::Index a, Eigen::Index s, const Eigen::VectorXd& row, int line) {
    T_[static_cast<std::size_t>(a)].row(s) = row.transpose();
    t_row_line_[static_cast<std::size_t>(a * S() + s)] = line;
  }
  void set_o_row(Eigen::Index a, Eigen::Index s, const Eigen::VectorXd& row, int line) {
    O_[static_cast<std::size_t>(a)].row(s) = row.transpose();
    o_row_line_[static_cast<std::size_t>(a * S() + s)] = line;
  }

  void parse_transition(int line) {
    require_declarations(line);
    expect_colon();
    Eigen::Index a = action_id();
    if (!peek_colon()) {
      // T: a  followed by a |S| x |S| matrix, 'uniform' or 'identity'.
      const Token& t = peek();
      if (t.text == "uniform") {
        next();
        Eigen::VectorXd row = Eigen::VectorXd::Constant(S(), 1.0 / static_cast<double>(S()));
        for_wildcard(a, A(), [&](Eigen::Index ai) {
          for (Eigen::Index s = 0; s < S(); ++s) set_t_row(ai, s, row, t.line);
        });
      } else if (t.text == "identity") {
        next();
        for_wildcard(a, A(), [&](Eigen::Index ai) {
          for (Eigen::Index s = 0; s < S(); ++s) set_t_row(ai, s, Eigen::VectorXd::Unit(S(), s), t.line);
        });
      } else {
        for (Eigen::Index s = 0; s < S(); ++s) {
          int row_line = peek().line;
          Eigen::VectorXd row(S());
          for (Eigen::Index sp = 0; sp < S(); ++sp) row[sp] = need_probability("a probability");
          for_wildcard(a, A(), [&](Eigen::Index ai) { set_t_row(ai, s, row, row_line); });
        }
      }
      return;
    }
    next();  // ':'
    Eigen::Index s = state_id();
    if (!peek_colon()) {
      // T: a : s  followed by a row (or 'uniform').
      int row_line = peek().line;
      Eigen::VectorXd row = read_prob_row(S());
      for_wildcard(a, A(), [&](Eigen::Index ai) {
        for_wildcard(s, S(), [&](Eigen::Index si) { set_t_row(ai, si, row, row_line); });
      });
      return;
    }
    next();  // ':'
    if (peek().text == "uniform") {
      const Token& t = next();
      Eigen::VectorXd row = Eigen::VectorXd::Constant(S(), 1.0 / static_cast<double>(S()));
      for_wildcard(a, A(), [&](Eigen::Index ai) {
        for_wildcard(s, S(), [&](Eigen::Index si) { set_t_row(ai, si, row, t.line); });
      });
      return;
    }
    Eigen::Index sp = state_id();
    int vline = at_end() ? last_line() : peek().line;
    double v = need_probability("a probability");
    for_wildcard(a, A(), [&](Eigen::Index ai) {
      for_wildcard(s, S(), [&](Eigen::Index si) {
        for_wildcard(sp, S(), [&](Eigen::Index spi) {
          T_[static_cast<std::size_t>(ai)](si, spi) = v;
          t_row_line_[static_cast<std::size_t>(ai * S() + si)] = vline;
        });
      });
    });
  }

  void parse_observation(int line) {
    require_declarations(line);
    expect_colon();
    Eigen::Index a = action_id();
    if (!peek_colon()) {
      // O: a  followed by a |S| x |O| matrix or 'uniform'.
      const Token& t = peek();
      if (t.text == "uniform") {
        next();
        Eigen::VectorXd row = Eigen::VectorXd::Constant(O(), 1.0 / static_cast<double>(O()));
        for_wildcard(a, A(), [&](Eigen::Index ai) {
          for (Eigen::Index s = 0; s < S(); ++s) set_o_row(ai, s, row, t.line);
        });
      } else {
        for (Eigen::Index s = 0; s < S(); ++s) {
          int row_line = peek().line;
          Eigen::VectorXd row(O());
          for (Eigen::Index o = 0; o < O(); ++o) row[o] = need_probability("a probability");
          for_wildcard(a, A(), [&](Eigen::Index ai) { set_o_row(ai, s, row, row_line); });
        }
      }
      return;
    }
    next();  // ':'
    Eigen::Index sp = state_id();
    if (!peek_colon()) {
      int row_line = peek().line;
      Eigen::VectorXd row = read_prob_row(O());
      for_wildcard(a, A(), [&](Eigen::Index ai) {
        for_wildcard(sp, S(), [&](Eigen::Index si) { set_o_row(ai, si, row, row_line); });
      });
      return;
    }
    next();  // ':'
    if (peek().text == "uniform") {
      const Token& t = next();
      Eigen::VectorXd row = Eigen::VectorXd::Constant(O(), 1.0 / static_cast<double>(O()));
      for_wildcard(a, A(), [&](Eigen::Index ai) {
        for_wildcard(sp, S(), [&](Eigen::Index si) { set_o_row(ai, si, row, t.line); });
      });
      return;
    }
    Eigen::Index o = obs_id();
    int vline = at_end() ? last_line() : peek().line;
    double v = need_probability("a probability");
    for_wildcard(a, A(), [&](Eigen::Index ai) {
      for_wildcard(sp, S(), [&](Eigen::Index si) {
        for_wildcard(o, O(), [&](Eigen::Index oi) {
          O_[static_cast<std::size_t>(ai)](si, oi) = v;
          o_row_line_[static_cast<std::size_t>(ai * S() + si)] = vline;
        });
      });
    });
  }

  void parse_reward(int line) {
    require_declarations(line);
    expect_colon();
    Eigen::Index a = action_id();
    expect_colon();
    Eigen::Index s = state_id();
    auto set = [&](Eigen::Index sp, Eigen::Index o, double v) {
      for_wildcard(a, A(), [&](Eigen::Index ai) {
        for_wildcard(s, S(), [&](Eigen::Index si) {
          for_wildcard(sp, S(), [&](Eigen::Index spi) {
            for_wildcard(o, O(), [&](Eigen::Index oi) {
              R4_[static_cast<std::size_t>(((ai * S() + si) * S() + spi) * O() + oi)] = v;
            });
          });
        });
      });
    };
    if (!peek_colon()) {
      // R: a : s  followed by a |S| x |O| matrix.
      for (Eigen::Index sp = 0; sp < S(); ++sp)
        for (Eigen::Index o = 0; o < O(); ++o) set(sp, o, need_number("a reward value"));
      return;
    }
    next();  // ':'
    Eigen::Index sp = state_id();
    if (!peek_colon()) {
      // R: a : s : s'  followed by a row over observations.
      for (Eigen::Index o = 0; o < O(); ++o) set(sp, o, need_number("a reward value"));
      return;
    }
    next();  // ':'
    Eigen::Index o = obs_id();
    set(sp, o, need_number("a reward value"));
  }

  PomdpModel build() {
    if (states_.empty() || actions_.empty() || observations_.empty())
      throw ParseError(last_line(), "file declares no states, actions or observations");

    PomdpModel m;
    m.states = states_;
    m.actions = actions_;
    m.observations = observations_;
    m.file_discount = file_discount_;
    m.discount = 1.0;

    for (Eigen::Index a = 0; a < A(); ++a) {
      for (Eigen::Index s = 0; s < S(); ++s) {
        double tsum = T_[static_cast<std::size_t>(a)].row(s).sum();
        if (std::abs(tsum - 1.0) > kRowTol)
          throw ParseError(t_row_line_[static_cast<std::size_t>(a * S() + s)],
                           "transition row T(" + actions_[static_cast<std::size_t>(a)] + ", " +
                               states_[static_cast<std::size_t>(s)] + ", .) sums to " + std::to_string(tsum));
        if (std::abs(tsum - 1.0) > 1e-12) T_[static_cast<std::size_t>(a)].row(s) /= tsum;
        double osum = O_[static_cast<std::size_t>(a)].row(s).sum();
        if (std::abs(osum - 1.0) > kRowTol)
          throw ParseError(o_row_line_[static_cast<std::size_t>(a * S() + s)],
                           "observation row O(" + actions_[static_cast<std::size_t>(a)] + ", " +
                               states_[static_cast<std::size_t>(s)] + ", .) sums to " + std::to_string(osum));
        if (std::abs(osum - 1.0) > 1e-12) O_[static_cast<std::size_t>(a)].row(s) /= osum;
      }
    }
    m.transition = T_;
    m.observation_fn = O_;

    // Marginalize R(a, s, s', o) to R(s, a) under the transition and
    // observation models. A slice that holds a single constant is passed
    // through untouched (the expectation of a constant is that constant).
    m.reward.resize(S(), A());
    for (Eigen::Index a = 0; a < A(); ++a) {
      for (Eigen::Index s = 0; s < S(); ++s) {
        const double* slice = &R4_[static_cast<std::size_t>(((a * S() + s) * S()) * O())];
        const std::size_t n = static_cast<std::size_t>(S() * O());
        bool constant = true;
        for (std::size_t i = 1; i < n && constant; ++i) constant = slice[i] == slice[0];
        if (constant) {
          m.reward(s, a) = slice[0];
        } else {
          double acc = 0.0;
          for (Eigen::Index sp = 0; sp < S(); ++sp) {
            double inner = 0.0;
            for (Eigen::Index o = 0; o < O(); ++o)
              inner += m.observation_fn[static_cast<std::size_t>(a)](sp, o) *
                       slice[static_cast<std::size_t>(sp * O() + o)];
            acc += m.transition[static_cast<std::size_t>(a)](s, sp) * inner;
          }
          m.reward(s, a) = acc;
        }
        if (cost_values_) m.reward(s, a) = -m.reward(s, a);
      }
    }

    if (start_) {
      Eigen::VectorXd row = *start_;
      double sum = row.sum();
      if (std::abs(sum - 1.0) > kRowTol)
        throw ParseError(0, "start belief sums to " + std::to_string(sum));
      if (std::abs(sum - 1.0) > 1e-12) row /= sum;
      m.initial_belief = Belief(row);
    } else {
      m.initial_belief = uniform_belief(S());
    }

    finalize_model(m);
    return m;
  }
};

}  // namespace detail

inline PomdpModel parse_pomdp(std::istream& in) {
  return detail::PomdpParser(detail::tokenize_pomdp(in)).parse();
}

inline PomdpModel parse_pomdp(const std::string& text) {
  std::istringstream in(text);
  return parse_pomdp(in);
}

inline PomdpModel parse_pomdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_pomdp(in);
}

// Canonical text form: full-precision matrix blocks in declaration order.
// parse(serialize(m)) reproduces every tensor of m bit for bit.
inline std::string serialize_pomdp(const PomdpModel& m) {
  std::string out;
  char buf[40];
  auto g17 = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto names = [](const std::vector<std::string>& ns) {
    // Count-declared sets have names "0".."n-1"; emit them back as a count so
    // the list is not mistaken for a count on reparse.
    bool counted = true;
    for (std::size_t i = 0; i < ns.size() && counted; ++i) counted = ns[i] == std::to_string(i);
    if (counted) return " " + std::to_string(ns.size());
    std::string s;
    for (const auto& n : ns) {
      s += ' ';
      s += n;
    }
    return s;
  };

  out += "discount: " + g17(m.discount) + "\n";
  out += "values: reward\n";
  out += "states:" + names(m.states) + "\n";
  out += "actions:" + names(m.actions) + "\n";
  out += "observations:" + names(m.observations) + "\n";
  out += "start:";
  for (Eigen::Index s = 0; s < m.num_states(); ++s) out += " " + g17(m.initial_belief[s]);
  out += "\n";

  for (Eigen::Index a = 0; a < m.num_actions(); ++a) {
    out += "\nT: " + m.actions[static_cast<std::size_t>(a)] + "\n";
    for (Eigen::Index s = 0; s < m.num_states(); ++s) {
      for (Eigen::Index sp = 0; sp < m.num_states(); ++sp)
        out += (sp ? " " : "") + g17(m.transition[static_cast<std::size_t>(a)](s, sp));
      out += "\n";
    }
  }
  for (Eigen::Index a = 0; a < m.num_actions(); ++a) {
    out += "\nO: " + m.actions[static_cast<std::size_t>(a)] + "\n";
    for (Eigen::Index s = 0; s < m.num_states(); ++s) {
      for (Eigen::Index o = 0; o < m.num_observations(); ++o)
        out += (o ? " " : "") + g17(m.observation_fn[static_cast<std::size_t>(a)](s, o));
      out += "\n";
    }
  }
  out += "\n";
  for (Eigen::Index a = 0; a < m.num_actions(); ++a)
    for (Eigen::Index s = 0; s < m.num_states(); ++s)
      out += "R: " + m.actions[static_cast<std::size_t>(a)] + " : " + m.states[static_cast<std::size_t>(s)] +
             " : * : * " + g17(m.reward(s, a)) + "\n";
  return out;
}

}  // namespace pbvi
