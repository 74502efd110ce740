#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "mrwave/circuit.hpp"
#include "mrwave/errors.hpp"

namespace mrwave {

namespace {

struct Token {
  std::string text;
  int column = 0;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto sep = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ',';
  };
  while (i < line.size()) {
    if (sep(line[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && !sep(line[i])) ++i;
    out.push_back({std::string(line.substr(start, i - start)), static_cast<int>(start) + 1});
  }
  return out;
}

double parse_number(const Token& tok, int line) {
  const std::string& s = tok.text;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr == first) {
    throw ParseError("bad number literal '" + s + "'", line, tok.column);
  }
  const std::string suffix = lower(std::string_view(res.ptr, static_cast<std::size_t>(last - res.ptr)));
  double scale = 1.0;
  if (suffix.empty()) {
    scale = 1.0;
  } else if (suffix == "meg") {
    scale = 1e6;
  } else if (suffix.size() == 1) {
    switch (suffix[0]) {
      case 'f': scale = 1e-15; break;
      case 'p': scale = 1e-12; break;
      case 'n': scale = 1e-9; break;
      case 'u': scale = 1e-6; break;
      case 'm': scale = 1e-3; break;
      case 'k': scale = 1e3; break;
      case 'g': scale = 1e9; break;
      default: throw ParseError("bad number literal '" + s + "'", line, tok.column);
    }
  } else {
    throw ParseError("bad number literal '" + s + "'", line, tok.column);
  }
  v *= scale;
  if (!std::isfinite(v)) throw ParseError("bad number literal '" + s + "'", line, tok.column);
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Parser {
 public:
  Circuit parse(std::string_view text) {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      pos = end + 1;
      if (!parse_line(line, line_no)) break;
    }
    if (c_.devices.empty()) throw ParseError("empty circuit", 1, 1);
    c_.node_count = static_cast<int>(c_.node_names.size());
    int branch = c_.node_count;
    for (Device& d : c_.devices) {
      if (d.type == DeviceType::inductor || d.type == DeviceType::vsource) d.branch = branch++;
    }
    c_.n = branch;
    c_.split = c_.default_split();
    return std::move(c_);
  }

 private:
  // Returns false on ".end".
  bool parse_line(std::string_view line, int ln) {
    std::vector<Token> toks = tokenize(line);
    if (toks.empty() || toks[0].text[0] == '*') return true;
    const Token& head = toks[0];
    if (head.text[0] == '.') {
      if (lower(head.text) == ".end") return false;
      throw ParseError("unknown directive '" + head.text + "'", ln, head.column);
    }
    if (!names_.insert(lower(head.text)).second) {
      throw ParseError("duplicate device name '" + head.text + "'", ln, head.column);
    }
    Device d;
    d.name = head.text;
    const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(head.text[0])));
    switch (letter) {
      case 'R':
      case 'C':
      case 'L': {
        expect_count(toks, 4, 4, ln);
        d.type = letter == 'R' ? DeviceType::resistor
                 : letter == 'C' ? DeviceType::capacitor
                                 : DeviceType::inductor;
        d.nodes = {node(toks[1]), node(toks[2])};
        d.value = parse_number(toks[3], ln);
        if (!(d.value > 0.0)) throw ParseError("element value must be positive", ln, toks[3].column);
        break;
      }
      case 'D': {
        expect_count(toks, 3, 5, ln);
        d.type = DeviceType::diode;
        d.nodes = {node(toks[1]), node(toks[2])};
        for (std::size_t i = 3; i < toks.size(); ++i) {
          const auto [key, val] = key_value(toks[i], ln);
          if (key == "is") {
            d.is = val;
          } else if (key == "vt") {
            d.vt = val;
          } else {
            throw ParseError("unknown diode parameter '" + key + "'", ln, toks[i].column);
          }
        }
        if (!(d.is > 0.0) || !(d.vt > 0.0)) throw ParseError("diode IS and VT must be positive", ln, head.column);
        break;
      }
      case 'M': {
        expect_count(toks, 4, 7, ln);
        d.type = DeviceType::mosfet;
        d.nodes = {node(toks[1]), node(toks[2]), node(toks[3])};
        for (std::size_t i = 4; i < toks.size(); ++i) {
          const auto [key, val] = key_value(toks[i], ln);
          if (key == "k") {
            d.k = val;
          } else if (key == "vt0") {
            d.vt0 = val;
          } else if (key == "lambda") {
            d.lambda = val;
          } else {
            throw ParseError("unknown MOSFET parameter '" + key + "'", ln, toks[i].column);
          }
        }
        break;
      }
      case 'V':
      case 'I': {
        if (toks.size() < 4) arity(toks, "at least 4", ln);
        d.type = letter == 'V' ? DeviceType::vsource : DeviceType::isource;
        d.nodes = {node(toks[1]), node(toks[2])};
        d.source = static_cast<int>(c_.sources.size());
        c_.sources.push_back(source(toks, ln));
        break;
      }
      default:
        throw ParseError("unknown device card '" + head.text + "'", ln, head.column);
    }
    c_.devices.push_back(std::move(d));
    return true;
  }

  SourceSpec source(const std::vector<Token>& toks, int ln) {
    SourceSpec s;
    const std::string kind = lower(toks[3].text);
    std::vector<double> a;
    auto numbers = [&](std::size_t from, std::size_t min, std::size_t max) {
      const std::size_t have = toks.size() - from;
      if (have < min || have > max) {
        throw ParseError("arity mismatch for " + toks[3].text + ": expected " + std::to_string(min) +
                             (max > min ? "-" + std::to_string(max) : "") + " arguments, got " +
                             std::to_string(have),
                         ln, toks[3].column);
      }
      for (std::size_t i = from; i < toks.size(); ++i) a.push_back(parse_number(toks[i], ln));
    };
    if (kind == "dc") {
      numbers(4, 1, 1);
      s.kind = SourceKind::dc;
      s.offset = a[0];
    } else if (kind == "sin") {
      s.kind = SourceKind::sine;
      s.role = SourceRole::fast;
      std::size_t end = toks.size();
      if (end > 4) {
        const std::string role = lower(toks.back().text);
        if (role == "fast" || role == "slow") {
          s.role = role == "fast" ? SourceRole::fast : SourceRole::slow;
          --end;
        }
      }
      const std::size_t have = end - 4;
      if (have != 3) {
        throw ParseError("arity mismatch for SIN: expected 3 arguments, got " + std::to_string(have),
                         ln, toks[3].column);
      }
      for (std::size_t i = 4; i < end; ++i) a.push_back(parse_number(toks[i], ln));
      s.offset = a[0];
      s.amplitude = a[1];
      s.frequency = a[2];
    } else if (kind == "fmsin") {
      numbers(4, 5, 5);
      s.kind = SourceKind::fm_sine;
      s.role = SourceRole::fast;
      s.offset = a[0];
      s.amplitude = a[1];
      s.frequency = a[2];
      s.deviation = a[3];
      s.mod_frequency = a[4];
    } else if (kind == "pulse") {
      numbers(4, 3, 4);
      s.kind = SourceKind::pulse_train;
      s.role = SourceRole::fast;
      s.offset = a[0];
      s.amplitude = a[1];
      s.frequency = a[2];
      if (a.size() > 3) s.rise = a[3];
      if (!(s.rise > 0.0 && s.rise < 0.5)) {
        throw ParseError("PULSE rise fraction must lie in (0, 0.5)", ln, toks.back().column);
      }
    } else if (kind == "am") {
      numbers(4, 5, 5);
      s.kind = SourceKind::am_product;
      s.role = SourceRole::fast;
      s.offset = a[0];
      s.amplitude = a[1];
      s.frequency = a[2];
      s.mod_frequency = a[3];
      s.depth = a[4];
    } else {
      numbers(3, 1, 1);
      s.kind = SourceKind::dc;
      s.offset = a[0];
    }
    if (s.kind != SourceKind::dc && s.kind != SourceKind::sine && !(s.frequency > 0.0)) {
      throw ParseError("source frequency must be positive", ln, toks[3].column);
    }
    if (s.kind == SourceKind::sine && s.frequency < 0.0) {
      throw ParseError("source frequency must be non-negative", ln, toks[3].column);
    }
    return s;
  }

  std::pair<std::string, double> key_value(const Token& t, int ln) {
    const std::size_t eq = t.text.find('=');
    if (eq == std::string::npos) throw ParseError("undefined model '" + t.text + "'", ln, t.column);
    Token v{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
    return {lower(t.text.substr(0, eq)), parse_number(v, ln)};
  }

  [[noreturn]] void arity(const std::vector<Token>& toks, const std::string& expected, int ln) {
    throw ParseError("arity mismatch for '" + toks[0].text + "': expected " + expected +
                         " fields, got " + std::to_string(toks.size()),
                     ln, toks[0].column);
  }

  void expect_count(const std::vector<Token>& toks, std::size_t lo, std::size_t hi, int ln) {
    if (toks.size() < lo || toks.size() > hi) {
      arity(toks, lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi), ln);
    }
  }

  int node(const Token& t) {
    if (t.text == "0") return -1;
    auto [it, inserted] = c_.node_index.emplace(t.text, static_cast<int>(c_.node_names.size()));
    if (inserted) c_.node_names.push_back(t.text);
    return it->second;
  }

  Circuit c_;
  std::set<std::string> names_;
};

}  // namespace

Circuit parse_netlist(std::string_view text) { return Parser().parse(text); }

std::string unparse(const Circuit& c) {
  std::ostringstream os;
  auto nd = [&](int i) { return i < 0 ? std::string("0") : c.node_names[static_cast<std::size_t>(i)]; };
  for (const Device& d : c.devices) {
    os << d.name;
    for (int i : d.nodes) os << ' ' << nd(i);
    switch (d.type) {
      case DeviceType::resistor:
      case DeviceType::capacitor:
      case DeviceType::inductor:
        os << ' ' << fmt(d.value);
        break;
      case DeviceType::diode:
        os << " IS=" << fmt(d.is) << " VT=" << fmt(d.vt);
        break;
      case DeviceType::mosfet:
        os << " K=" << fmt(d.k) << " VT0=" << fmt(d.vt0) << " LAMBDA=" << fmt(d.lambda);
        break;
      case DeviceType::vsource:
      case DeviceType::isource: {
        const SourceSpec& s = c.sources[static_cast<std::size_t>(d.source)];
        switch (s.kind) {
          case SourceKind::dc:
            os << " DC " << fmt(s.offset);
            break;
          case SourceKind::sine:
            os << " SIN(" << fmt(s.offset) << ' ' << fmt(s.amplitude) << ' ' << fmt(s.frequency)
               << (s.role == SourceRole::fast ? " fast)" : " slow)");
            break;
          case SourceKind::fm_sine:
            os << " FMSIN(" << fmt(s.offset) << ' ' << fmt(s.amplitude) << ' ' << fmt(s.frequency)
               << ' ' << fmt(s.deviation) << ' ' << fmt(s.mod_frequency) << ')';
            break;
          case SourceKind::pulse_train:
            os << " PULSE(" << fmt(s.offset) << ' ' << fmt(s.amplitude) << ' ' << fmt(s.frequency)
               << ' ' << fmt(s.rise) << ')';
            break;
          case SourceKind::am_product:
            os << " AM(" << fmt(s.offset) << ' ' << fmt(s.amplitude) << ' ' << fmt(s.frequency)
               << ' ' << fmt(s.mod_frequency) << ' ' << fmt(s.depth) << ')';
            break;
        }
        break;
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace mrwave
