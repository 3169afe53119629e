#include "cfura/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace cfura {

double TomlValue::as_number() const {
  if (kind == Kind::integer) return static_cast<double>(integer);
  if (kind == Kind::floating) return floating;
  throw ConfigError("expected a number");
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int line) : text_(text), line_(line) {}

  TomlValue value() {
    skip_ws();
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return string_value();
    if (c == '[') return array_value();
    if (match("true")) return boolean(true);
    if (match("false")) return boolean(false);
    return number_value();
  }

  void expect_end() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] != '#') fail("trailing characters");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool match(std::string_view word) {
    if (text_.substr(pos_, word.size()) == word) {
      pos_ += word.size();
      return true;
    }
    return false;
  }

  static TomlValue boolean(bool b) {
    TomlValue v;
    v.kind = TomlValue::Kind::boolean;
    v.boolean = b;
    return v;
  }

  TomlValue string_value() {
    ++pos_;
    TomlValue v;
    v.kind = TomlValue::Kind::string;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      v.string.push_back(text_[pos_++]);
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return v;
  }

  TomlValue array_value() {
    ++pos_;
    TomlValue v;
    v.kind = TomlValue::Kind::array;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      v.array.push_back(value());
      skip_ws();
      if (pos_ >= text_.size()) fail("unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          return v;
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      fail("expected ',' or ']' in array");
    }
  }

  TomlValue number_value() {
    std::size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '+' ||
                                  text_[end] == '-' || text_[end] == '.' || text_[end] == '_')) {
      ++end;
    }
    std::string token;
    for (std::size_t i = pos_; i < end; ++i) {
      if (text_[i] != '_') token.push_back(text_[i]);
    }
    if (token.empty()) fail("malformed value");
    pos_ = end;
    TomlValue v;
    const bool is_float = token.find_first_of(".eE") != std::string::npos || token == "inf" || token == "nan";
    if (!is_float) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), i);
      if (ec == std::errc() && p == token.data() + token.size()) {
        v.kind = TomlValue::Kind::integer;
        v.integer = i;
        return v;
      }
      fail("malformed integer '" + token + "'");
    }
    std::size_t consumed = 0;
    try {
      v.floating = std::stod(token, &consumed);
    } catch (const std::exception&) {
      fail("malformed number '" + token + "'");
    }
    if (consumed != token.size()) fail("malformed number '" + token + "'");
    v.kind = TomlValue::Kind::floating;
    return v;
  }

  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

int as_int(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::integer) throw ConfigError(key + ": expected an integer");
  return static_cast<int>(v.integer);
}

double as_double(const TomlValue& v, const std::string& key) {
  try {
    return v.as_number();
  } catch (const ConfigError&) {
    throw ConfigError(key + ": expected a number");
  }
}

std::string as_string(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::string) throw ConfigError(key + ": expected a string");
  return v.string;
}

std::vector<double> as_doubles(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::array) throw ConfigError(key + ": expected an array");
  std::vector<double> out;
  for (const auto& e : v.array) out.push_back(as_double(e, key));
  return out;
}

template <class Enum>
Enum parse_enum(const std::string& s, const std::string& key, std::initializer_list<Enum> options) {
  for (Enum e : options) {
    if (to_string(e) == s) return e;
  }
  throw ConfigError(key + ": unknown value '" + s + "'");
}

}  // namespace

namespace {

// Text before an unquoted '#'.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

int bracket_depth(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '#') break;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

}  // namespace

TomlTable parse_toml(std::string_view text) {
  TomlTable table;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (line[0] == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": bad table header");
      section = trim(std::string_view(line).substr(1, close - 1));
      if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty table name");
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(std::string_view(line).substr(0, eq));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      std::string rhs = line.substr(eq + 1);
      const int first_line = line_no;
      // Arrays may continue over several lines until the brackets balance.
      for (int depth = bracket_depth(rhs); depth > 0 && start <= text.size();) {
        end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const std::string more = trim(text.substr(start, end - start));
        start = end + 1;
        rhs = strip_comment(rhs) + " " + more;
        depth = bracket_depth(rhs);
        if (end == text.size()) break;
      }
      Parser p(rhs, first_line);
      TomlValue v = p.value();
      p.expect_end();
      if (!section.empty()) key = section + "." + key;
      if (table.count(key)) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
      table.emplace(key, std::move(v));
    }
    if (end == text.size()) break;
  }
  return table;
}

void apply_config(ScenarioConfig& cfg, const TomlTable& table) {
  using Setter = std::function<void(const TomlValue&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"network.side_km", [&](auto& v, auto& k) { cfg.network.side_km = as_double(v, k); }},
      {"network.n1", [&](auto& v, auto& k) { cfg.network.n1 = as_int(v, k); }},
      {"network.n2", [&](auto& v, auto& k) { cfg.network.n2 = as_int(v, k); }},
      {"network.antennas_per_ru", [&](auto& v, auto& k) { cfg.network.antennas_per_ru = as_int(v, k); }},
      {"network.pathloss_exponent", [&](auto& v, auto& k) { cfg.network.pathloss_exponent = as_double(v, k); }},
      {"network.cutoff_km", [&](auto& v, auto& k) { cfg.network.cutoff_km = as_double(v, k); }},
      {"block_length", [&](auto& v, auto& k) { cfg.block_length = as_int(v, k); }},
      {"codewords_per_location", [&](auto& v, auto& k) { cfg.codewords_per_location = as_int(v, k); }},
      {"activity_raster", [&](auto& v, auto& k) { cfg.activity_raster = as_doubles(v, k); }},
      {"snr_rx_db", [&](auto& v, auto& k) { cfg.snr_rx_db = as_double(v, k); }},
      {"grid_order", [&](auto& v, auto& k) { cfg.grid_order = as_int(v, k); }},
      {"iterations", [&](auto& v, auto& k) { cfg.iterations = as_int(v, k); }},
      {"onsager", [&](auto& v, auto& k) {
         cfg.onsager = parse_enum(as_string(v, k), k, {OnsagerMode::empirical, OnsagerMode::se});
       }},
      {"covariance", [&](auto& v, auto& k) {
         cfg.covariance = parse_enum(as_string(v, k), k, {CovarianceSource::se, CovarianceSource::empirical});
       }},
      {"seed", [&](auto& v, auto& k) {
         if (v.kind != TomlValue::Kind::integer || v.integer < 0) throw ConfigError(k + ": expected a non-negative integer");
         cfg.seed = static_cast<std::uint64_t>(v.integer);
       }},
      {"mode", [&](auto& v, auto& k) {
         cfg.mode = parse_enum(as_string(v, k), k, {CodebookMode::location_based, CodebookMode::single_codebook});
       }},
      {"denoiser", [&](auto& v, auto& k) {
         cfg.denoiser = parse_enum(as_string(v, k), k, {DenoiserMode::matched, DenoiserMode::mismatched});
       }},
      {"mixture", [&](auto& v, auto& k) {
         cfg.mixture = parse_enum(as_string(v, k), k, {MixtureWeights::posterior, MixtureWeights::prior});
       }},
      {"se_samples", [&](auto& v, auto& k) { cfg.se_samples = as_int(v, k); }},
      {"calibration_samples", [&](auto& v, auto& k) { cfg.calibration_samples = as_int(v, k); }},
      {"runs", [&](auto& v, auto& k) { cfg.runs = as_int(v, k); }},
      {"sc_thinning", [&](auto& v, auto& k) { cfg.sc_thinning = as_int(v, k); }},
      {"sc_activity", [&](auto& v, auto& k) { cfg.sc_activity = as_double(v, k); }},
      {"snr_sweep_db", [&](auto& v, auto& k) { cfg.snr_sweep_db = as_doubles(v, k); }},
      {"early_stop_tol", [&](auto& v, auto& k) { cfg.early_stop_tol = as_double(v, k); }},
      {"snapshot_location", [&](auto& v, auto& k) { cfg.snapshot_location = as_int(v, k); }},
      {"genie_mc_draws", [&](auto& v, auto& k) { cfg.genie_mc_draws = as_int(v, k); }},
  };
  for (const auto& [key, value] : table) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, key);
  }
}

ScenarioConfig load_config_file(const std::filesystem::path& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config(base, parse_toml(ss.str()));
  return base;
}

std::string to_toml(const ScenarioConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto list = [&](const std::vector<double>& v) {
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << "]\n";
  };
  auto num = [&](double d) {
    std::ostringstream t;
    t << std::setprecision(17) << d;
    std::string s = t.str();
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  };
  os << "block_length = " << cfg.block_length << "\n";
  os << "codewords_per_location = " << cfg.codewords_per_location << "\n";
  os << "activity_raster = ";
  list(cfg.activity_raster);
  os << "snr_rx_db = " << num(cfg.snr_rx_db) << "\n";
  os << "grid_order = " << cfg.grid_order << "\n";
  os << "iterations = " << cfg.iterations << "\n";
  os << "onsager = \"" << to_string(cfg.onsager) << "\"\n";
  os << "covariance = \"" << to_string(cfg.covariance) << "\"\n";
  os << "seed = " << cfg.seed << "\n";
  os << "mode = \"" << to_string(cfg.mode) << "\"\n";
  os << "denoiser = \"" << to_string(cfg.denoiser) << "\"\n";
  os << "mixture = \"" << to_string(cfg.mixture) << "\"\n";
  os << "se_samples = " << cfg.se_samples << "\n";
  os << "calibration_samples = " << cfg.calibration_samples << "\n";
  os << "runs = " << cfg.runs << "\n";
  os << "sc_thinning = " << cfg.sc_thinning << "\n";
  if (cfg.sc_activity) os << "sc_activity = " << num(*cfg.sc_activity) << "\n";
  os << "snr_sweep_db = ";
  list(cfg.snr_sweep_db);
  os << "early_stop_tol = " << num(cfg.early_stop_tol) << "\n";
  os << "snapshot_location = " << cfg.snapshot_location << "\n";
  os << "genie_mc_draws = " << cfg.genie_mc_draws << "\n";
  os << "\n[network]\n";
  os << "side_km = " << num(cfg.network.side_km) << "\n";
  os << "n1 = " << cfg.network.n1 << "\n";
  os << "n2 = " << cfg.network.n2 << "\n";
  os << "antennas_per_ru = " << cfg.network.antennas_per_ru << "\n";
  os << "pathloss_exponent = " << num(cfg.network.pathloss_exponent) << "\n";
  os << "cutoff_km = " << num(cfg.network.cutoff_km) << "\n";
  return os.str();
}

}  // namespace cfura
