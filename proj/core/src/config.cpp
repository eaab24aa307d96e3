#include "truelearn/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "truelearn/error.hpp"

namespace truelearn {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct KeyValue {
  std::size_t line;
  std::string key;
  std::string value;
};

std::vector<KeyValue> parse_lines(std::string_view text) {
  std::vector<KeyValue> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    out.push_back({line_no, std::string(trim(line.substr(0, eq))),
                   std::string(trim(line.substr(eq + 1)))});
  }
  return out;
}

std::string unquote(std::string_view v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

double to_double(const KeyValue& kv, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw UsageError("config line " + std::to_string(kv.line) + ": '" + kv.key +
                     "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(const KeyValue& kv) {
  if (kv.value == "true") return true;
  if (kv.value == "false") return false;
  throw UsageError("config line " + std::to_string(kv.line) + ": '" + kv.key +
                   "' expects true or false");
}

std::size_t to_count(const KeyValue& kv) {
  const double d = to_double(kv, kv.value);
  if (d < 0.0 || d != std::floor(d)) {
    throw UsageError("config line " + std::to_string(kv.line) + ": '" + kv.key +
                     "' expects a nonnegative integer");
  }
  return static_cast<std::size_t>(d);
}

std::vector<double> to_list(const KeyValue& kv) {
  std::string_view v = kv.value;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw UsageError("grid line " + std::to_string(kv.line) + ": '" + kv.key +
                     "' expects a list like [0.5, 1.0]");
  }
  v = trim(v.substr(1, v.size() - 2));
  std::vector<double> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(to_double(kv, v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v = trim(v.substr(comma + 1));
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

ModelConfig parse_config(std::string_view text, const ModelConfig& base) {
  const auto kvs = parse_lines(text);
  ModelConfig cfg = base;
  for (const auto& kv : kvs) {
    if (kv.key == "model") cfg = ModelConfig::defaults_for(parse_model_kind(unquote(kv.value)));
  }
  for (const auto& kv : kvs) {
    if (kv.key == "model") continue;
    if (kv.key == "init_mean") cfg.init_mean = to_double(kv, kv.value);
    else if (kv.key == "init_variance") cfg.init_variance = to_double(kv, kv.value);
    else if (kv.key == "beta") cfg.beta = to_double(kv, kv.value);
    else if (kv.key == "tau") cfg.tau = to_double(kv, kv.value);
    else if (kv.key == "use_negative") cfg.use_negative = to_bool(kv);
    else if (kv.key == "top_k") cfg.top_k = to_count(kv);
    else if (kv.key == "kt_noise") cfg.kt_noise = to_double(kv, kv.value);
    else if (kv.key == "default_engagement_rate") cfg.default_engagement_rate = to_double(kv, kv.value);
    else throw UsageError("config line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
  }
  cfg.validate();
  return cfg;
}

std::string config_to_text(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "model = \"" << to_string(cfg.kind) << "\"\n"
      << "init_mean = " << format_double(cfg.init_mean) << '\n'
      << "init_variance = " << format_double(cfg.init_variance) << '\n'
      << "beta = " << format_double(cfg.beta) << '\n'
      << "tau = " << format_double(cfg.tau) << '\n'
      << "use_negative = " << (cfg.use_negative ? "true" : "false") << '\n'
      << "top_k = " << cfg.top_k << '\n'
      << "kt_noise = " << format_double(cfg.kt_noise) << '\n'
      << "default_engagement_rate = " << format_double(cfg.default_engagement_rate) << '\n';
  return out.str();
}

GridSpec parse_grid(std::string_view text) {
  GridSpec grid;
  for (const auto& kv : parse_lines(text)) {
    if (kv.key == "init_variance") grid.init_variance = to_list(kv);
    else if (kv.key == "kt_noise") grid.kt_noise = to_list(kv);
    else if (kv.key == "tau") grid.tau = to_list(kv);
    else if (kv.key == "beta") grid.beta = to_list(kv);
    else throw UsageError("grid line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
  }
  return grid;
}

}  // namespace truelearn
