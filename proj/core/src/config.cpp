#include "topeval/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "topeval/error.hpp"
#include "topeval/hash.hpp"

namespace topeval {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw Error("config: bad value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error("config: bad boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One table drives set(), to_map() and the environment override list.
template <typename Visitor>
void visit_fields(RunConfig& c, Visitor&& v) {
  v("corpus", c.corpus);
  v("models", c.models);
  v("embeddings", c.embeddings);
  v("stop_words", c.stop_words);
  v("annotations", c.annotations);
  v("ratings", c.ratings);
  v("output_dir", c.output_dir);
  v("dataset", c.dataset);
  v("seed", c.seed);
  v("min_count", c.min_count);
  v("top_exclude", c.top_exclude);
  v("window_size", c.window_size);
  v("n_words", c.n_words);
  v("cluster_baseline", c.cluster_baseline);
  v("cluster_k", c.cluster_k);
  v("cluster_score", c.cluster_score);
  v("low_tau", c.low_tau);
  v("high_rank", c.high_rank);
  v("qc_threshold", c.qc_threshold);
  v("n_intrusion_docs", c.n_intrusion_docs);
  v("n_control_docs", c.n_control_docs);
  v("mu", c.mu);
  v("c", c.c);
  v("n_train_docs", c.n_train_docs);
  v("n_test_docs", c.n_test_docs);
  v("n_dev_docs", c.n_dev_docs);
  v("m_small", c.m_small);
  v("m_large", c.m_large);
  v("epochs", c.epochs);
  v("lease_seconds", c.lease_seconds);
  v("max_annotators", c.max_annotators);
}

struct Setter {
  std::string_view key, value;
  bool* found;
  void assign(std::string& f) const { f = std::string(value); }
  void assign(bool& f) const { f = parse_bool(key, value); }
  void assign(double& f) const { f = parse_number<double>(key, value); }
  template <typename I>
  void assign(I& f) const { f = parse_number<I>(key, value); }
  template <typename F>
  void operator()(std::string_view name, F& field) const {
    if (name != key) return;
    assign(field);
    *found = true;
  }
};

struct Printer {
  std::map<std::string, std::string>* out;
  void operator()(std::string_view name, const std::string& f) const { (*out)[std::string(name)] = f; }
  void operator()(std::string_view name, bool f) const { (*out)[std::string(name)] = f ? "true" : "false"; }
  void operator()(std::string_view name, double f) const { (*out)[std::string(name)] = format_double(f); }
  template <typename I>
  void operator()(std::string_view name, I f) const { (*out)[std::string(name)] = std::to_string(f); }
};

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  bool found = false;
  visit_fields(*this, Setter{key, trim(value), &found});
  if (!found) throw Error("config: unknown key '" + std::string(key) + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  visit_fields(const_cast<RunConfig&>(*this), Printer{&out});
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  // The output directory names where artifacts go, not what they contain.
  std::string text;
  for (const auto& [k, v] : to_map())
    if (k != "output_dir") text += k + " = " + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void apply_env_overrides(RunConfig& config) {
  for (const auto& [key, _] : config.to_map()) {
    std::string env(kEnvPrefix);
    for (char ch : key) env += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* v = std::getenv(env.c_str())) config.set(key, v);
  }
}

RunConfig resolve_paths(RunConfig c, const std::filesystem::path& base) {
  auto fix = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (base / p).lexically_normal().string();
  };
  fix(c.corpus);
  fix(c.embeddings);
  fix(c.stop_words);
  fix(c.annotations);
  fix(c.ratings);
  std::string models;
  for (auto m : split_list(c.models)) {
    fix(m);
    models += (models.empty() ? "" : ",") + m;
  }
  c.models = models;
  return c;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  while (true) {
    const auto p = s.find(sep);
    auto part = trim(s.substr(0, p));
    if (!part.empty()) out.emplace_back(part);
    if (p == std::string_view::npos) break;
    s = s.substr(p + 1);
  }
  return out;
}

}  // namespace topeval
