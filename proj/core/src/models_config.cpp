#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "consortium/backends.hpp"
#include "consortium/errors.hpp"

namespace consortium {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view value, std::string_view key, std::size_t line) {
  std::string v(value);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("line " + std::to_string(line) + ": " + std::string(key) +
                      " expects a number, got '" + v + "'");
  return d;
}

int to_int(std::string_view value, std::string_view key, std::size_t line) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("line " + std::to_string(line) + ": " + std::string(key) +
                      " expects an integer, got '" + std::string(value) + "'");
  return out;
}

std::filesystem::path resolve(std::string_view value, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(value)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<ModelSpec> parse_models_config(std::string_view text,
                                           const std::filesystem::path& base_dir) {
  std::vector<ModelSpec> specs;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  ModelSpec* current = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view l = trim(raw);
    if (l.empty() || l.front() == '#' || l.front() == ';') continue;
    if (l.front() == '[') {
      if (l.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unclosed section");
      std::string_view inner = trim(l.substr(1, l.size() - 2));
      if (inner.substr(0, 6) != "model " && inner.substr(0, 6) != "model\t")
        throw ConfigError("line " + std::to_string(line) + ": expected [model <id>]");
      std::string id(trim(inner.substr(6)));
      if (!ids.insert(id).second)
        throw ConfigError("line " + std::to_string(line) + ": duplicate model id '" + id + "'");
      specs.emplace_back();
      current = &specs.back();
      current->id = id;
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    if (current == nullptr)
      throw ConfigError("line " + std::to_string(line) + ": key outside a [model ...] section");
    const std::string_view key = trim(l.substr(0, eq));
    const std::string_view value = trim(l.substr(eq + 1));
    ModelSpec& s = *current;
    if (key == "id") {
      if (value != s.id)
        throw ConfigError("line " + std::to_string(line) + ": id does not match section header");
    } else if (key == "backend") {
      if (value == "http") s.backend = BackendKind::Http;
      else if (value == "replay") s.backend = BackendKind::Replay;
      else if (value == "synthetic") s.backend = BackendKind::Synthetic;
      else
        throw ConfigError("line " + std::to_string(line) + ": unknown backend '" +
                          std::string(value) + "'");
    } else if (key == "endpoint") {
      s.endpoint = value;
    } else if (key == "auth_env_var") {
      s.auth_env_var = value;
    } else if (key == "remote_model") {
      s.remote_model = value;
    } else if (key == "price_in") {
      s.price_in = to_double(value, key, line);
    } else if (key == "price_out") {
      s.price_out = to_double(value, key, line);
    } else if (key == "mock_benchmark_score") {
      s.mock_benchmark_score = to_double(value, key, line);
    } else if (key == "max_concurrency") {
      s.max_concurrency = to_int(value, key, line);
    } else if (key == "rpm") {
      s.requests_per_minute = to_double(value, key, line);
    } else if (key == "max_retries") {
      s.max_retries = to_int(value, key, line);
    } else if (key == "backoff_ms") {
      s.backoff_initial = std::chrono::milliseconds(to_int(value, key, line));
    } else if (key == "backoff_cap_ms") {
      s.backoff_cap = std::chrono::milliseconds(to_int(value, key, line));
    } else if (key == "timeout_s") {
      s.timeout = std::chrono::seconds(to_int(value, key, line));
    } else if (key == "replay_log") {
      s.replay_log = resolve(value, base_dir);
    } else if (key == "profile") {
      s.profile = resolve(value, base_dir);
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" + std::string(key) + "'");
    }
  }
  for (const auto& s : specs) {
    try {
      s.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("models config: ") + e.what());
    }
  }
  return specs;
}

std::vector<ModelSpec> load_models_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open models config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_models_config(buf.str(), path.parent_path());
}

std::string format_models_config(const std::vector<ModelSpec>& specs) {
  std::ostringstream os;
  const ModelSpec defaults;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ModelSpec& s = specs[i];
    if (i > 0) os << '\n';
    os << "[model " << s.id << "]\n";
    os << "backend = " << to_string(s.backend) << '\n';
    if (!s.endpoint.empty()) os << "endpoint = " << s.endpoint << '\n';
    if (!s.auth_env_var.empty()) os << "auth_env_var = " << s.auth_env_var << '\n';
    if (!s.remote_model.empty()) os << "remote_model = " << s.remote_model << '\n';
    if (!s.replay_log.empty()) os << "replay_log = " << s.replay_log.string() << '\n';
    if (!s.profile.empty()) os << "profile = " << s.profile.string() << '\n';
    if (s.price_in) os << "price_in = " << fmt(*s.price_in) << '\n';
    if (s.price_out) os << "price_out = " << fmt(*s.price_out) << '\n';
    if (s.mock_benchmark_score) os << "mock_benchmark_score = " << fmt(*s.mock_benchmark_score) << '\n';
    if (s.backend == BackendKind::Http) {
      if (s.max_concurrency != defaults.max_concurrency)
        os << "max_concurrency = " << s.max_concurrency << '\n';
      if (s.requests_per_minute != defaults.requests_per_minute)
        os << "rpm = " << fmt(s.requests_per_minute) << '\n';
      if (s.max_retries != defaults.max_retries) os << "max_retries = " << s.max_retries << '\n';
      if (s.backoff_initial != defaults.backoff_initial)
        os << "backoff_ms = " << s.backoff_initial.count() << '\n';
      if (s.backoff_cap != defaults.backoff_cap)
        os << "backoff_cap_ms = " << s.backoff_cap.count() << '\n';
      if (s.timeout != defaults.timeout) os << "timeout_s = " << s.timeout.count() << '\n';
    }
  }
  return os.str();
}

}  // namespace consortium
