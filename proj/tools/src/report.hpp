#pragma once

// CSV, JSON and SVG writers for command outputs. Every writer is deterministic.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace consortium::cli {

using json = nlohmann::json;

/// %.17g, or empty for an absent value.
std::string num(std::optional<double> v);
/// Fixed-width rendering for terminal tables; "n/a" when absent.
std::string fixed(std::optional<double> v, int digits = 3);
json opt(std::optional<double> v);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool scatter = false;  // markers only, no connecting lines
};

std::string render_svg(const Chart& chart);

}  // namespace consortium::cli
