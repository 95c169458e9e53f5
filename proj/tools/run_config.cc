#include "run_config.h"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "lidarpipe/error.h"

namespace lidarpipe::cli {

namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(const std::string&)>;
using Section = std::map<std::string, Setter>;

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::kBadConfig, "bad value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    const double v = boost::lexical_cast<double>(value);
    if (!std::isfinite(v)) bad_value(key, value);
    return v;
  } catch (const boost::bad_lexical_cast&) {
    bad_value(key, value);
  }
}

std::size_t to_count(const std::string& key, const std::string& value) {
  try {
    const long long v = boost::lexical_cast<long long>(value);
    if (v < 0) bad_value(key, value);
    return static_cast<std::size_t>(v);
  } catch (const boost::bad_lexical_cast&) {
    bad_value(key, value);
  }
}

Palette to_palette(const std::string& key, const std::string& value) {
  const auto p = parse_palette(value);
  if (!p) bad_value(key, value);
  return *p;
}

void add_range_keys(Section& s, Range& x, Range& y, Range& z) {
  auto bind = [&s](const char* name, double& target) {
    s[name] = [&target, name](const std::string& v) { target = to_double(name, v); };
  };
  bind("x_min", x.min);
  bind("x_max", x.max);
  bind("y_min", y.min);
  bind("y_max", y.max);
  bind("z_min", z.min);
  bind("z_max", z.max);
}

// '#' starts a comment anywhere on a line; the ini reader only knows
// whole-line ';' comments.
std::string strip_comments(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string result;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    result += line;
    result += '\n';
  }
  return result;
}

}  // namespace

std::vector<Metric> parse_metric_list(std::string_view text) {
  const std::string name = boost::algorithm::to_lower_copy(std::string(text));
  if (name == "all") return {Metric::kBbox2d, Metric::kBboxBev, Metric::kBbox3d};
  const auto m = parse_metric(name);
  if (!m) throw Error(ErrorCode::kBadConfig, "unknown metric '" + std::string(text) + "'");
  return {*m};
}

std::vector<ObjectClass> parse_class_list(std::string_view text) {
  std::vector<std::string> tokens;
  boost::algorithm::split(tokens, text, boost::algorithm::is_any_of(","));
  std::vector<ObjectClass> classes;
  for (auto& token : tokens) {
    boost::algorithm::trim(token);
    if (token.empty()) continue;
    const auto cls = parse_class_token(token);
    if (!cls || *cls == ObjectClass::kDontCare) {
      throw Error(ErrorCode::kBadConfig, "unknown class '" + token + "'");
    }
    classes.push_back(*cls);
  }
  if (classes.empty()) throw Error(ErrorCode::kBadConfig, "empty class list");
  return classes;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::map<std::string, Section> sections;

  sections["data"]["root"] = [&](const std::string& v) { cfg.data_root = v; };
  sections["output"]["dir"] = [&](const std::string& v) { cfg.output_dir = v; };
  sections["run"]["threads"] = [&](const std::string& v) {
    cfg.threads = to_count("run.threads", v);
    if (cfg.threads == 0) bad_value("run.threads", v);
  };

  Section& pillar = sections["pillar"];
  add_range_keys(pillar, cfg.pillar.x_range, cfg.pillar.y_range, cfg.pillar.z_range);
  pillar["pillar_dx"] = [&](const std::string& v) { cfg.pillar.pillar_dx = to_double("pillar.pillar_dx", v); };
  pillar["pillar_dy"] = [&](const std::string& v) { cfg.pillar.pillar_dy = to_double("pillar.pillar_dy", v); };
  pillar["max_pillars"] = [&](const std::string& v) { cfg.pillar.max_pillars = to_count("pillar.max_pillars", v); };
  pillar["max_points"] = [&](const std::string& v) { cfg.pillar.max_points_per_pillar = to_count("pillar.max_points", v); };

  Section& voxel = sections["voxel"];
  add_range_keys(voxel, cfg.voxel.x_range, cfg.voxel.y_range, cfg.voxel.z_range);
  voxel["voxel_x"] = [&](const std::string& v) { cfg.voxel.voxel_x = to_double("voxel.voxel_x", v); };
  voxel["voxel_y"] = [&](const std::string& v) { cfg.voxel.voxel_y = to_double("voxel.voxel_y", v); };
  voxel["voxel_z"] = [&](const std::string& v) { cfg.voxel.voxel_z = to_double("voxel.voxel_z", v); };
  voxel["max_points"] = [&](const std::string& v) { cfg.voxel.max_points_per_voxel = to_count("voxel.max_points", v); };

  Section& bev = sections["bev"];
  add_range_keys(bev, cfg.bev.x_range, cfg.bev.y_range, cfg.bev.z_range);
  bev["resolution"] = [&](const std::string& v) { cfg.bev.resolution = to_double("bev.resolution", v); };
  bev["palette"] = [&](const std::string& v) { cfg.bev.palette = to_palette("bev.palette", v); };

  Section& project = sections["project"];
  project["width"] = [&](const std::string& v) { cfg.project.width = to_count("project.width", v); };
  project["height"] = [&](const std::string& v) { cfg.project.height = to_count("project.height", v); };
  project["max_depth"] = [&](const std::string& v) { cfg.project.max_depth = to_double("project.max_depth", v); };
  project["palette"] = [&](const std::string& v) { cfg.project.palette = to_palette("project.palette", v); };

  Section& eval = sections["eval"];
  eval["metric"] = [&](const std::string& v) { cfg.eval.metrics = parse_metric_list(v); };
  eval["mode"] = [&](const std::string& v) {
    const auto mode = parse_ap_mode(v);
    if (!mode) bad_value("eval.mode", v);
    cfg.eval.mode = *mode;
  };
  eval["classes"] = [&](const std::string& v) { cfg.eval.classes = parse_class_list(v); };

  pt::ptree tree;
  try {
    std::istringstream in(strip_comments(text));
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kBadConfig, "line " + std::to_string(e.line()) + ": " + e.message());
  }

  for (const auto& [section_name, section] : tree) {
    const auto known = sections.find(section_name);
    if (known == sections.end() || !section.data().empty()) {
      throw Error(ErrorCode::kBadConfig, "unknown section or key '" + section_name + "'");
    }
    for (const auto& [key, value] : section) {
      const auto setter = known->second.find(key);
      if (setter == known->second.end()) {
        throw Error(ErrorCode::kBadConfig, "unknown key " + section_name + "." + key);
      }
      setter->second(boost::algorithm::trim_copy(value.data()));
    }
  }
  return cfg;
}

}  // namespace lidarpipe::cli
