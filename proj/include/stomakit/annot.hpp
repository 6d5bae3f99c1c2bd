#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "stomakit/error.hpp"
#include "stomakit/phenotype.hpp"
#include "stomakit/rotated_box.hpp"

namespace stomakit {

enum class AngleUnit { Radians, Degrees };

namespace detail {

inline double to_radians(double angle, AngleUnit unit) {
  return unit == AngleUnit::Degrees ? angle * std::numbers::pi / 180.0 : angle;
}

// Shortest round-trip formatting for metadata files.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string strip_extension(const std::string& name) {
  const auto dot = name.find_last_of('.');
  if (dot == std::string::npos || dot == 0) return name;
  return name.substr(0, dot);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RolabelImg XML (rotated-box annotation files)
// ---------------------------------------------------------------------------

// Parses one annotation file: <annotation> with <size> and any number of
// <object><name>..<robndbox> entries. Angles are radians unless told
// otherwise; every box is stored in canonical form.
inline LabeledImage parse_rolabelimg(const std::string& xml_text,
                                     AngleUnit unit = AngleUnit::Radians) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(xml_text);
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, e.what());
  }

  const auto ann = tree.get_child_optional("annotation");
  if (!ann) {
    throw Error(ErrorCode::MissingField, "missing <annotation> root");
  }

  auto get_num = [](const pt::ptree& node, const char* key) {
    const auto v = node.get_optional<double>(key);
    if (!v || !std::isfinite(*v)) {
      throw Error(ErrorCode::MissingField,
                  std::string("missing or non-numeric <") + key + ">");
    }
    return *v;
  };

  LabeledImage image;
  if (const auto fn = ann->get_optional<std::string>("filename")) {
    image.image_id = detail::strip_extension(*fn);
  }
  const auto size = ann->get_child_optional("size");
  if (!size) throw Error(ErrorCode::MissingField, "missing <size>");
  image.width = get_num(*size, "width");
  image.height = get_num(*size, "height");

  for (const auto& [key, node] : *ann) {
    if (key != "object") continue;
    const auto name = node.get_optional<std::string>("name");
    if (!name) throw Error(ErrorCode::MissingField, "object missing <name>");
    LabeledBox lb;
    lb.label = parse_label(*name);
    const auto rb = node.get_child_optional("robndbox");
    if (!rb) throw Error(ErrorCode::MissingField, "object missing <robndbox>");
    RotatedBox box;
    box.cx = get_num(*rb, "cx");
    box.cy = get_num(*rb, "cy");
    box.w = get_num(*rb, "w");
    box.h = get_num(*rb, "h");
    box.angle = detail::to_radians(get_num(*rb, "angle"), unit);
    validate_box_in_image(box, image.width, image.height);
    lb.box = box.canonical();
    image.boxes.push_back(lb);
  }
  return image;
}

// Writes the same schema parse_rolabelimg reads. Scores are not part of the
// annotation format and are dropped.
inline std::string write_rolabelimg(const LabeledImage& image) {
  std::string out;
  out += "<annotation>\n";
  out += "  <filename>" + image.image_id + "</filename>\n";
  out += "  <size>\n";
  out += "    <width>" + detail::format_double(image.width) + "</width>\n";
  out += "    <height>" + detail::format_double(image.height) + "</height>\n";
  out += "    <depth>1</depth>\n";
  out += "  </size>\n";
  for (const LabeledBox& lb : image.boxes) {
    out += "  <object>\n";
    out += "    <type>robndbox</type>\n";
    out += std::string("    <name>") + label_name(lb.label) + "</name>\n";
    out += "    <robndbox>\n";
    out += "      <cx>" + detail::format_double(lb.box.cx) + "</cx>\n";
    out += "      <cy>" + detail::format_double(lb.box.cy) + "</cy>\n";
    out += "      <w>" + detail::format_double(lb.box.w) + "</w>\n";
    out += "      <h>" + detail::format_double(lb.box.h) + "</h>\n";
    out += "      <angle>" + detail::format_double(lb.box.angle) + "</angle>\n";
    out += "    </robndbox>\n";
    out += "  </object>\n";
  }
  out += "</annotation>\n";
  return out;
}

// ---------------------------------------------------------------------------
// Detection JSON
// ---------------------------------------------------------------------------
//
// [
//   {"image_id": "...", "width": W, "height": H,
//    "detections": [{"label": "stoma", "score": 0.9,
//                    "cx": .., "cy": .., "w": .., "h": .., "angle": ..}]}
// ]

inline std::vector<LabeledImage> parse_detections(
    const std::string& json_text, AngleUnit unit = AngleUnit::Radians) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what());
  }
  if (!root.is_array()) {
    throw Error(ErrorCode::MalformedJson, "top level must be an array");
  }

  auto require = [](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      throw Error(ErrorCode::MissingField, std::string("missing key \"") + key + "\"");
    }
    return *it;
  };
  auto num = [&require](const nlohmann::json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_number()) {
      throw Error(ErrorCode::MalformedJson, std::string("key \"") + key + "\" must be a number");
    }
    return v.get<double>();
  };

  std::vector<LabeledImage> images;
  for (const auto& entry : root) {
    if (!entry.is_object()) {
      throw Error(ErrorCode::MalformedJson, "image entry must be an object");
    }
    LabeledImage image;
    const auto& id = require(entry, "image_id");
    if (!id.is_string()) {
      throw Error(ErrorCode::MalformedJson, "image_id must be a string");
    }
    image.image_id = id.get<std::string>();
    image.width = num(entry, "width");
    image.height = num(entry, "height");
    const auto& dets = require(entry, "detections");
    if (!dets.is_array()) {
      throw Error(ErrorCode::MalformedJson, "detections must be an array");
    }
    for (const auto& d : dets) {
      LabeledBox lb;
      const auto& label = require(d, "label");
      if (!label.is_string()) {
        throw Error(ErrorCode::MalformedJson, "label must be a string");
      }
      lb.label = parse_label(label.get<std::string>());
      const double score = num(d, "score");
      if (!(score >= 0.0 && score <= 1.0)) {
        throw Error(ErrorCode::ScoreOutOfRange,
                    "score " + std::to_string(score) + " outside [0,1]");
      }
      lb.score = score;
      RotatedBox box;
      box.cx = num(d, "cx");
      box.cy = num(d, "cy");
      box.w = num(d, "w");
      box.h = num(d, "h");
      box.angle = detail::to_radians(num(d, "angle"), unit);
      validate_box_in_image(box, image.width, image.height);
      lb.box = box.canonical();
      image.boxes.push_back(lb);
    }
    images.push_back(std::move(image));
  }
  return images;
}

inline std::string write_detections(const std::vector<LabeledImage>& images) {
  nlohmann::json root = nlohmann::json::array();
  for (const LabeledImage& image : images) {
    nlohmann::json dets = nlohmann::json::array();
    for (const LabeledBox& lb : image.boxes) {
      dets.push_back({{"label", label_name(lb.label)},
                      {"score", lb.score.value_or(1.0)},
                      {"cx", lb.box.cx},
                      {"cy", lb.box.cy},
                      {"w", lb.box.w},
                      {"h", lb.box.h},
                      {"angle", lb.box.angle}});
    }
    root.push_back({{"image_id", image.image_id},
                    {"width", image.width},
                    {"height", image.height},
                    {"detections", std::move(dets)}});
  }
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Phenotype report CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kReportHeader =
    "stomata average height (um),stomata average width (um),"
    "stomata aspect ratio,aperture average height (um),"
    "aperture average width (um),aperture aspect ratio,"
    "stomata density (stomata per mm2),conductance (mol m-2 s-1)";

// Fixed two-decimal formatting with round-half-up, the rule used throughout
// the report files.
inline std::string format_fixed2(double v) {
  if (!std::isfinite(v)) return "nan";
  const double r = std::floor(v * 100.0 + 0.5) / 100.0;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", r);
  return buf;
}

// One row per record. The "height" columns carry the short box axis and the
// "width" columns the long axis; that is the convention the report format
// uses, inferred from its aspect-ratio column being short/long.
inline std::string write_report_csv(
    const std::vector<pheno::PhenotypeRecord>& records) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const pheno::PhenotypeRecord& r : records) {
    out += format_fixed2(r.stoma_wid_um) + ',' + format_fixed2(r.stoma_len_um) +
           ',' + format_fixed2(r.stoma_aspect) + ',' +
           format_fixed2(r.aperture_wid_um) + ',' +
           format_fixed2(r.aperture_len_um) + ',' +
           format_fixed2(r.aperture_aspect) + ',' +
           format_fixed2(r.density_per_mm2) + ',' +
           format_fixed2(r.gsmax_mol_m2_s) + '\n';
  }
  return out;
}

inline std::vector<pheno::PhenotypeRecord> parse_report_csv(
    const std::string& csv_text) {
  std::istringstream is(csv_text);
  std::string line;
  if (!std::getline(is, line)) {
    throw Error(ErrorCode::MalformedCsv, "empty report");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) {
    throw Error(ErrorCode::MalformedCsv, "unexpected report header");
  }
  std::vector<pheno::PhenotypeRecord> records;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        cells.push_back(cell == "nan"
                            ? std::numeric_limits<double>::quiet_NaN()
                            : std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedCsv, "non-numeric cell \"" + cell + "\"");
      }
    }
    if (cells.size() != 8) {
      throw Error(ErrorCode::MalformedCsv, "expected 8 columns per row");
    }
    pheno::PhenotypeRecord r;
    r.stoma_wid_um = cells[0];
    r.stoma_len_um = cells[1];
    r.stoma_aspect = cells[2];
    r.aperture_wid_um = cells[3];
    r.aperture_len_um = cells[4];
    r.aperture_aspect = cells[5];
    r.density_per_mm2 = cells[6];
    r.gsmax_mol_m2_s = cells[7];
    records.push_back(r);
  }
  return records;
}

}  // namespace stomakit
