#include "lidarpipe/kitti_io.h"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "lidarpipe/error.h"
#include "text_util.h"

namespace lidarpipe {

namespace {

constexpr std::size_t kBytesPerPoint = 16;
constexpr std::size_t kLabelFields = 15;
constexpr std::size_t kDetectionFields = 16;

struct ClassEntry {
  ObjectClass cls;
  std::string_view token;
  std::string_view display;
};

constexpr std::array<ClassEntry, 9> kClassTable = {{
    {ObjectClass::kCar, "Car", "Car"},
    {ObjectClass::kVan, "Van", "Van"},
    {ObjectClass::kTruck, "Truck", "Truck"},
    {ObjectClass::kPedestrian, "Pedestrian", "Pedestrian"},
    {ObjectClass::kPersonSitting, "Person_sitting", "Person Sitting"},
    {ObjectClass::kCyclist, "Cyclist", "Cyclist"},
    {ObjectClass::kTram, "Tram", "Tram"},
    {ObjectClass::kMisc, "Misc", "Misc"},
    {ObjectClass::kDontCare, "DontCare", "Don't Care"},
}};

[[noreturn]] void label_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::kMalformedLabel,
              "line " + std::to_string(line_no) + ": " + what);
}

double label_number(std::string_view token, std::size_t line_no) {
  const auto value = parse_double(token);
  if (!value || !std::isfinite(*value)) {
    label_error(line_no, "bad number '" + std::string(token) + "'");
  }
  return *value;
}

// Parses the first 15 fields of a label or result line. `allow_sentinels`
// admits the -1 truncation/occlusion placeholders result files carry.
Annotation parse_object_fields(const std::vector<std::string_view>& fields,
                               std::size_t line_no, bool allow_sentinels) {
  Annotation ann;
  const auto cls = parse_class_token(fields[0]);
  if (!cls) label_error(line_no, "unknown class '" + std::string(fields[0]) + "'");
  ann.label = *cls;
  ann.truncated = label_number(fields[1], line_no);
  const double occluded = label_number(fields[2], line_no);
  if (occluded != std::floor(occluded)) {
    label_error(line_no, "occlusion must be an integer");
  }
  ann.occluded = static_cast<int>(occluded);
  ann.alpha = label_number(fields[3], line_no);
  ann.bbox = {label_number(fields[4], line_no), label_number(fields[5], line_no),
              label_number(fields[6], line_no), label_number(fields[7], line_no)};
  ann.dims = {label_number(fields[8], line_no), label_number(fields[9], line_no),
              label_number(fields[10], line_no)};
  ann.location = {label_number(fields[11], line_no),
                  label_number(fields[12], line_no),
                  label_number(fields[13], line_no)};
  ann.rotation_y = label_number(fields[14], line_no);

  if (ann.bbox.right < ann.bbox.left || ann.bbox.bottom < ann.bbox.top) {
    label_error(line_no, "inverted 2D box");
  }
  if (ann.label == ObjectClass::kDontCare) return ann;

  const bool truncation_sentinel = allow_sentinels && ann.truncated == -1.0;
  if (!truncation_sentinel && (ann.truncated < 0.0 || ann.truncated > 1.0)) {
    label_error(line_no, "truncation outside [0, 1]");
  }
  const bool occlusion_sentinel = allow_sentinels && ann.occluded == -1;
  if (!occlusion_sentinel && (ann.occluded < 0 || ann.occluded > 3)) {
    label_error(line_no, "occlusion outside {0, 1, 2, 3}");
  }
  if (ann.dims.height < 0.0 || ann.dims.width < 0.0 || ann.dims.length < 0.0) {
    label_error(line_no, "negative dimensions");
  }
  return ann;
}

void append_object_fields(std::string& out, const Annotation& ann) {
  char buffer[384];
  std::snprintf(buffer, sizeof(buffer),
                "%s %.6f %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f "
                "%.6f %.6f",
                std::string(class_token(ann.label)).c_str(), ann.truncated,
                ann.occluded, ann.alpha, ann.bbox.left, ann.bbox.top,
                ann.bbox.right, ann.bbox.bottom, ann.dims.height,
                ann.dims.width, ann.dims.length, ann.location.x(),
                ann.location.y(), ann.location.z(), ann.rotation_y);
  out += buffer;
}

template <typename Matrix>
void read_calib_row(std::string_view values, std::string_view name,
                    Matrix& matrix) {
  const auto tokens = split_whitespace(values);
  if (tokens.size() != static_cast<std::size_t>(matrix.size())) {
    throw Error(ErrorCode::kMalformedCalib,
                std::string(name) + " expects " + std::to_string(matrix.size()) +
                    " values, got " + std::to_string(tokens.size()));
  }
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      const auto token = tokens[static_cast<std::size_t>(r * matrix.cols() + c)];
      const auto value = parse_double(token);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorCode::kMalformedCalib,
                    std::string(name) + ": bad number '" + std::string(token) + "'");
      }
      matrix(r, c) = *value;
    }
  }
}

template <typename Matrix>
void write_calib_row(std::string& out, std::string_view name,
                     const Matrix& matrix) {
  out += name;
  out += ':';
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      out += ' ';
      out += format_shortest(matrix(r, c));
    }
  }
  out += '\n';
}

}  // namespace

PointCloud parse_point_cloud(std::span<const std::byte> bytes) {
  if (bytes.size() % kBytesPerPoint != 0) {
    throw Error(ErrorCode::kMalformedCloud,
                std::to_string(bytes.size()) + " bytes is not a multiple of 16");
  }
  PointCloud cloud;
  cloud.points.resize(bytes.size() / kBytesPerPoint);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const std::size_t base = i * kBytesPerPoint;
    Point& p = cloud.points[i];
    p.x = read_f32_le(bytes, base);
    p.y = read_f32_le(bytes, base + 4);
    p.z = read_f32_le(bytes, base + 8);
    p.r = read_f32_le(bytes, base + 12);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.r)) {
      throw Error(ErrorCode::kNonFiniteValue,
                  "point " + std::to_string(i) + " has a NaN/Inf component");
    }
    if (p.r < 0.0f || p.r > 1.0f) {
      throw Error(ErrorCode::kReflectanceOutOfRange,
                  "point " + std::to_string(i) + " reflectance " +
                      std::to_string(p.r));
    }
  }
  return cloud;
}

Bytes serialize_point_cloud(const PointCloud& cloud) {
  Bytes out;
  out.reserve(cloud.size() * kBytesPerPoint);
  for (const Point& p : cloud.points) {
    append_f32_le(out, p.x);
    append_f32_le(out, p.y);
    append_f32_le(out, p.z);
    append_f32_le(out, p.r);
  }
  return out;
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  return parse_point_cloud(read_file_bytes(path));
}

std::string_view class_token(ObjectClass cls) {
  for (const auto& entry : kClassTable) {
    if (entry.cls == cls) return entry.token;
  }
  return "DontCare";
}

std::string_view class_display_name(ObjectClass cls) {
  for (const auto& entry : kClassTable) {
    if (entry.cls == cls) return entry.display;
  }
  return "Don't Care";
}

std::optional<ObjectClass> parse_class_token(std::string_view token) {
  for (const auto& entry : kClassTable) {
    if (entry.token == token) return entry.cls;
  }
  return std::nullopt;
}

std::vector<Annotation> parse_labels(std::string_view text) {
  std::vector<Annotation> out;
  std::size_t line_no = 0;
  for (const auto line : split_lines(text)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != kLabelFields) {
      label_error(line_no, "expected 15 fields, got " +
                               std::to_string(fields.size()));
    }
    out.push_back(parse_object_fields(fields, line_no, false));
  }
  return out;
}

std::string write_labels(std::span<const Annotation> annotations) {
  std::string out;
  for (const auto& ann : annotations) {
    append_object_fields(out, ann);
    out += '\n';
  }
  return out;
}

std::vector<Annotation> load_labels(const std::filesystem::path& path) {
  return parse_labels(read_file_text(path));
}

std::vector<Detection> parse_detections(std::string_view text) {
  std::vector<Detection> out;
  std::size_t line_no = 0;
  for (const auto line : split_lines(text)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != kDetectionFields) {
      label_error(line_no, "expected 16 fields, got " +
                               std::to_string(fields.size()));
    }
    Detection det;
    det.object = parse_object_fields(fields, line_no, true);
    det.score = label_number(fields[15], line_no);
    out.push_back(det);
  }
  return out;
}

std::string write_detections(std::span<const Detection> detections) {
  std::string out;
  char score[64];
  for (const auto& det : detections) {
    append_object_fields(out, det.object);
    std::snprintf(score, sizeof(score), " %.6f\n", det.score);
    out += score;
  }
  return out;
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  return parse_detections(read_file_text(path));
}

Calibration parse_calib(std::string_view text) {
  Calibration calib;
  bool have_p2 = false;
  bool have_r0 = false;
  bool have_tr = false;
  for (const auto raw : split_lines(text)) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::kMalformedCalib,
                  "row without ':' separator: '" + std::string(line) + "'");
    }
    const auto name = trim(line.substr(0, colon));
    const auto values = line.substr(colon + 1);
    if (name == "P2") {
      read_calib_row(values, name, calib.p2);
      have_p2 = true;
    } else if (name == "R0_rect") {
      read_calib_row(values, name, calib.r0_rect);
      have_r0 = true;
    } else if (name == "Tr_velo_to_cam") {
      read_calib_row(values, name, calib.tr_velo_to_cam);
      have_tr = true;
    }
  }
  if (!have_p2) throw Error(ErrorCode::kMissingCalibEntry, "P2");
  if (!have_r0) throw Error(ErrorCode::kMissingCalibEntry, "R0_rect");
  if (!have_tr) throw Error(ErrorCode::kMissingCalibEntry, "Tr_velo_to_cam");

  const Eigen::Matrix3d gram = calib.r0_rect * calib.r0_rect.transpose();
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-3) {
    throw Error(ErrorCode::kMalformedCalib, "R0_rect is not orthonormal");
  }
  return calib;
}

std::string serialize_calib(const Calibration& calib) {
  std::string out;
  write_calib_row(out, "P2", calib.p2);
  write_calib_row(out, "R0_rect", calib.r0_rect);
  write_calib_row(out, "Tr_velo_to_cam", calib.tr_velo_to_cam);
  return out;
}

Calibration load_calib(const std::filesystem::path& path) {
  return parse_calib(read_file_text(path));
}

}  // namespace lidarpipe
