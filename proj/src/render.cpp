#include "mapfusion/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mapfusion {

BuildingModel extrude(const Footprint& footprint, double height) {
  if (height <= 0) throw NonPositiveHeight();
  BuildingModel m;
  m.building_id = footprint.id;
  m.ring = footprint.ring;
  m.ground_elev = footprint.ground_elev;
  m.height = height;
  const double zb = footprint.ground_elev;
  const double zt = footprint.ground_elev + height;
  size_t n = footprint.ring.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& p0 = footprint.ring[i];
    const auto& p1 = footprint.ring[(i + 1) % n];
    BuildingModel::Face f;
    f.vertices = {{p0.x(), p0.y(), zb}, {p1.x(), p1.y(), zb}, {p1.x(), p1.y(), zt}, {p0.x(), p0.y(), zt}};
    m.faces.push_back(std::move(f));
  }
  BuildingModel::Face roof;
  roof.is_roof = true;
  for (const auto& p : footprint.ring) roof.vertices.push_back({p.x(), p.y(), zt});
  m.faces.push_back(std::move(roof));
  return m;
}

namespace {

constexpr double kNearClip = 1e-3;

bool point_in_poly(double px, double py, const std::vector<Eigen::Vector2d>& poly) {
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > py) != (b.y() > py)) {
      double x_cross = a.x() + (py - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (px < x_cross) inside = !inside;
    }
  }
  return inside;
}

// Clip camera-space polygon against the plane z = kNearClip.
std::vector<Eigen::Vector3d> clip_near(const std::vector<Eigen::Vector3d>& poly) {
  std::vector<Eigen::Vector3d> out;
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& a = poly[i];
    const Eigen::Vector3d& b = poly[(i + 1) % n];
    bool a_in = a.z() > kNearClip, b_in = b.z() > kNearClip;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      double t = (kNearClip - a.z()) / (b.z() - a.z());
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

}  // namespace

FacadeMask render_masks(const std::vector<BuildingModel>& models, const CameraIntrinsics& intr,
                        const CameraPose& pose, const RenderOptions& opts) {
  FacadeMask mask;
  mask.labels = Image<std::uint16_t>(intr.image_width, intr.image_height, 0);

  struct DrawFace {
    std::vector<Eigen::Vector2d> pixels;  // projected polygon
    double dist = 0;                      // camera to world centroid
    std::uint16_t label = 0;
  };
  std::vector<DrawFace> draw;
  std::uint16_t next_label = 1;
  for (const auto& model : models) {
    std::uint16_t label = next_label++;
    mask.label_to_building[label] = model.building_id;
    for (const auto& face : model.faces) {
      if (face.is_roof && !opts.include_roof) continue;
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      std::vector<Eigen::Vector3d> cam_poly;
      for (const auto& v : face.vertices) {
        centroid += v;
        cam_poly.push_back(pose.rotation * (v - pose.position));
      }
      centroid /= static_cast<double>(face.vertices.size());
      cam_poly = clip_near(cam_poly);
      if (cam_poly.size() < 3) continue;
      DrawFace df;
      df.label = label;
      df.dist = (centroid - pose.position).norm();
      for (const auto& v : cam_poly)
        df.pixels.emplace_back(intr.fx * v.x() / v.z() + intr.cx, intr.fy * v.y() / v.z() + intr.cy);
      draw.push_back(std::move(df));
    }
  }
  std::stable_sort(draw.begin(), draw.end(),
                   [](const DrawFace& a, const DrawFace& b) { return a.dist > b.dist; });
  for (const auto& df : draw) {
    double min_u = 1e30, min_v = 1e30, max_u = -1e30, max_v = -1e30;
    for (const auto& p : df.pixels) {
      min_u = std::min(min_u, p.x());
      max_u = std::max(max_u, p.x());
      min_v = std::min(min_v, p.y());
      max_v = std::max(max_v, p.y());
    }
    int x0 = std::max(0, static_cast<int>(std::ceil(min_u)));
    int x1 = std::min(intr.image_width - 1, static_cast<int>(std::floor(max_u)));
    int y0 = std::max(0, static_cast<int>(std::ceil(min_v)));
    int y1 = std::min(intr.image_height - 1, static_cast<int>(std::floor(max_v)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (point_in_poly(x, y, df.pixels)) mask.labels.at(x, y) = df.label;
  }
  return mask;
}

double mask_accuracy(const FacadeMask& predicted, const FacadeMask& truth) {
  if (predicted.labels.width != truth.labels.width || predicted.labels.height != truth.labels.height)
    throw DimensionMismatch();
  long total = 0, correct = 0;
  for (size_t i = 0; i < truth.labels.data.size(); ++i) {
    std::uint16_t t = truth.labels.data[i];
    if (t == 0) continue;
    ++total;
    std::uint16_t p = predicted.labels.data[i];
    if (p == 0) continue;
    auto it_t = truth.label_to_building.find(t);
    auto it_p = predicted.label_to_building.find(p);
    if (it_t != truth.label_to_building.end() && it_p != predicted.label_to_building.end() &&
        it_t->second == it_p->second)
      ++correct;
  }
  if (total == 0) return 1.0;
  return static_cast<double>(correct) / total;
}

std::string export_obj(const std::vector<BuildingModel>& models) {
  std::ostringstream out;
  out << "# extruded building models\n";
  char buf[64];
  int base_index = 1;
  for (const auto& m : models) {
    out << "o " << m.building_id << "\n";
    size_t n = m.ring.size();
    // n base vertices then n top vertices.
    for (double z : {m.ground_elev, m.ground_elev + m.height}) {
      for (const auto& p : m.ring) {
        std::snprintf(buf, sizeof(buf), "v %.3f %.3f %.3f\n", p.x(), p.y(), z);
        out << buf;
      }
    }
    for (size_t i = 0; i < n; ++i) {
      size_t j = (i + 1) % n;
      out << "f " << base_index + i << ' ' << base_index + j << ' ' << base_index + n + j << ' '
          << base_index + n + i << "\n";
    }
    out << "f";
    for (size_t i = 0; i < n; ++i) out << ' ' << base_index + n + i;
    out << "\n";
    base_index += static_cast<int>(2 * n);
  }
  return out.str();
}

ParsedObj parse_obj(const std::string& text) {
  ParsedObj obj;
  std::vector<Eigen::Vector3d> vertices;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "o") {
      ParsedObj::Object o;
      ls >> o.name;
      obj.objects.push_back(std::move(o));
    } else if (kind == "v") {
      Eigen::Vector3d v;
      ls >> v.x() >> v.y() >> v.z();
      vertices.push_back(v);
    } else if (kind == "f") {
      if (obj.objects.empty()) obj.objects.push_back({});
      std::vector<Eigen::Vector3d> face;
      int idx;
      while (ls >> idx) face.push_back(vertices.at(idx - 1));
      obj.objects.back().faces.push_back(std::move(face));
    }
  }
  return obj;
}

void write_mask(const std::string& png_path, const std::string& json_path, const FacadeMask& mask) {
  write_png_gray16(png_path, mask.labels);
  nlohmann::json table;
  for (const auto& [label, id] : mask.label_to_building) table[std::to_string(label)] = id;
  std::ofstream f(json_path);
  f << nlohmann::json{{"labels", table}}.dump(2) << "\n";
}

FacadeMask read_mask(const std::string& png_path, const std::string& json_path) {
  FacadeMask mask;
  mask.labels = read_png_gray16(png_path);
  std::ifstream f(json_path);
  if (!f) throw std::runtime_error("cannot open " + json_path);
  nlohmann::json doc = nlohmann::json::parse(f);
  for (const auto& [key, value] : doc.at("labels").items())
    mask.label_to_building[static_cast<std::uint16_t>(std::stoi(key))] = value.get<std::string>();
  return mask;
}

}  // namespace mapfusion
