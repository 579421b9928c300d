#include "mapfusion/footprints.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mapfusion {

using json = nlohmann::json;

double Footprint::signed_area() const {
  double s = 0;
  size_t n = ring.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

bool Footprint::contains(const Eigen::Vector2d& pt) const {
  // Even-odd crossing count.
  bool inside = false;
  size_t n = ring.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a.y() > pt.y()) != (b.y() > pt.y())) {
      double x_cross = a.x() + (pt.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (pt.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

std::vector<Eigen::Vector2d> clean_ring(std::vector<Eigen::Vector2d> ring, const std::string& id) {
  // Drop the repeated closing vertex and consecutive duplicates.
  while (ring.size() > 1 && (ring.front() - ring.back()).norm() < 1e-9) ring.pop_back();
  std::vector<Eigen::Vector2d> out;
  for (const auto& v : ring) {
    if (out.empty() || (out.back() - v).norm() >= 1e-9) out.push_back(v);
  }
  if (out.size() < 3) throw DegenerateRing(id);
  return out;
}

Footprint finish_footprint(std::string id, std::vector<Eigen::Vector2d> ring, double elev) {
  Footprint fp;
  fp.id = std::move(id);
  fp.ring = clean_ring(std::move(ring), fp.id);
  fp.ground_elev = elev;
  if (fp.signed_area() < 0) std::reverse(fp.ring.begin(), fp.ring.end());
  return fp;
}

}  // namespace

std::vector<Footprint> load_geojson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  if (doc.value("type", "") != "FeatureCollection") throw ParseError("expected FeatureCollection");
  if (!doc.contains("features") || !doc["features"].is_array()) throw ParseError("missing features");
  std::vector<Footprint> out;
  int idx = 0;
  for (const auto& feat : doc["features"]) {
    const auto& geom = feat.value("geometry", json::object());
    if (geom.value("type", "") != "Polygon") throw ParseError("only Polygon geometry supported");
    const auto& coords = geom.value("coordinates", json::array());
    if (coords.empty() || !coords[0].is_array()) throw ParseError("polygon without rings");
    std::vector<Eigen::Vector2d> ring;
    for (const auto& c : coords[0]) {
      if (!c.is_array() || c.size() < 2) throw ParseError("bad coordinate");
      ring.emplace_back(c[0].get<double>(), c[1].get<double>());
    }
    const auto& props = feat.value("properties", json::object());
    std::string id;
    if (props.contains("id")) {
      id = props["id"].is_string() ? props["id"].get<std::string>() : props["id"].dump();
    } else {
      id = "fp_" + std::to_string(idx);
    }
    double elev = props.value("ground_elev_m", 0.0);
    out.push_back(finish_footprint(std::move(id), std::move(ring), elev));
    ++idx;
  }
  return out;
}

std::vector<Footprint> load_geojson_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_geojson(ss.str());
}

std::string footprints_to_geojson(const std::vector<Footprint>& fps) {
  json features = json::array();
  for (const auto& fp : fps) {
    json ring = json::array();
    for (const auto& v : fp.ring) ring.push_back({v.x(), v.y()});
    ring.push_back({fp.ring.front().x(), fp.ring.front().y()});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"id", fp.id}, {"ground_elev_m", fp.ground_elev}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(2);
}

namespace {

std::string xml_attr(const std::string& tag, const std::string& name) {
  auto pos = tag.find(name + "=\"");
  if (pos == std::string::npos) return {};
  pos += name.size() + 2;
  auto end = tag.find('"', pos);
  return tag.substr(pos, end - pos);
}

}  // namespace

std::vector<Footprint> load_osm_xml(const std::string& text, std::vector<std::string>* warnings) {
  struct Node {
    double lat, lon;
  };
  std::map<std::string, Node> nodes;
  size_t pos = 0;
  auto warn = [&](const std::string& m) {
    if (warnings) warnings->push_back(m);
  };
  // First pass: nodes.
  while ((pos = text.find("<node", pos)) != std::string::npos) {
    auto end = text.find('>', pos);
    std::string tag = text.substr(pos, end - pos);
    nodes[xml_attr(tag, "id")] = {std::stod(xml_attr(tag, "lat")), std::stod(xml_attr(tag, "lon"))};
    pos = end;
  }
  if (text.find("<relation") != std::string::npos)
    warn("relations/multipolygons are not supported and were skipped");

  struct RawWay {
    std::string id;
    std::vector<std::string> refs;
    bool building = false;
  };
  std::vector<RawWay> ways;
  pos = 0;
  while ((pos = text.find("<way", pos)) != std::string::npos) {
    auto close = text.find("</way>", pos);
    if (close == std::string::npos) break;
    std::string body = text.substr(pos, close - pos);
    RawWay w;
    w.id = xml_attr(body.substr(0, body.find('>')), "id");
    size_t p = 0;
    while ((p = body.find("<nd", p)) != std::string::npos) {
      auto e = body.find('>', p);
      w.refs.push_back(xml_attr(body.substr(p, e - p), "ref"));
      p = e;
    }
    p = 0;
    while ((p = body.find("<tag", p)) != std::string::npos) {
      auto e = body.find('>', p);
      std::string tag = body.substr(p, e - p);
      if (xml_attr(tag, "k") == "building") w.building = true;
      p = e;
    }
    ways.push_back(std::move(w));
    pos = close;
  }

  // Local equirectangular plane anchored at the centroid of referenced nodes.
  double lat0 = 0, lon0 = 0;
  int count = 0;
  for (const auto& w : ways) {
    if (!w.building) continue;
    for (const auto& r : w.refs) {
      auto it = nodes.find(r);
      if (it != nodes.end()) {
        lat0 += it->second.lat;
        lon0 += it->second.lon;
        ++count;
      }
    }
  }
  if (count > 0) {
    lat0 /= count;
    lon0 /= count;
  }
  const double m_per_deg_lat = 110540.0;
  const double m_per_deg_lon = 111320.0 * std::cos(lat0 * M_PI / 180.0);

  std::vector<Footprint> out;
  for (const auto& w : ways) {
    if (!w.building) continue;
    if (w.refs.size() < 4 || w.refs.front() != w.refs.back()) {
      warn("way " + w.id + " is not a closed building way, skipped");
      continue;
    }
    std::vector<Eigen::Vector2d> ring;
    bool ok = true;
    for (size_t i = 0; i + 1 < w.refs.size(); ++i) {
      auto it = nodes.find(w.refs[i]);
      if (it == nodes.end()) {
        warn("way " + w.id + " references missing node " + w.refs[i]);
        ok = false;
        break;
      }
      ring.emplace_back((it->second.lon - lon0) * m_per_deg_lon, (it->second.lat - lat0) * m_per_deg_lat);
    }
    if (ok) out.push_back(finish_footprint("osm_" + w.id, std::move(ring), 0.0));
  }
  return out;
}

MapRaster rasterize_map(const std::vector<Footprint>& footprints, double resolution) {
  if (footprints.empty()) throw std::invalid_argument("no footprints to rasterize");
  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  for (const auto& fp : footprints)
    for (const auto& v : fp.ring) {
      min_x = std::min(min_x, v.x());
      max_x = std::max(max_x, v.x());
      min_y = std::min(min_y, v.y());
      max_y = std::max(max_y, v.y());
    }
  const double pad = resolution;
  MapRaster r;
  r.resolution = resolution;
  r.origin_x = min_x - pad;
  r.origin_y = max_y + pad;
  int cols = static_cast<int>(std::ceil((max_x + pad - r.origin_x) / resolution));
  int rows = static_cast<int>(std::ceil((r.origin_y - (min_y - pad)) / resolution));
  r.occupancy = ImageU8(cols, rows, 0);
  for (const auto& fp : footprints) {
    double fminx = 1e30, fminy = 1e30, fmaxx = -1e30, fmaxy = -1e30;
    for (const auto& v : fp.ring) {
      fminx = std::min(fminx, v.x());
      fmaxx = std::max(fmaxx, v.x());
      fminy = std::min(fminy, v.y());
      fmaxy = std::max(fmaxy, v.y());
    }
    int c0 = std::max(0, static_cast<int>((fminx - r.origin_x) / resolution) - 1);
    int c1 = std::min(cols - 1, static_cast<int>((fmaxx - r.origin_x) / resolution) + 1);
    int r0 = std::max(0, static_cast<int>((r.origin_y - fmaxy) / resolution) - 1);
    int r1 = std::min(rows - 1, static_cast<int>((r.origin_y - fminy) / resolution) + 1);
    for (int row = r0; row <= r1; ++row)
      for (int col = c0; col <= c1; ++col)
        if (fp.contains(r.cell_center(col, row))) r.occupancy.at(col, row) = 1;
  }
  return r;
}

MapScene make_scene(std::vector<Footprint> footprints, double resolution) {
  MapScene s;
  s.raster = rasterize_map(footprints, resolution);
  s.footprints = std::move(footprints);
  return s;
}

namespace {

// Proper crossing test between open segments, with endpoint tolerance.
bool segments_cross(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2, const Eigen::Vector2d& q1,
                    const Eigen::Vector2d& q2) {
  auto cross = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() * b.y() - a.y() * b.x();
  };
  Eigen::Vector2d r = p2 - p1, s = q2 - q1;
  double denom = cross(r, s);
  if (std::abs(denom) < 1e-15) return false;
  double t = cross(q1 - p1, s) / denom;
  double u = cross(q1 - p1, r) / denom;
  const double eps = 1e-9;
  return t > eps && t < 1.0 - eps && u > -eps && u < 1.0 + eps;
}

bool ray_blocked(const Eigen::Vector2d& cam, const Eigen::Vector2d& sample, const MapScene& scene,
                 size_t own_index) {
  // Shrink toward the camera so a sample on an adjacent boundary does not
  // self-block.
  Eigen::Vector2d tgt = cam + (sample - cam) * (1.0 - 1e-6);
  for (size_t i = 0; i < scene.footprints.size(); ++i) {
    if (i == own_index) continue;
    const auto& fp = scene.footprints[i];
    size_t n = fp.ring.size();
    for (size_t j = 0; j < n; ++j) {
      if (segments_cross(cam, tgt, fp.ring[j], fp.ring[(j + 1) % n])) return true;
    }
    if (fp.contains(cam) || fp.contains(tgt)) return true;
  }
  return false;
}

}  // namespace

std::vector<VisibleEdge> visible_edges(const MapScene& scene, const CameraIntrinsics& intr,
                                       const CameraPose& pose, double max_range) {
  FovWedge wedge = field_of_view_wedge(intr, pose, max_range);
  Eigen::Vector2d cam(pose.position.x(), pose.position.y());
  std::vector<VisibleEdge> out;
  for (size_t fi = 0; fi < scene.footprints.size(); ++fi) {
    const auto& fp = scene.footprints[fi];
    size_t n = fp.ring.size();
    for (size_t ei = 0; ei < n; ++ei) {
      const Eigen::Vector2d a = fp.ring[ei];
      const Eigen::Vector2d b = fp.ring[(ei + 1) % n];
      Eigen::Vector2d d = b - a;
      double len = d.norm();
      if (len < 1e-9) continue;
      Eigen::Vector2d outward(d.y() / len, -d.x() / len);  // CCW ring
      int n_samples = std::max(2, static_cast<int>(std::ceil(len / 1.0)) + 1);
      std::vector<char> vis(n_samples, 0);
      std::vector<Eigen::Vector2d> pts(n_samples);
      for (int i = 0; i < n_samples; ++i) {
        double t = static_cast<double>(i) / (n_samples - 1);
        Eigen::Vector2d s = a + t * d;
        pts[i] = s;
        Eigen::Vector2d view = s - cam;
        if (view.norm() > max_range) continue;
        if (outward.dot(view) >= 0) continue;  // back-facing
        if (!wedge.contains(s)) continue;
        if (ray_blocked(cam, s, scene, fi)) continue;
        vis[i] = 1;
      }
      int i = 0;
      while (i < n_samples) {
        if (!vis[i]) {
          ++i;
          continue;
        }
        int j = i;
        while (j + 1 < n_samples && vis[j + 1]) ++j;
        if (j > i) {
          VisibleEdge ve;
          ve.building_id = fp.id;
          ve.edge_index = static_cast<int>(ei);
          ve.a = pts[i];
          ve.b = pts[j];
          double dmin = 1e30;
          for (int k = i; k <= j; ++k) dmin = std::min(dmin, (pts[k] - cam).norm());
          ve.distance_to_camera = dmin;
          out.push_back(std::move(ve));
        }
        i = j + 1;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const VisibleEdge& x, const VisibleEdge& y) {
    if (x.building_id != y.building_id) return x.building_id < y.building_id;
    return x.edge_index < y.edge_index;
  });
  return out;
}

std::vector<CornerPoint> visible_corners(const MapScene& scene, const CameraIntrinsics& intr,
                                         const CameraPose& pose, double max_range) {
  auto edges = visible_edges(scene, intr, pose, max_range);
  std::map<std::string, const Footprint*> by_id;
  for (const auto& fp : scene.footprints) by_id[fp.id] = &fp;
  std::set<std::pair<std::string, int>> seen;
  std::vector<CornerPoint> out;
  for (const auto& e : edges) {
    const Footprint* fp = by_id.at(e.building_id);
    size_t n = fp->ring.size();
    for (const Eigen::Vector2d& endpoint : {e.a, e.b}) {
      for (int vi : {e.edge_index, static_cast<int>((e.edge_index + 1) % n)}) {
        if ((fp->ring[vi] - endpoint).norm() < 1e-9 && seen.emplace(e.building_id, vi).second) {
          out.push_back({e.building_id, vi, fp->ring[vi], fp->ground_elev});
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const CornerPoint& x, const CornerPoint& y) {
    if (x.building_id != y.building_id) return x.building_id < y.building_id;
    return x.vertex_index < y.vertex_index;
  });
  return out;
}

}  // namespace mapfusion
