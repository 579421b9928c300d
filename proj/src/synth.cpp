#include "mapfusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace mapfusion {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 1.0) * 6.0;
  int i = static_cast<int>(h);
  double f = h - i;
  double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r, g, b;
  switch (i % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::clamp(x * 255.0, 0.0, 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

Rgb facade_color(int index, double saturation) {
  // Golden-ratio hue walk keeps neighboring buildings far apart in hue.
  double hue = std::fmod(0.13 + index * 0.61803398875, 1.0);
  double v = 0.55 + 0.25 * ((index * 7) % 5) / 4.0;
  return hsv_to_rgb(hue, saturation, v);
}

bool point_in_poly2(double px, double py, const std::vector<Eigen::Vector2d>& poly) {
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > py) != (b.y() > py)) {
      double xc = a.x() + (py - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (px < xc) inside = !inside;
    }
  }
  return inside;
}

struct ScreenFace {
  std::vector<Eigen::Vector2d> pixels;
  Eigen::Vector3d plane_point;
  Eigen::Vector3d plane_normal;
  std::uint16_t label = 0;  // 0 = unlabeled (occluder)
  Rgb color{0, 0, 0};
  double min_u, min_v, max_u, max_v;
};

constexpr double kNear = 1e-3;

// Project a world-space face; returns false when fully behind the camera.
bool project_face(const std::vector<Eigen::Vector3d>& world, const CameraIntrinsics& intr,
                  const CameraPose& pose, ScreenFace& out) {
  std::vector<Eigen::Vector3d> cam;
  for (const auto& v : world) cam.push_back(pose.rotation * (v - pose.position));
  // Sutherland-Hodgman against z = kNear.
  std::vector<Eigen::Vector3d> clipped;
  size_t n = cam.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& a = cam[i];
    const auto& b = cam[(i + 1) % n];
    bool a_in = a.z() > kNear, b_in = b.z() > kNear;
    if (a_in) clipped.push_back(a);
    if (a_in != b_in) {
      double t = (kNear - a.z()) / (b.z() - a.z());
      clipped.push_back(a + t * (b - a));
    }
  }
  if (clipped.size() < 3) return false;
  out.pixels.clear();
  out.min_u = out.min_v = 1e30;
  out.max_u = out.max_v = -1e30;
  for (const auto& v : clipped) {
    Eigen::Vector2d p(intr.fx * v.x() / v.z() + intr.cx, intr.fy * v.y() / v.z() + intr.cy);
    out.pixels.push_back(p);
    out.min_u = std::min(out.min_u, p.x());
    out.max_u = std::max(out.max_u, p.x());
    out.min_v = std::min(out.min_v, p.y());
    out.max_v = std::max(out.max_v, p.y());
  }
  out.plane_point = world[0];
  Eigen::Vector3d e1 = world[1] - world[0];
  Eigen::Vector3d e2 = world[2] - world[0];
  out.plane_normal = e1.cross(e2);
  if (out.plane_normal.norm() < 1e-12) return false;
  return true;
}

// Per-pixel nearest-face resolve over precomputed screen faces.
void zbuffer_resolve(const std::vector<ScreenFace>& faces, const CameraIntrinsics& intr,
                     const CameraPose& pose, Image<std::uint16_t>* labels, ImageRgb* color,
                     ImageF* depth_out) {
  const int W = intr.image_width, H = intr.image_height;
  ImageF depth(W, H, 1e30f);
  Eigen::Matrix3d rt = pose.rotation.transpose();
  for (const auto& f : faces) {
    int x0 = std::max(0, static_cast<int>(std::ceil(f.min_u)));
    int x1 = std::min(W - 1, static_cast<int>(std::floor(f.max_u)));
    int y0 = std::max(0, static_cast<int>(std::ceil(f.min_v)));
    int y1 = std::min(H - 1, static_cast<int>(std::floor(f.max_v)));
    double n_dot_p = f.plane_normal.dot(f.plane_point - pose.position);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!point_in_poly2(x, y, f.pixels)) continue;
        Eigen::Vector3d dir = rt * Eigen::Vector3d((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
        double denom = f.plane_normal.dot(dir);
        if (std::abs(denom) < 1e-15) continue;
        double s = n_dot_p / denom;  // camera-frame depth along the ray
        if (s <= kNear || s >= depth.at(x, y)) continue;
        depth.at(x, y) = static_cast<float>(s);
        if (labels) labels->at(x, y) = f.label;
        if (color) color->at(x, y) = f.color;
      }
    }
  }
  if (depth_out) *depth_out = std::move(depth);
}

Rgb apply_gain(Rgb c, double gain) {
  auto to8 = [&](double x) { return static_cast<std::uint8_t>(std::clamp(x * gain, 0.0, 255.0)); };
  return {to8(c[0]), to8(c[1]), to8(c[2])};
}

}  // namespace

SyntheticScene generate_scene(const SceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  for (int attempt = 0; attempt < 25; ++attempt) {
    SyntheticScene scene;
    scene.intrinsics = {500.0, 500.0, 452.5, 320.0, 905, 640};
    scene.gain = uni(spec.gain_min, spec.gain_max);
    scene.palette_saturation = spec.facade_saturation;
    scene.sky = spec.sky;
    scene.ground = spec.ground;

    std::vector<Footprint> fps;
    std::vector<double> heights;
    double cursor[2] = {6.0, 6.0};  // along-street cursor per side
    for (int i = 0; i < spec.n_buildings; ++i) {
      int side = i % 2;  // 0 = left (-x), 1 = right (+x)
      double gap = uni(spec.min_gap, spec.max_gap);
      double along = uni(spec.min_footprint, spec.max_footprint);
      double depth = uni(spec.min_footprint, spec.max_footprint);
      double y0 = cursor[side] + gap;
      double y1 = y0 + along;
      double x_in = spec.street_width / 2.0;
      double x0 = side == 0 ? -(x_in + depth) : x_in;
      double x1 = side == 0 ? -x_in : x_in + depth;
      Footprint fp;
      fp.id = "b" + std::to_string(i);
      fp.ring = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};  // CCW
      fp.ground_elev = 0.0;
      fps.push_back(std::move(fp));
      heights.push_back(uni(spec.min_height, spec.max_height));
      cursor[side] = y1;
    }

    for (int i = 0; i < spec.n_cameras; ++i) {
      CameraPose pose;
      pose.rotation = rotation_from_bearing(M_PI / 2.0);  // facing +Y, down-street
      pose.position = Eigen::Vector3d(0.0, -i * spec.camera_spacing, spec.camera_mast);
      scene.cameras.push_back(pose);
    }

    for (int i = 0; i < spec.n_occluders; ++i) {
      double side = (i % 2 == 0) ? -1.0 : 1.0;
      double x_center = side * (spec.street_width / 2.0 - uni(0.8, 2.0));
      double y = uni(8.0, std::max(cursor[0], cursor[1]));
      double w = uni(0.5, 1.4);
      double h = uni(4.0, 8.0);
      BuildingModel::Face f;
      f.vertices = {{x_center - w / 2, y, 0.0},
                    {x_center + w / 2, y, 0.0},
                    {x_center + w / 2, y, h},
                    {x_center - w / 2, y, h}};
      scene.occluders.push_back(std::move(f));
    }

    scene.map = make_scene(fps, 0.3);
    scene.true_heights = heights;

    bool ok = true;
    for (const auto& cam : scene.cameras) {
      if (static_cast<int>(visible_corners(scene.map, scene.intrinsics, cam).size()) <
          spec.min_visible_bcls) {
        ok = false;
        break;
      }
    }
    if (ok) return scene;
  }
  throw PlacementFailure();
}

RenderedView render_scene(const SyntheticScene& scene, const CameraPose& pose) {
  const CameraIntrinsics& intr = scene.intrinsics;
  const int W = intr.image_width, H = intr.image_height;
  RenderedView view;
  view.image = ImageRgb(W, H);
  view.truth_mask.labels = Image<std::uint16_t>(W, H, 0);

  // Sky above the horizon ray, ground below.
  Eigen::Matrix3d rt = pose.rotation.transpose();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      Eigen::Vector3d dir = rt * Eigen::Vector3d((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
      view.image.at(x, y) = apply_gain(dir.z() >= 0 ? scene.sky : scene.ground, scene.gain);
    }
  }

  std::vector<ScreenFace> faces;
  for (size_t i = 0; i < scene.map.footprints.size(); ++i) {
    const Footprint& fp = scene.map.footprints[i];
    BuildingModel model = extrude(fp, scene.true_heights[i]);
    std::uint16_t label = static_cast<std::uint16_t>(i + 1);
    view.truth_mask.label_to_building[label] = fp.id;
    Rgb base = facade_color(static_cast<int>(i), scene.palette_saturation);
    for (const auto& face : model.faces) {
      ScreenFace sf;
      if (!project_face(face.vertices, intr, pose, sf)) continue;
      sf.label = label;
      // Lambertian-ish shading off a fixed sun direction so every wall
      // orientation gets a distinct brightness and corner edges stay visible.
      static const Eigen::Vector3d sun = Eigen::Vector3d(0.44, -0.90, 0.0).normalized();
      Eigen::Vector3d n =
          (face.vertices[1] - face.vertices[0]).cross(face.vertices[2] - face.vertices[0]).normalized();
      double shade = 0.6 + 0.2 * (1.0 + n.dot(sun));
      Rgb c = {static_cast<std::uint8_t>(base[0] * shade), static_cast<std::uint8_t>(base[1] * shade),
               static_cast<std::uint8_t>(base[2] * shade)};
      sf.color = apply_gain(c, scene.gain);
      faces.push_back(std::move(sf));
    }
  }
  Rgb tree{40, 70, 35};
  for (const auto& occ : scene.occluders) {
    ScreenFace sf;
    if (!project_face(occ.vertices, intr, pose, sf)) continue;
    sf.label = 0;
    sf.color = apply_gain(tree, scene.gain);
    faces.push_back(std::move(sf));
  }
  zbuffer_resolve(faces, intr, pose, &view.truth_mask.labels, &view.image, nullptr);
  return view;
}

FacadeMask zbuffer_masks(const std::vector<BuildingModel>& models, const CameraIntrinsics& intr,
                         const CameraPose& pose, bool include_roof) {
  FacadeMask mask;
  mask.labels = Image<std::uint16_t>(intr.image_width, intr.image_height, 0);
  std::vector<ScreenFace> faces;
  std::uint16_t next = 1;
  for (const auto& m : models) {
    std::uint16_t label = next++;
    mask.label_to_building[label] = m.building_id;
    for (const auto& face : m.faces) {
      if (face.is_roof && !include_roof) continue;
      ScreenFace sf;
      if (!project_face(face.vertices, intr, pose, sf)) continue;
      sf.label = label;
      faces.push_back(std::move(sf));
    }
  }
  zbuffer_resolve(faces, intr, pose, &mask.labels, nullptr, nullptr);
  return mask;
}

CameraPose perturb_position(const CameraPose& pose, double radius_m, std::uint64_t seed) {
  CameraPose out = pose;
  if (radius_m <= 0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-radius_m, radius_m);
  double dx, dy;
  do {
    dx = d(rng);
    dy = d(rng);
  } while (dx * dx + dy * dy > radius_m * radius_m);
  out.position.x() += dx;
  out.position.y() += dy;
  return out;
}

std::string camera_json(const std::string& image_name, const CameraIntrinsics& intr,
                        const CameraPose& pose) {
  json j;
  j["image"] = image_name;
  j["x_m"] = pose.position.x();
  j["y_m"] = pose.position.y();
  j["z_m"] = pose.position.z();
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  j["rotation"] = rot;
  j["fx"] = intr.fx;
  j["fy"] = intr.fy;
  j["cx"] = intr.cx;
  j["cy"] = intr.cy;
  j["width"] = intr.image_width;
  j["height"] = intr.image_height;
  return j.dump(2);
}

void parse_camera_json(const std::string& text, std::string& image_name, CameraIntrinsics& intr,
                       CameraPose& pose) {
  json j = json::parse(text);
  image_name = j.at("image").get<std::string>();
  pose.position = Eigen::Vector3d(j.at("x_m").get<double>(), j.at("y_m").get<double>(),
                                  j.at("z_m").get<double>());
  auto rot = j.at("rotation").get<std::vector<double>>();
  if (rot.size() != 9) throw ParseError("rotation must have 9 entries");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[r * 3 + c];
  if (!pose.rotation_valid(1e-6)) throw ParseError("rotation not orthonormal");
  intr.fx = j.at("fx").get<double>();
  intr.fy = j.at("fy").get<double>();
  intr.cx = j.at("cx").get<double>();
  intr.cy = j.at("cy").get<double>();
  intr.image_width = j.value("width", 0);
  intr.image_height = j.value("height", 0);
}

void write_dataset(const std::string& dir, const SyntheticScene& scene,
                   const std::vector<CameraPose>& initial_poses) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "cameras");
  fs::create_directories(fs::path(dir) / "truth_masks");
  {
    std::ofstream f(fs::path(dir) / "map.geojson");
    f << footprints_to_geojson(scene.map.footprints);
  }
  {
    std::ofstream f(fs::path(dir) / "truth_heights.csv");
    f << "building_id,height_m\n";
    for (size_t i = 0; i < scene.map.footprints.size(); ++i)
      f << scene.map.footprints[i].id << "," << scene.true_heights[i] << "\n";
  }
  std::ofstream tp(fs::path(dir) / "truth_positions.csv");
  tp << "image,x_m,y_m\n";
  for (size_t i = 0; i < scene.cameras.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04zu", i);
    RenderedView view = render_scene(scene, scene.cameras[i]);
    write_png_rgb((fs::path(dir) / "images" / (std::string(name) + ".png")).string(), view.image);
    write_mask((fs::path(dir) / "truth_masks" / (std::string(name) + ".png")).string(),
               (fs::path(dir) / "truth_masks" / (std::string(name) + ".json")).string(),
               view.truth_mask);
    const CameraPose& init = i < initial_poses.size() ? initial_poses[i] : scene.cameras[i];
    std::ofstream cf(fs::path(dir) / "cameras" / (std::string(name) + ".json"));
    cf << camera_json(std::string(name) + ".png", scene.intrinsics, init) << "\n";
    tp << name << "," << scene.cameras[i].position.x() << "," << scene.cameras[i].position.y() << "\n";
  }
}

}  // namespace mapfusion
