// End-to-end acceptance gate: ten system-level checks, one PASS/FAIL line
// each. Thresholds here are contractual -- do not loosen them to make a run
// green; a red line means the library regressed.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mapfusion/features.hpp"
#include "mapfusion/heights.hpp"
#include "mapfusion/pipeline.hpp"
#include "mapfusion/synth.hpp"

using namespace mapfusion;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* tag, bool ok, const std::string& detail) {
  std::printf("[%s] %s — %s\n", tag, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

CameraIntrinsics standard_intr() {
  CameraIntrinsics intr;
  intr.fx = 500;
  intr.fy = 500;
  intr.cx = 452.5;
  intr.cy = 320;
  intr.image_width = 905;
  intr.image_height = 640;
  return intr;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool trees_identical(const fs::path& a, const fs::path& b, std::string* why) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  std::sort(rel.begin(), rel.end());
  std::vector<fs::path> rel_b;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  std::sort(rel_b.begin(), rel_b.end());
  if (rel != rel_b) {
    *why = "file lists differ";
    return false;
  }
  for (const auto& r : rel) {
    std::ifstream fa(a / r, std::ios::binary), fb(b / r, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str()) {
      *why = "content differs: " + r.string();
      return false;
    }
  }
  return true;
}

// A building's roofline counts as unobstructed in a view when removing all
// other buildings leaves its visible runs untouched.
bool roofline_unobstructed(const SyntheticScene& scene, size_t building, size_t cam) {
  auto length_of = [](const std::vector<VisibleEdge>& runs, const std::string& id) {
    double len = 0;
    for (const auto& r : runs)
      if (r.building_id == id) len += (r.b - r.a).norm();
    return len;
  };
  const std::string& id = scene.map.footprints[building].id;
  auto full = visible_edges(scene.map, scene.intrinsics, scene.cameras[cam], 60.0);
  MapScene solo;
  solo.footprints.push_back(scene.map.footprints[building]);
  auto alone = visible_edges(solo, scene.intrinsics, scene.cameras[cam], 60.0);
  double l_full = length_of(full, id), l_alone = length_of(alone, id);
  return l_alone > 0 && l_full > l_alone - 1e-6;
}

}  // namespace

TEST_CASE("A1: projection and back-projection close to machine precision") {
  auto t0 = Clock::now();
  CameraIntrinsics intr = standard_intr();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 10000;
  int done = 0;
  double worst_line = 0, worst_isect = 0;
  while (done < n) {
    CameraPose pose;
    pose.rotation = rotation_from_bearing(u(rng) * M_PI);
    pose.position = Eigen::Vector3d(u(rng) * 100, u(rng) * 100, 3 + u(rng) * 2);
    Eigen::Vector3d fwd = pose.rotation.transpose() * Eigen::Vector3d(0, 0, 1);
    auto sample_point = [&] {
      double d = 5 + 75 * std::abs(u(rng));
      return WorldPoint(pose.position + fwd * d +
                        Eigen::Vector3d(u(rng) * 0.5 * d * fwd.y(), -u(rng) * 0.5 * d * fwd.x(),
                                        u(rng) * 15 + 12));
    };
    try {
      WorldPoint p1 = sample_point(), p2 = sample_point();
      Projection a = project_point(p1, intr, pose);
      Projection b = project_point(p2, intr, pose);
      PositionLine2D la = backproject_line(a.pixel, intr, pose.rotation, p1);
      PositionLine2D lb = backproject_line(b.pixel, intr, pose.rotation, p2);
      Eigen::Vector2d cam2(pose.position.x(), pose.position.y());
      Eigen::Vector2d rel = cam2 - la.anchor;
      double dist = std::abs(la.direction.x() * rel.y() - la.direction.y() * rel.x());
      double isect = (intersect_lines(la, lb) - cam2).norm();
      worst_line = std::max(worst_line, dist);
      worst_isect = std::max(worst_isect, isect);
      ++done;
    } catch (const std::exception&) {
      continue;  // behind camera / parallel pair: resample
    }
  }
  double dt = seconds_since(t0);
  bool ok = worst_line < 1e-9 && worst_isect < 1e-9 && dt < 5.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%d round trips, max line dist %.2e m, max intersection err %.2e m, %.2f s", n,
                worst_line, worst_isect, dt);
  report("A1", ok, buf);
  CHECK(ok);
}

TEST_CASE("A2: integral histograms match naive counting exactly") {
  auto t0 = Clock::now();
  SpectralHistogramConfig cfg;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> byte(0, 255);
  long windows = 0, exact = 0;
  for (int img_i = 0; img_i < 10; ++img_i) {
    ImageRgb img(905, 640);
    for (auto& px : img.data) px = {static_cast<std::uint8_t>(byte(rng)),
                                    static_cast<std::uint8_t>(byte(rng)),
                                    static_cast<std::uint8_t>(byte(rng))};
    BinnedBands bands = bin_bands(img, cfg);
    IntegralHistograms integral(bands);
    std::uniform_int_distribution<int> xd(0, 904), yd(0, 639);
    for (int w = 0; w < 100; ++w) {
      int x0 = xd(rng), x1 = xd(rng), y0 = yd(rng), y1 = yd(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      // Cap the naive side so the oracle itself stays fast; a handful of
      // full-frame windows still goes through uncapped.
      if (w > 3) {
        x1 = std::min(x1, x0 + 199);
        y1 = std::min(y1, y0 + 199);
      }
      std::vector<std::uint32_t> got = integral.query(x0, y0, x1, y1);
      std::vector<std::uint32_t> want(got.size(), 0);
      for (int b = 0; b < static_cast<int>(bands.bands.size()); ++b)
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) ++want[b * bands.bins + bands.bands[b].at(x, y)];
      ++windows;
      exact += got == want;
    }
  }
  double dt = seconds_since(t0);
  bool ok = exact == windows && dt < 30.0;
  char buf[120];
  std::snprintf(buf, sizeof buf, "%ld/%ld windows integer-exact over 10 images, %.1f s", exact,
                windows, dt);
  report("A2", ok, buf);
  CHECK(ok);
}

TEST_CASE("A3: edgeness localizes two-tone boundaries within a pixel") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> byte(0, 255);
  SpectralHistogramConfig cfg;
  long rows = 0, good = 0;
  for (int i = 0; i < 100; ++i) {
    int W = 120 + static_cast<int>(rng() % 120), H = 80 + static_cast<int>(rng() % 80);
    int margin = cfg.window;
    int split = margin + 10 + static_cast<int>(rng() % (W - 2 * margin - 20));
    // Chromatic boundary: every channel steps by at least 20, as at real
    // facade/sky transitions. Single-channel steps leave the score to the
    // band-pass terms alone, whose twin-lobed response has no sub-3-px peak.
    Rgb left, right;
    do {
      left = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
              static_cast<std::uint8_t>(byte(rng))};
      right = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
               static_cast<std::uint8_t>(byte(rng))};
    } while (std::abs(left[0] - right[0]) < 20 || std::abs(left[1] - right[1]) < 20 ||
             std::abs(left[2] - right[2]) < 20);
    ImageRgb img(W, H);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) img.at(x, y) = x < split ? left : right;
    EdgenessField field = edgeness_field(img, cfg);
    for (int y = field.margin; y <= H - 1 - field.margin; ++y) {
      int best_x = field.margin;
      float best = -1;
      for (int x = field.margin; x <= W - 1 - field.margin; ++x)
        if (field.scores.at(x, y) > best) {
          best = field.scores.at(x, y);
          best_x = x;
        }
      ++rows;
      good += std::abs(best_x - split) <= 1;
    }
  }
  double frac = static_cast<double>(good) / rows;
  bool ok = frac >= 0.99;
  char buf[120];
  std::snprintf(buf, sizeof buf, "argmax within 1 px on %ld/%ld scan lines (%.2f%%)", good, rows,
                100 * frac);
  report("A3", ok, buf);
  CHECK(ok);
}

TEST_CASE("A4: painter and z-buffer agree on random prism scenes") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  CameraIntrinsics intr = standard_intr();
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BuildingModel> models;
    int n = 3 + trial % 4;
    std::vector<std::array<double, 4>> boxes;  // x0 y0 x1 y1, padded
    for (int i = 0; i < n; ++i) {
      double cx, cy, half;
      // Painter ordering is only defined for disjoint prisms: resample until
      // the footprint clears every previous one by a margin.
      for (;;) {
        cx = u(rng) * 18;
        cy = 14 + 9 * i + u(rng) * 3;
        half = 3 + 2 * std::abs(u(rng));
        bool clear = true;
        for (const auto& b : boxes)
          clear = clear && (cx + half < b[0] || cx - half > b[2] || cy + half < b[1] ||
                            cy - half > b[3]);
        if (clear) break;
      }
      boxes.push_back({cx - half - 0.5, cy - half - 0.5, cx + half + 0.5, cy + half + 0.5});
      Footprint fp;
      fp.id = "m" + std::to_string(i);
      fp.ring = {{cx - half, cy - half}, {cx + half, cy - half}, {cx + half, cy + half},
                 {cx - half, cy + half}};
      models.push_back(extrude(fp, 8 + 6 * std::abs(u(rng))));
    }
    CameraPose pose;
    pose.rotation = rotation_from_bearing(M_PI / 2);
    pose.position = Eigen::Vector3d(u(rng) * 2, u(rng) * 2, 2.5);
    FacadeMask painter = render_masks(models, intr, pose);
    FacadeMask zbuf = zbuffer_masks(models, intr, pose);
    long mismatch = 0;
    for (size_t i = 0; i < painter.labels.data.size(); ++i) {
      std::uint16_t p = painter.labels.data[i], z = zbuf.labels.data[i];
      std::string pb = p ? painter.label_to_building.at(p) : "";
      std::string zb = z ? zbuf.label_to_building.at(z) : "";
      mismatch += pb != zb;
    }
    worst = std::max(worst, static_cast<double>(mismatch) / painter.labels.data.size());
  }
  bool ok = worst < 0.001;
  char buf[120];
  std::snprintf(buf, sizeof buf, "20 scenes, worst label disagreement %.4f%%", 100 * worst);
  report("A4", ok, buf);
  CHECK(ok);
}

// A5 and A6 share one 50-scene sweep; results are cached between the two
// cases via file-local state filled by A5.
namespace {
int g_loc_total = 0, g_loc_good = 0;
int g_h_eligible = 0, g_h_eligible_good = 0, g_h_all = 0;
int g_h_within[3] = {0, 0, 0};  // 2 m / 3 m / 4 m
double g_sweep_seconds = 0;
bool g_sweep_done = false;

void run_easy_sweep() {
  if (g_sweep_done) return;
  auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.n_cameras = 2;
    SyntheticScene scene = generate_scene(spec);
    std::vector<HeightVoteArray> votes;
    for (const auto& fp : scene.map.footprints) votes.emplace_back(fp.id, HeightScanConfig{});
    for (size_t c = 0; c < scene.cameras.size(); ++c) {
      RenderedView view = render_scene(scene, scene.cameras[c]);
      EdgenessField field = edgeness_field(view.image);
      // Localization leg: 5 m disc noise, refinement on.
      CameraPose init = perturb_position(scene.cameras[c], 5.0, 7000 + seed * 10 + c);
      JointResult jr =
          joint_localize_estimate(view.image, field, scene.map, scene.intrinsics, init,
                                  JointConfig{}, true);
      Eigen::Vector2d truth(scene.cameras[c].position.x(), scene.cameras[c].position.y());
      ++g_loc_total;
      g_loc_good += (jr.refined_position - truth).norm() < 0.45;
      // Height leg: true pose, no refinement, cross-view vote.
      JointResult hr =
          joint_localize_estimate(view.image, field, scene.map, scene.intrinsics,
                                  scene.cameras[c], JointConfig{}, false);
      for (const auto& br : hr.buildings) {
        if (br.no_visible_edges) continue;
        for (auto& va : votes)
          if (va.building_id == br.building_id) va.accumulate(br.estimate);
      }
    }
    for (size_t i = 0; i < scene.map.footprints.size(); ++i) {
      std::optional<double> h = votes[i].finalize();
      double err = h ? std::abs(*h - scene.true_heights[i]) : 1e9;
      ++g_h_all;
      for (int t = 0; t < 3; ++t) g_h_within[t] += err <= 2.0 + t;
      bool clear = false;
      for (size_t c = 0; c < scene.cameras.size(); ++c)
        clear = clear || roofline_unobstructed(scene, i, c);
      if (!clear) continue;
      ++g_h_eligible;
      g_h_eligible_good += err <= 0.4;
    }
  }
  g_sweep_seconds = seconds_since(t0);
  g_sweep_done = true;
}
}  // namespace

TEST_CASE("A5: localization recovery under 5 m position noise") {
  run_easy_sweep();
  // Constructed region-free images must fall back to the initial pose.
  SceneSpec spec;
  spec.seed = 1;
  SyntheticScene scene = generate_scene(spec);
  int fallback_good = 0;
  const int fallback_cases = 4;
  for (int i = 0; i < fallback_cases; ++i) {
    ImageRgb flat(905, 640, {static_cast<std::uint8_t>(60 + 40 * i),
                             static_cast<std::uint8_t>(80 + 30 * i), 120});
    EdgenessField field = edgeness_field(flat);
    CameraPose init = perturb_position(scene.cameras[0], 5.0, 900 + i);
    JointResult jr = joint_localize_estimate(flat, field, scene.map, scene.intrinsics, init,
                                             JointConfig{}, true);
    Eigen::Vector2d init2(init.position.x(), init.position.y());
    fallback_good += !jr.used_refinement && (jr.refined_position - init2).norm() == 0.0;
  }
  double frac = static_cast<double>(g_loc_good) / g_loc_total;
  bool ok = frac >= 0.90 && fallback_good == fallback_cases && g_sweep_seconds < 300.0;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "refined within 0.45 m on %d/%d images (%.1f%%); fallback %d/%d; sweep %.0f s",
                g_loc_good, g_loc_total, 100 * frac, fallback_good, fallback_cases,
                g_sweep_seconds);
  report("A5", ok, buf);
  CHECK(ok);
}

TEST_CASE("A6: height recovery on the same 50 scenes") {
  run_easy_sweep();
  double frac = g_h_eligible ? static_cast<double>(g_h_eligible_good) / g_h_eligible : 0;
  double at2 = static_cast<double>(g_h_within[0]) / g_h_all;
  double at3 = static_cast<double>(g_h_within[1]) / g_h_all;
  double at4 = static_cast<double>(g_h_within[2]) / g_h_all;
  bool ok = frac >= 0.95 && at2 >= 0.99;
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "within 0.4 m on %d/%d clear-roofline buildings (%.1f%%); all buildings "
                "within 2/3/4 m: %.1f%% / %.1f%% / %.1f%%",
                g_h_eligible_good, g_h_eligible, 100 * frac, 100 * at2, 100 * at3, 100 * at4);
  report("A6", ok, buf);
  CHECK(ok);
}

TEST_CASE("A7: refinement beats no-refinement on hard scenes") {
  double h2_ref = 0, h2_raw = 0, mask_ref = 0, mask_raw = 0;
  int n_b = 0, n_img = 0;
  for (std::uint64_t seed = 201; seed <= 206; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.n_cameras = 2;
    spec.facade_saturation = 0.45;
    spec.n_occluders = 6;
    spec.gain_min = 0.75;
    spec.gain_max = 1.25;
    SyntheticScene scene = generate_scene(spec);
    std::vector<CameraPose> init;
    for (size_t c = 0; c < scene.cameras.size(); ++c)
      init.push_back(perturb_position(scene.cameras[c], 5.0, 5000 + seed * 10 + c));
    TempDir ds("mapfusion_a7_ds");
    write_dataset(ds.path.string(), scene, init);
    PipelineConfig cfg;
    cfg.threads = 4;
    TempDir oa("mapfusion_a7_ref"), ob("mapfusion_a7_raw");
    run_pipeline(ds.path.string(), oa.path.string(), cfg, true);
    run_pipeline(ds.path.string(), ob.path.string(), cfg, false);
    std::string truth_csv = (ds.path / "truth_heights.csv").string();
    HeightEvaluation ha = evaluate_heights((oa.path / "heights.csv").string(), truth_csv);
    HeightEvaluation hb = evaluate_heights((ob.path / "heights.csv").string(), truth_csv);
    h2_ref += ha.accuracy_per_tolerance.at(2.0) * ha.n_buildings;
    h2_raw += hb.accuracy_per_tolerance.at(2.0) * hb.n_buildings;
    n_b += ha.n_buildings;
    MaskEvaluation ma =
        evaluate_masks((oa.path / "masks").string(), (ds.path / "truth_masks").string());
    MaskEvaluation mb =
        evaluate_masks((ob.path / "masks").string(), (ds.path / "truth_masks").string());
    mask_ref += ma.mean_accuracy * ma.n_images;
    mask_raw += mb.mean_accuracy * mb.n_images;
    n_img += ma.n_images;
  }
  h2_ref /= n_b;
  h2_raw /= n_b;
  mask_ref /= n_img;
  mask_raw /= n_img;
  bool ok = h2_ref >= h2_raw + 0.05 && mask_ref >= mask_raw + 0.05;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "height@2m %.1f%% vs %.1f%% no-refine; mean mask %.1f%% vs %.1f%% (n=%d images)",
                100 * h2_ref, 100 * h2_raw, 100 * mask_ref, 100 * mask_raw, n_img);
  report("A7", ok, buf);
  CHECK(ok);
}

TEST_CASE("A8: truncated rooflines are rejected and cast no votes") {
  CameraIntrinsics intr = standard_intr();
  CameraPose pose;
  pose.rotation = rotation_from_bearing(M_PI / 2);
  pose.position = Eigen::Vector3d(0, 0, 2.5);
  int rejected = 0, zero_votes = 0;
  const int cases = 20;
  for (int i = 0; i < cases; ++i) {
    double d = 10 + (i % 5) * 2.5;
    double halfw = 15 + (i % 4) * 3;
    double h = 50 + i * 2;  // roofline far above the frame at these depths
    SyntheticScene scene;
    scene.intrinsics = intr;
    Footprint fp;
    fp.id = "tall";
    fp.ring = {{-halfw, d}, {halfw, d}, {halfw, d + 10}, {-halfw, d + 10}};
    scene.map.footprints.push_back(fp);
    scene.true_heights.push_back(h);
    scene.cameras.push_back(pose);
    scene.palette_saturation = 0.4 + 0.03 * (i % 10);
    RenderedView view = render_scene(scene, pose);
    EdgenessField field = edgeness_field(view.image);
    auto edges = visible_edges(scene.map, intr, pose, 60.0);
    HeightEstimate est = estimate_height_single(edges, 0.0, field, intr, pose, HeightScanConfig{});
    rejected += est.rejected;
    HeightVoteArray votes("tall", HeightScanConfig{});
    votes.accumulate(est);
    zero_votes += votes.total_votes() == 0;
  }
  bool ok = rejected == cases && zero_votes == cases;
  char buf[120];
  std::snprintf(buf, sizeof buf, "%d/%d rejected, %d/%d with zero votes", rejected, cases,
                zero_votes, cases);
  report("A8", ok, buf);
  CHECK(ok);
}

TEST_CASE("A9: one image runs end to end within three seconds") {
  SceneSpec spec;
  spec.seed = 7;
  spec.n_cameras = 1;
  SyntheticScene scene = generate_scene(spec);
  std::vector<CameraPose> init = {perturb_position(scene.cameras[0], 3.0, 71)};
  TempDir ds("mapfusion_a9_ds");
  write_dataset(ds.path.string(), scene, init);
  PipelineConfig cfg;
  cfg.threads = 1;
  TempDir out("mapfusion_a9_out");
  auto t0 = Clock::now();
  run_pipeline(ds.path.string(), out.path.string(), cfg, true);
  double dt = seconds_since(t0);
  bool ok = dt <= 3.0;
  char buf[80];
  std::snprintf(buf, sizeof buf, "905x640 image processed in %.2f s", dt);
  report("A9", ok, buf);
  CHECK(ok);
}

TEST_CASE("A10: byte-identical outputs across reruns and worker counts") {
  SceneSpec spec;
  spec.seed = 13;
  spec.n_cameras = 3;
  SyntheticScene scene = generate_scene(spec);
  std::vector<CameraPose> init;
  for (size_t c = 0; c < scene.cameras.size(); ++c)
    init.push_back(perturb_position(scene.cameras[c], 4.0, 1300 + c));
  TempDir ds("mapfusion_a10_ds");
  write_dataset(ds.path.string(), scene, init);
  TempDir o1("mapfusion_a10_t1a"), o2("mapfusion_a10_t1b"), o3("mapfusion_a10_t2"),
      o4("mapfusion_a10_t4");
  for (auto [dir, threads] : {std::pair<TempDir*, int>{&o1, 1}, {&o2, 1}, {&o3, 2}, {&o4, 4}}) {
    PipelineConfig cfg;
    cfg.threads = threads;
    run_pipeline(ds.path.string(), dir->path.string(), cfg, true);
  }
  std::string why;
  bool ok = trees_identical(o1.path, o2.path, &why) && trees_identical(o1.path, o3.path, &why) &&
            trees_identical(o1.path, o4.path, &why);
  report("A10", ok, ok ? "rerun + 1/2/4 workers all byte-identical" : why);
  CHECK(ok);
}
