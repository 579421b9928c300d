#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mapfusion/localization.hpp"

using namespace mapfusion;

namespace {

CameraIntrinsics test_intr() {
  CameraIntrinsics intr;
  intr.fx = 500;
  intr.fy = 500;
  intr.cx = 452.5;
  intr.cy = 320;
  intr.image_width = 905;
  intr.image_height = 640;
  return intr;
}

CameraPose north_pose(double x, double y) {
  CameraPose pose;
  pose.rotation = rotation_from_bearing(M_PI / 2);
  pose.position = Eigen::Vector3d(x, y, 2.5);
  return pose;
}

Bcl corner_bcl(double x, double y, double length = 15.0) {
  CornerPoint c;
  c.building_id = "b";
  c.vertex_index = 0;
  c.position = Eigen::Vector2d(x, y);
  c.ground_elev = 0.0;
  return {c, 0.0, length};
}

// Fake regions whose centers sit on the BCLs as projected from the true pose.
std::vector<LineSupportRegion> regions_from_truth(const std::vector<Bcl>& bcls,
                                                  const CameraIntrinsics& intr,
                                                  const CameraPose& true_pose) {
  std::vector<LineSupportRegion> regions;
  for (const auto& b : bcls) {
    ProjectedBcl p;
    try {
      p = project_bcl(b, intr, true_pose);
    } catch (const std::exception&) {
      continue;
    }
    LineSupportRegion r;
    r.center_u = p.u;
    r.center_v = 0.5 * (p.v_top + p.v_bottom);
    regions.push_back(r);
  }
  return regions;
}

}  // namespace

TEST_CASE("bcl projection closed form for a north-facing camera") {
  CameraIntrinsics intr = test_intr();
  CameraPose pose = north_pose(0, 0);
  ProjectedBcl p = project_bcl(corner_bcl(0, 20), intr, pose);
  // Base (0,20,0): v = fy * 2.5/20 + cy; top (0,20,15): v = fy * -12.5/20 + cy.
  CHECK(p.u == doctest::Approx(452.5).epsilon(1e-12));
  CHECK(p.v_base == doctest::Approx(382.5).epsilon(1e-9));
  CHECK(p.v_bottom == doctest::Approx(382.5).epsilon(1e-9));
  CHECK(p.v_top == doctest::Approx(7.5).epsilon(1e-9));

  ProjectedBcl q = project_bcl(corner_bcl(5, 20), intr, pose);
  CHECK(q.u == doctest::Approx(452.5 + 500.0 * 5 / 20).epsilon(1e-12));
}

TEST_CASE("bcl projection failure modes") {
  CameraIntrinsics intr = test_intr();
  CameraPose pose = north_pose(0, 0);
  CHECK_THROWS_AS(project_bcl(corner_bcl(0, -5), intr, pose), BehindCamera);
  // Column far outside the sensor.
  CHECK_THROWS_AS(project_bcl(corner_bcl(40, 10), intr, pose), FullyClipped);
  // Tall BCL near the camera still yields a partially clipped column.
  ProjectedBcl p = project_bcl(corner_bcl(0, 6, 15.0), intr, pose);
  CHECK(p.v_top == 0.0);
  CHECK(p.v_bottom > 0.0);
}

TEST_CASE("sweep range scales inversely with distance and is capped") {
  CHECK(sweep_range(10.0, 500.0, 6.0, 905) == 300);
  CHECK(sweep_range(60.0, 500.0, 6.0, 905) == 50);
  CHECK(sweep_range(20.0, 500.0, 6.0, 905) == 150);
  // Halving the distance doubles the range.
  CHECK(sweep_range(30.0, 500.0, 6.0, 2000) == 2 * sweep_range(60.0, 500.0, 6.0, 2000));
  CHECK(sweep_range(0.5, 500.0, 6.0, 905) == 905);  // capped at image width
  CHECK_THROWS_AS(sweep_range(0.0, 500.0, 6.0, 905), std::invalid_argument);
}

TEST_CASE("accumulator geometry") {
  Accumulator acc({40, 0.3}, {10.0, -4.0});
  CHECK(acc.min_x() == doctest::Approx(10.0 - 6.0));
  CHECK(acc.min_y() == doctest::Approx(-4.0 - 6.0));
  // The grid center falls on the corner between the four middle cells.
  Eigen::Vector2d c = acc.cell_center(19, 19);
  CHECK(c.x() == doctest::Approx(10.0 - 0.15));
  CHECK(c.y() == doctest::Approx(-4.0 - 0.15));
  int col, row;
  CHECK(acc.cell_of({10.0, -4.0}, col, row));
  CHECK(col == 20);
  CHECK(row == 20);
  CHECK(!acc.cell_of({10.0 + 6.1, -4.0}, col, row));
  CHECK(acc.total_mass() == 0.0);
}

TEST_CASE("vote with no regions leaves the accumulator empty") {
  CameraIntrinsics intr = test_intr();
  CameraPose pose = north_pose(0, 0);
  std::vector<Bcl> bcls = {corner_bcl(-5, 20), corner_bcl(5, 18)};
  Accumulator acc({40, 0.3}, {0, 0});
  vote(acc, bcls, {}, intr, pose, VoteConfig{});
  CHECK(acc.total_mass() == 0.0);
}

TEST_CASE("vote recovers the true position from truth-aligned regions") {
  CameraIntrinsics intr = test_intr();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1, 1);
  int recovered = 0, in_top_k = 0;
  const int n_trials = 20;
  for (int trial = 0; trial < n_trials; ++trial) {
    CameraPose true_pose = north_pose(u(rng) * 5, u(rng) * 5);
    std::vector<Bcl> bcls;
    // Corners spread over bearing and depth so the position lines intersect
    // transversally.
    for (int i = 0; i < 6; ++i) {
      double x = true_pose.position.x() + (i - 2.5) * 4 + u(rng);
      double y = true_pose.position.y() + 14 + 6 * i + u(rng) * 2;
      bcls.push_back(corner_bcl(x, y));
    }
    auto regions = regions_from_truth(bcls, intr, true_pose);
    REQUIRE(regions.size() >= 4);

    // Initial guess up to ~2.5 m off; grid centered there.
    Eigen::Vector2d offset(u(rng) * 1.8, u(rng) * 1.8);
    CameraPose init = true_pose;
    init.position.x() += offset.x();
    init.position.y() += offset.y();
    Accumulator acc({40, 0.3}, {init.position.x(), init.position.y()});
    vote(acc, bcls, regions, intr, init, VoteConfig{});
    CHECK(acc.total_mass() > 0.0);
    auto peaks = top_peaks(acc, 5, 1.5);
    REQUIRE(!peaks.empty());
    Eigen::Vector2d truth(true_pose.position.x(), true_pose.position.y());
    if ((peaks[0].position - truth).norm() < 0.45) ++recovered;
    for (const auto& p : peaks)
      if ((p.position - truth).norm() < 0.5) {
        ++in_top_k;
        break;
      }
  }
  // Zero image noise: the strongest peak is usually within 1.5 cells, and a
  // near-truth cell is essentially always among the top-k candidates the
  // height scan later disambiguates.
  CHECK(recovered >= 15);
  CHECK(in_top_k >= 19);
}

TEST_CASE("vote is covariant under world translation") {
  CameraIntrinsics intr = test_intr();
  std::vector<Bcl> base_bcls = {corner_bcl(-6, 16), corner_bcl(2, 22), corner_bcl(7, 30)};
  CameraPose true_pose = north_pose(0.4, -0.7);
  auto regions = regions_from_truth(base_bcls, intr, true_pose);
  CameraPose init = north_pose(1.0, 0.0);
  Accumulator a({40, 0.3}, {1.0, 0.0});
  vote(a, base_bcls, regions, intr, init, VoteConfig{});

  const Eigen::Vector2d shift(123.0, -45.0);
  std::vector<Bcl> moved;
  for (auto b : base_bcls) {
    b.corner.position += shift;
    moved.push_back(b);
  }
  CameraPose init2 = north_pose(1.0 + shift.x(), 0.0 + shift.y());
  Accumulator b({40, 0.3}, {1.0 + shift.x(), 0.0 + shift.y()});
  vote(b, moved, regions, intr, init2, VoteConfig{});
  REQUIRE(a.cells.size() == b.cells.size());
  CHECK(a.total_mass() > 0.0);
  // Supercover boundary cells may differ in the last float bit at large
  // coordinates, so compare mass and the peak location, not raw cells.
  CHECK(b.total_mass() == doctest::Approx(a.total_mass()).epsilon(0.02));
  auto pa = top_peaks(a, 1, 1.5);
  auto pb = top_peaks(b, 1, 1.5);
  REQUIRE(!pa.empty());
  REQUIRE(!pb.empty());
  CHECK((pb[0].position - pa[0].position - shift).norm() <= 0.43);
}

TEST_CASE("bcls behind the camera or off-sensor are skipped, not fatal") {
  CameraIntrinsics intr = test_intr();
  CameraPose pose = north_pose(0, 0);
  std::vector<Bcl> bcls = {corner_bcl(0, -10), corner_bcl(50, 5), corner_bcl(0, 20)};
  auto regions = regions_from_truth({corner_bcl(0, 20)}, intr, pose);
  Accumulator acc({40, 0.3}, {0, 0});
  CHECK_NOTHROW(vote(acc, bcls, regions, intr, pose, VoteConfig{}));
  CHECK(acc.total_mass() > 0.0);
}

TEST_CASE("midpoint weighting is a special case of the evaluator switch") {
  CameraIntrinsics intr = test_intr();
  CameraPose pose = north_pose(0, 0);
  std::vector<Bcl> bcls = {corner_bcl(0, 20)};
  // Region center at the top of the projected column: far from the midpoint,
  // close to the segment.
  ProjectedBcl p = project_bcl(bcls[0], intr, pose);
  LineSupportRegion r;
  r.center_u = p.u;
  r.center_v = p.v_top + 2.0;
  std::vector<LineSupportRegion> regions{r};

  VoteConfig seg;
  seg.weight_eval = VoteWeightEval::kSegmentMax;
  Accumulator a({40, 0.3}, {0, 0});
  vote(a, bcls, regions, intr, pose, seg);
  CHECK(a.total_mass() > 0.0);

  VoteConfig mid;
  mid.weight_eval = VoteWeightEval::kMidpoint;
  Accumulator b({40, 0.3}, {0, 0});
  vote(b, bcls, regions, intr, pose, mid);
  // Midpoint is ~180 px away from the region center: beyond 3 sigma.
  CHECK(b.total_mass() == 0.0);
}

TEST_CASE("top_peaks ordering, threshold, adjacency and cap") {
  Accumulator acc({10, 0.3}, {0, 0});
  acc.at(2, 2) = 5.0;
  acc.at(3, 2) = 4.9;  // adjacent to the 5.0 peak: suppressed
  acc.at(7, 7) = 4.0;
  acc.at(5, 1) = 1.6;
  acc.at(8, 3) = 1.0;  // below threshold
  auto peaks = top_peaks(acc, 5, 1.5);
  REQUIRE(peaks.size() == 3);
  CHECK(peaks[0].peak_value == doctest::Approx(5.0));
  CHECK(peaks[1].peak_value == doctest::Approx(4.0));
  CHECK(peaks[2].peak_value == doctest::Approx(1.6));
  CHECK((peaks[0].position - acc.cell_center(2, 2)).norm() < 1e-12);

  auto capped = top_peaks(acc, 2, 1.5);
  CHECK(capped.size() == 2);

  Accumulator flat({10, 0.3}, {0, 0});
  CHECK(top_peaks(flat, 5, 1.5).empty());

  // A plateau member adjacent to an equal value still counts as a local max,
  // but adjacency suppression keeps only one of the pair.
  Accumulator plateau({10, 0.3}, {0, 0});
  plateau.at(4, 4) = 3.0;
  plateau.at(5, 4) = 3.0;
  auto p = top_peaks(plateau, 5, 1.5);
  REQUIRE(p.size() == 1);
  CHECK((p[0].position - plateau.cell_center(4, 4)).norm() < 1e-12);
}
