// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <fstream>

#include "catch_amalgamated.hpp"
#include "dasp/spatial.hpp"

using namespace dasp;
using namespace dasp::spatial;
using Catch::Approx;

namespace {

std::vector<double> white_noise(std::size_t n, Rng& rng, double std_ = 1.0) {
  std::vector<double> x(n);
  for (double& v : x) v = std_ * rng.gaussian();
  return x;
}

}  // namespace

TEST_CASE("steering vector anchors", "[spatial]") {
  ArrayGeometry pair;
  const double delta = 0.05;
  pair.positions = {{0.0, 0.0, 0.0}, {delta, 0.0, 0.0}};
  const double omega = 2.0 * dsp::kPi * 1000.0;

  // Reference element is exactly 1.
  Direction broadside = Direction::from_azimuth_deg(90.0);  // along y
  auto d_broad = steering_vector(omega, pair, broadside);
  CHECK(d_broad[0] == cplx(1.0, 0.0));
  CHECK(std::abs(d_broad[1] - cplx(1.0, 0.0)) < 1e-12);

  // Endfire: phase difference omega * delta / c.
  Direction endfire = Direction::from_azimuth_deg(0.0);  // along +x
  auto d_end = steering_vector(omega, pair, endfire);
  const double expected = omega * delta / pair.speed_of_sound;
  CHECK(std::abs(std::abs(std::arg(d_end[1])) - expected) < 1e-12);

  // Unit modulus everywhere on a bigger array.
  ArrayGeometry tet = ArrayGeometry::tetrahedron(0.07);
  auto d = steering_vector(omega, tet, Direction::from_azimuth_deg(123.0));
  for (const auto& v : d) CHECK(std::abs(v) == Approx(1.0).margin(1e-12));
}

TEST_CASE("noiseless scene: channel 1 carries the source spectrum",
          "[spatial]") {
  Rng rng = Rng::stream(1, "scene-clean");
  ArrayScene scene;
  scene.geometry = ArrayGeometry::square(0.05);
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.0;
  scene.sources.push_back(
      {Direction::from_azimuth_deg(40.0), white_noise(4096, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  const auto& src = sim.source_spectra[0];
  for (std::size_t t = 0; t < src.frames; ++t)
    for (std::size_t k = 0; k < src.bins; ++k)
      CHECK(std::abs(sim.observation.channels[0].at(t, k) - src.at(t, k)) <
            1e-12);
}

TEST_CASE("noiseless scene: inter-channel phases follow the steering",
          "[spatial]") {
  Rng rng = Rng::stream(2, "scene-phase");
  ArrayScene scene;
  scene.geometry = ArrayGeometry::square(0.05);
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.0;
  Direction truth = Direction::from_azimuth_deg(70.0);
  scene.sources.push_back({truth, white_noise(4096, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  for (std::size_t k = 2; k < 40; k += 7) {
    const double omega = sim.observation.omega(k);
    auto d = steering_vector(omega, scene.geometry, truth);
    for (std::size_t t = 0; t < 5; ++t) {
      const cplx ref = sim.observation.channels[0].at(t, k);
      if (std::abs(ref) < 1e-6) continue;  // only dominant bins
      for (std::size_t m = 1; m < 4; ++m) {
        const cplx ratio = sim.observation.channels[m].at(t, k) / ref;
        double dphi = std::arg(ratio * std::conj(d[m]));
        CHECK(std::abs(dphi) < 1e-3);
      }
    }
  }
}

TEST_CASE("doubling the noise std quadruples the noise power", "[spatial]") {
  auto floor_energy = [](double noise_std) {
    Rng rng = Rng::stream(3, "scene-noise");
    ArrayScene scene;
    scene.geometry = ArrayGeometry::square(0.05);
    scene.sample_rate = 8000.0;
    scene.noise_std = noise_std;
    // Narrowband source at one bin: all other bins carry noise only.
    std::vector<double> tone(8192);
    for (std::size_t i = 0; i < tone.size(); ++i)
      tone[i] = std::sin(2.0 * dsp::kPi * 1000.0 * double(i) / 8000.0);
    scene.sources.push_back({Direction::from_azimuth_deg(0.0), tone});
    dsp::FrameConfig cfg(256, 256, dsp::WindowShape::rect);
    SimulatedScene sim = simulate_scene(scene, cfg, rng);
    const std::size_t tone_bin = 32;  // 1000 Hz at 256-point frames of 8 kHz
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < sim.observation.frames(); ++t)
      for (std::size_t k = 1; k < sim.observation.bins() - 1; ++k) {
        if (k + 2 >= tone_bin && k <= tone_bin + 2) continue;
        acc += std::norm(sim.observation.channels[1].at(t, k));
        ++count;
      }
    return acc / double(count);
  };
  const double e1 = floor_energy(0.05);
  const double e2 = floor_energy(0.10);
  CHECK(e2 / e1 == Approx(4.0).epsilon(0.10));
}

TEST_CASE("raw features: dc imaginary rows vanish, alignment behaves",
          "[spatial]") {
  Rng rng = Rng::stream(4, "raw-features");
  ArrayScene scene;
  scene.geometry = ArrayGeometry::square(0.05);
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.01;
  scene.sources.push_back(
      {Direction::from_azimuth_deg(10.0), white_noise(2048, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  const std::size_t M = 4, K = sim.observation.bins();

  Tensor plain = raw_features(sim.observation, 0, RawAlignment::none);
  REQUIRE(plain.rows() == 2 * M);
  REQUIRE(plain.cols() == K);
  // DC bin of a real frame is real (noise here is complex per bin, but the
  // source contribution at DC is real; use a noiseless scene for the check).
  ArrayScene clean = scene;
  clean.noise_std = 0.0;
  Rng rng2 = Rng::stream(4, "raw-clean");
  SimulatedScene sim_clean = simulate_scene(clean, cfg, rng2);
  Tensor plain_clean = raw_features(sim_clean.observation, 0,
                                    RawAlignment::none);
  for (std::size_t m = 0; m < M; ++m)
    CHECK(plain_clean.at(M + m, 0) == Approx(0.0).margin(1e-9));

  Tensor aligned = raw_features(sim.observation, 0, RawAlignment::reference);
  for (std::size_t k = 0; k < K; ++k) {
    CHECK(aligned.at(0, k) >= -1e-12);           // reference real part >= 0
    CHECK(aligned.at(M, k) == Approx(0.0).margin(1e-12));  // imag = 0
  }

  // Alignment preserves pairwise phase differences.
  for (std::size_t k = 1; k < 10; ++k) {
    auto phase = [&](const Tensor& f, std::size_t m) {
      return std::atan2(f.at(M + m, k), f.at(m, k));
    };
    const double before = std::remainder(
        phase(plain, 2) - phase(plain, 1), 2.0 * dsp::kPi);
    const double after = std::remainder(
        phase(aligned, 2) - phase(aligned, 1), 2.0 * dsp::kPi);
    CHECK(std::abs(std::remainder(before - after, 2.0 * dsp::kPi)) < 1e-9);
  }

  Tensor dropped =
      raw_features(sim.observation, 0, RawAlignment::reference, true);
  CHECK(dropped.rows() == 2 * (M - 1));
  CHECK_THROWS(raw_features(sim.observation, 0, RawAlignment::none, true));
}

TEST_CASE("spatial spectrum finds a single source within one cell",
          "[spatial]") {
  Rng rng = Rng::stream(5, "srp-clean");
  ArrayScene scene;
  scene.geometry = ArrayGeometry::square(0.05);
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.0;
  Direction truth = Direction::from_azimuth_deg(137.0);
  scene.sources.push_back({truth, white_noise(200 * 128 + 256, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  auto grid = azimuth_ring_grid(72);
  Tensor map = spatial_spectrum(sim.observation, scene.geometry, grid);
  std::size_t argmax = 0;
  for (std::size_t j = 1; j < 72; ++j)
    if (map.at(j, 0) > map.at(argmax, 0)) argmax = j;
  CHECK(grid[argmax].angle_to(truth) <= 5.01 * dsp::kPi / 180.0);
}

TEST_CASE("isotropic noise gives a flat map and scaling cancels",
          "[spatial]") {
  Rng rng = Rng::stream(6, "srp-noise");
  ArrayScene scene;
  scene.geometry = ArrayGeometry::square(0.05);
  scene.sample_rate = 8000.0;
  scene.noise_std = 1.0;
  // A silent source: observation is pure per-channel white noise.
  scene.sources.push_back({Direction::from_azimuth_deg(0.0),
                           std::vector<double>(200 * 128 + 256, 0.0)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  SpatialSpectrumOptions opt;
  opt.block_frames = 200;
  auto grid = azimuth_ring_grid(72);
  Tensor map = spatial_spectrum(sim.observation, scene.geometry, grid, opt);
  double lo = map.at(0, 0), hi = map.at(0, 0);
  for (std::size_t j = 0; j < 72; ++j) {
    lo = std::min(lo, map.at(j, 0));
    hi = std::max(hi, map.at(j, 0));
  }
  CHECK(10.0 * std::log10(hi / lo) < 3.0);

  // Global scaling of the observation leaves the normalized map unchanged.
  MultiSpectrogram scaled = sim.observation;
  for (auto& ch : scaled.channels)
    for (auto& v : ch.data) v *= 10.0;
  Tensor map2 = spatial_spectrum(scaled, scene.geometry, grid, opt);
  for (std::size_t j = 0; j < 72; ++j)
    CHECK(map2.at(j, 0) == Approx(map.at(j, 0)).margin(1e-9));
}

TEST_CASE("correlation feature peaks at the true delay direction",
          "[spatial]") {
  Rng rng = Rng::stream(7, "gcc");
  ArrayScene scene;
  ArrayGeometry pair;
  pair.positions = {{-0.025, 0.0, 0.0}, {0.025, 0.0, 0.0}};
  scene.geometry = pair;
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.0;
  Direction truth = Direction::from_azimuth_deg(0.0);  // endfire
  scene.sources.push_back({truth, white_noise(100 * 128 + 256, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  // Half ring: a two-mic pair on the x-axis cannot tell left from right.
  std::vector<Direction> grid;
  for (int a = -90; a <= 90; a += 5)
    grid.push_back(Direction::from_azimuth_deg(double(a)));
  SpatialSpectrumOptions opt;
  opt.block_frames = 100;
  Tensor map = correlation_feature(sim.observation, scene.geometry, grid,
                                   CorrelationWeighting::phat, opt);
  std::size_t argmax = 0;
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (map.at(j, 0) > map.at(argmax, 0)) argmax = j;
  CHECK(grid[argmax].angle_to(truth) <= 5.01 * dsp::kPi / 180.0);
}

TEST_CASE("phat weighting ignores per-bin magnitude scaling", "[spatial]") {
  Rng rng = Rng::stream(8, "gcc-phat");
  ArrayScene scene;
  scene.geometry = ArrayGeometry::square(0.05);
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.0;
  scene.sources.push_back(
      {Direction::from_azimuth_deg(55.0), white_noise(60 * 128 + 256, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  auto grid = azimuth_ring_grid(36);
  SpatialSpectrumOptions opt;
  opt.block_frames = 60;
  Tensor base = correlation_feature(sim.observation, scene.geometry, grid,
                                    CorrelationWeighting::phat, opt);
  // Scale each bin by an arbitrary positive factor on all channels.
  MultiSpectrogram scaled = sim.observation;
  Rng srng = Rng::stream(8, "gcc-scales");
  for (std::size_t k = 0; k < scaled.bins(); ++k) {
    const double g = srng.uniform(0.1, 5.0);
    for (auto& ch : scaled.channels)
      for (std::size_t t = 0; t < scaled.frames(); ++t) ch.at(t, k) *= g;
  }
  Tensor same = correlation_feature(scaled, scene.geometry, grid,
                                    CorrelationWeighting::phat, opt);
  for (std::size_t j = 0; j < grid.size(); ++j)
    CHECK(same.at(j, 0) == Approx(base.at(j, 0)).margin(1e-9));
}

TEST_CASE("identical channels put the correlation maximum at broadside",
          "[spatial]") {
  Rng rng = Rng::stream(9, "gcc-broadside");
  ArrayGeometry pair;
  pair.positions = {{-0.025, 0.0, 0.0}, {0.025, 0.0, 0.0}};
  // Observation with equal channels: copy one channel's spectrogram.
  ArrayScene scene;
  scene.geometry = pair;
  scene.sample_rate = 8000.0;
  scene.noise_std = 0.0;
  scene.sources.push_back(
      {Direction::from_azimuth_deg(90.0), white_noise(50 * 128 + 256, rng)});
  dsp::FrameConfig cfg(256, 128);
  SimulatedScene sim = simulate_scene(scene, cfg, rng);
  sim.observation.channels[1] = sim.observation.channels[0];
  std::vector<Direction> grid;
  for (int a = -90; a <= 90; a += 5)
    grid.push_back(Direction::from_azimuth_deg(double(a)));
  SpatialSpectrumOptions opt;
  opt.block_frames = 50;
  Tensor map = correlation_feature(sim.observation, scene.geometry, grid,
                                   CorrelationWeighting::phat, opt);
  std::size_t argmax = 0;
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (map.at(j, 0) > map.at(argmax, 0)) argmax = j;
  // Zero delay = broadside plane, +-90 deg on this half ring.
  CHECK(std::abs(std::abs(grid[argmax].azimuth) - dsp::kPi / 2.0) < 1e-9);
}

TEST_CASE("direction solve inverts the steering vector", "[spatial]") {
  ArrayGeometry tet = ArrayGeometry::tetrahedron(0.05);
  const double omega = 0.5 * tet.aliasing_limit();
  Direction truth;
  truth.azimuth = 1.1;
  truth.elevation = 0.9;
  auto u = steering_vector(omega, tet, truth);
  DirectionSolve solve = solve_direction_from_phase(u, tet, omega);
  CHECK(solve.rank == 3);
  CHECK(solve.usable);
  CHECK_FALSE(solve.aliased);
  CHECK(solve.direction.angle_to(truth) < 1e-6);
  CHECK(solve.residual < 1e-9);

  // Above the aliasing limit the result is flagged.
  const double high = 1.5 * tet.aliasing_limit();
  auto u2 = steering_vector(high, tet, truth);
  CHECK(solve_direction_from_phase(u2, tet, high).aliased);

  // Zero phases: smallest-norm answer (zero vector), not usable.
  std::vector<cplx> flat(4, cplx(1.0, 0.0));
  DirectionSolve broadside = solve_direction_from_phase(flat, tet, omega);
  CHECK_FALSE(broadside.usable);
  CHECK(std::abs(broadside.raw[0]) < 1e-12);

  // Planar geometry is rank 2 and rejected when full rank is required.
  ArrayGeometry square = ArrayGeometry::square(0.05);
  auto u3 = steering_vector(omega, square, truth);
  DirectionSolve planar = solve_direction_from_phase(u3, square, omega);
  CHECK(planar.rank == 2);
  CHECK_THROWS_WITH(
      solve_direction_from_phase(u3, square, omega, true),
      Catch::Matchers::ContainsSubstring("rank 2"));
}

TEST_CASE("doa labels", "[spatial]") {
  auto grid = azimuth_ring_grid(72);
  Direction truth = grid[17];

  Tensor onehot = onehot_labels(grid, {truth});
  CHECK(onehot[17] == 1.0);
  CHECK(onehot.sum() == 1.0);

  Tensor smooth = smoothed_labels(grid, {truth}, 0.5);
  CHECK(smooth[17] == Approx(1.0));
  for (std::size_t j = 0; j < 72; ++j) {
    CHECK(smooth[j] >= 0.0);
    CHECK(smooth[j] <= 1.0);
    if (j != 17) CHECK(smooth[j] < 1.0);
  }

  // ACCDOA round trip.
  std::vector<AccdoaClass> classes(3);
  classes[1].active = true;
  classes[1].probability = 1.0;
  classes[1].direction = Direction::from_azimuth_deg(40.0);
  classes[2].active = true;
  classes[2].probability = 0.37;
  classes[2].direction = Direction::from_azimuth_deg(300.0);
  Tensor enc = accdoa_encode(classes);
  auto dec = accdoa_decode(enc);
  CHECK_FALSE(dec[0].active);
  CHECK(dec[0].probability == 0.0);
  CHECK(dec[1].active);
  CHECK(dec[1].probability == Approx(1.0).margin(1e-12));
  CHECK(dec[1].direction.angle_to(classes[1].direction) < 1e-6);
  CHECK(dec[2].probability == Approx(0.37).margin(1e-12));
  CHECK(dec[2].direction.angle_to(classes[2].direction) < 1e-6);

  // Unit-probability column equals the unit vector exactly.
  auto u = classes[1].direction.unit();
  for (int i = 0; i < 3; ++i) CHECK(enc.at(std::size_t(i), 1) == Approx(u[i]));
}

TEST_CASE("accdoa round trip is exact over probability range", "[spatial]") {
  Rng rng = Rng::stream(10, "accdoa");
  for (int rep = 0; rep < 100; ++rep) {
    AccdoaClass c;
    c.active = true;
    c.probability = rng.uniform();
    c.direction.azimuth = rng.uniform(0.0, 2.0 * dsp::kPi);
    c.direction.elevation = rng.uniform(0.0, dsp::kPi);
    Tensor enc = accdoa_encode({c});
    auto dec = accdoa_decode(enc);
    CHECK(dec[0].probability == Approx(c.probability).margin(1e-12));
    if (c.probability > 1e-9)
      CHECK(dec[0].direction.angle_to(c.direction) < 1e-6);
  }
}

TEST_CASE("scene file parsing", "[spatial]") {
  const std::string path = "test_scene.txt";
  {
    std::ofstream os(path);
    os << "# toy scene\n";
    os << "rate 8000\n";
    os << "noise_std 0.05\n";
    os << "seed 7\n";
    os << "mic -0.025 -0.025 0\n";
    os << "mic 0.025 -0.025 0\n";
    os << "mic 0.025 0.025 0\n";
    os << "mic -0.025 0.025 0\n";
    os << "source s1.wav 40\n";
    os << "source s2.wav 130 45\n";
  }
  SceneFile scene = parse_scene_file(path);
  CHECK(scene.geometry.mics() == 4);
  CHECK(scene.noise_std == 0.05);
  CHECK(scene.seed == 7);
  CHECK(scene.sources.size() == 2);
  CHECK(scene.sources[0].second.azimuth ==
        Approx(40.0 * dsp::kPi / 180.0));
  CHECK(scene.sources[1].second.elevation ==
        Approx(45.0 * dsp::kPi / 180.0));
  std::remove(path.c_str());

  {
    std::ofstream os(path);
    os << "bogus 1 2 3\n";
  }
  CHECK_THROWS(parse_scene_file(path));
  std::remove(path.c_str());
}
