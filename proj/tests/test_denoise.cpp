#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_scenes.hpp"
#include "vio/denoise.hpp"
#include "vio/geometry.hpp"
#include "vio/simulator.hpp"
#include "vio/util.hpp"

#include <filesystem>
#include <fstream>

using namespace vio;
using namespace vio::testing;

namespace {

ScenarioSpec biased_imu_scenario(uint64_t seed) {
  ScenarioSpec s;
  s.traj.kind = TrajectoryKind::kFigureEight;
  s.traj.duration_s = 30.0;
  s.traj.imu_rate_hz = 200.0;
  s.traj.cam_rate_hz = 10.0;
  s.traj.seed = seed;
  s.scene.static_count = 0;  // IMU-only dataset
  s.noise.bias_seed = 777;  // one sensor instance across datasets
  s.noise.gyro_bias_init = 0.02;
  s.noise.accel_bias_init = 0.15;
  s.noise.gyro_white_sigma = 5e-4;
  s.noise.accel_white_sigma = 5e-3;
  s.noise.gyro_walk_sigma = 1e-5;
  s.noise.accel_walk_sigma = 1e-4;
  return s;
}

DenoiserConfig small_config(uint64_t seed = 1) {
  DenoiserConfig cfg;
  cfg.seed = seed;
  cfg.epochs = 18;
  cfg.quality_epochs = 24;
  return cfg;
}

// oracle: direct integration of a stream over short windows starting from
// ground truth
double open_loop_drift(const std::vector<Vec3>& w,
                       const std::vector<Vec3>& a, const Dataset& ds,
                       double window_s) {
  const double dt = (ds.imu[1].t_ns - ds.imu[0].t_ns) * 1e-9;
  const int wlen = static_cast<int>(std::llround(window_s / dt));
  double sum = 0.0;
  int count = 0;
  for (size_t i = 0; i + wlen < ds.imu.size(); i += wlen / 2) {
    Vec3 p = ds.groundtruth[i].p;
    Vec3 v = ds.groundtruth[i].v;
    Quat q = ds.groundtruth[i].q;
    for (int t = 0; t < wlen; ++t) {
      const Vec3 wm = 0.5 * (w[i + t] + w[i + t + 1]);
      const Quat qn = (q * so3_exp(wm * dt)).normalized();
      const Vec3 aw0 = q * a[i + t] + kGravityWorld;
      const Vec3 aw1 = qn * a[i + t + 1] + kGravityWorld;
      const Vec3 am = 0.5 * (aw0 + aw1);
      p += v * dt + 0.5 * am * dt * dt;
      v += am * dt;
      q = qn;
    }
    sum += (p - ds.groundtruth[i + wlen].p).norm();
    ++count;
  }
  return sum / count;
}

}  // namespace

TEST_CASE("correct at initialization is the identity map") {
  Denoiser model;
  model.init(small_config());
  std::vector<ImuRecord> window(model.config.window);
  for (int i = 0; i < model.config.window; ++i) {
    window[i].t_ns = i * 5'000'000;
    window[i].w = Vec3(0.1, -0.2, 0.05);
    window[i].a = Vec3(0.3, 0.1, 9.81);
  }
  const auto out = model.correct(window);
  CHECK((out.w - window.back().w).norm() == 0.0);
  CHECK((out.a - window.back().a).norm() == 0.0);
  CHECK(out.raw_output.zeta_gyro == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.raw_output.zeta_accel == doctest::Approx(0.5).epsilon(1e-12));

  window.pop_back();
  CHECK_THROWS_AS(model.correct(window), std::invalid_argument);
}

TEST_CASE("calibration matrix applies per the correction equation") {
  Denoiser model;
  model.init(small_config());
  model.calib.gyro_scale = 2.0 * Mat3::Identity();
  std::vector<ImuRecord> window(model.config.window);
  for (auto& s : window) s.w = Vec3(0.1, 0, 0);
  const auto out = model.correct(window);
  CHECK((out.w - Vec3(0.2, 0, 0)).norm() < 1e-15);

  // affine in the raw sample with frozen corrections: doubling the
  // calibration doubles exactly the calibration term
  model.calib.gyro_scale = 4.0 * Mat3::Identity();
  const auto out2 = model.correct(window);
  const Vec3 corr = out.raw_output.gyro_correction;
  CHECK((out2.w - corr - 2.0 * (out.w - corr)).norm() < 1e-12);
}

TEST_CASE("imu attention weight") {
  CHECK(imu_attention_weight({1.0, 1.0, 1.0}) == 1.0);
  CHECK(imu_attention_weight({0.5, 1.5}) == doctest::Approx(1.0));
  CHECK(imu_attention_weight({0.1, 0.2}, true) == 1.0);
  CHECK_THROWS_AS(imu_attention_weight({}), std::invalid_argument);
  CHECK(imu_attention_weight({1.7, 1.7, 1.7, 1.7}) ==
        doctest::Approx(1.7).epsilon(1e-15));
}

TEST_CASE("receptive field fits the window") {
  DenoiserConfig cfg;
  CHECK(cfg.receptive_field() == 128);
  CHECK_NOTHROW(cfg.validate());
  cfg.window = 64;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("gyro loss gradient matches central differences on a toy sequence") {
  Rng rng(5);
  const double dt = 0.005;
  std::vector<Vec3> w_hat = {Vec3(0.3, -0.1, 0.2), Vec3(-0.2, 0.4, 0.1),
                             Vec3(0.1, 0.1, -0.3), Vec3(0.0, 0.2, 0.1)};
  std::vector<Quat> q_gt(w_hat.size() + 1);
  q_gt[0] = so3_exp(rng.gaussian3());
  for (size_t i = 0; i + 1 < q_gt.size(); ++i) {
    q_gt[i + 1] =
        (q_gt[i] * so3_exp((w_hat[i] + 0.05 * rng.gaussian3()) * dt))
            .normalized();
  }
  const std::vector<int> horizons = {2, 3};
  MatX grad;
  gyro_horizon_loss(w_hat, q_gt, dt, horizons, 1, &grad);

  const double h = 1e-6;
  for (size_t k = 0; k < w_hat.size(); ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      auto wp = w_hat, wm = w_hat;
      wp[k][axis] += h;
      wm[k][axis] -= h;
      const double lp = gyro_horizon_loss(wp, q_gt, dt, horizons, 1);
      const double lm = gyro_horizon_loss(wm, q_gt, dt, horizons, 1);
      const double fd = (lp - lm) / (2.0 * h);
      const double rel =
          std::abs(grad(axis, k) - fd) / std::max(1e-6, std::abs(fd));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("accel loss gradient matches central differences") {
  Rng rng(7);
  const double dt = 0.005;
  const int n = 6;
  std::vector<Vec3> a_hat(n), w_rot(n);
  std::vector<GroundTruthRecord> gt(n + 1);
  gt[0].q = so3_exp(0.2 * rng.gaussian3());
  gt[0].v = rng.gaussian3();
  for (int i = 0; i < n; ++i) {
    a_hat[i] = Vec3(0, 0, 9.81) + rng.gaussian3();
    w_rot[i] = 0.3 * rng.gaussian3();
    gt[i + 1].q = (gt[i].q * so3_exp(w_rot[i] * dt)).normalized();
    gt[i + 1].v = gt[i].v + rng.gaussian3() * dt;
    gt[i + 1].p = gt[i].p + gt[i].v * dt;
  }
  const std::vector<int> horizons = {3, 5};
  MatX grad;
  accel_horizon_loss(a_hat, w_rot, gt, 0, dt, horizons, 1, kGravityWorld,
                     &grad);
  const double h = 1e-6;
  for (int k = 0; k < n; ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      auto ap = a_hat, am = a_hat;
      ap[k][axis] += h;
      am[k][axis] -= h;
      const double lp = accel_horizon_loss(ap, w_rot, gt, 0, dt, horizons, 1,
                                           kGravityWorld);
      const double lm = accel_horizon_loss(am, w_rot, gt, 0, dt, horizons, 1,
                                           kGravityWorld);
      const double fd = (lp - lm) / (2.0 * h);
      const double rel =
          std::abs(grad(axis, k) - fd) / std::max(1e-6, std::abs(fd));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("network backward matches finite differences") {
  DenoiserConfig cfg = small_config();
  cfg.layers = 3;
  cfg.dilations = {1, 2, 4};
  cfg.window = 16;
  DilatedTcn net;
  net.init(cfg, 12, 11);
  Rng rng(13);
  MatX x(12, 20);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();

  const MatX corr = net.forward(x);
  net.backward(corr);  // gradient of 0.5*|corr|^2

  auto loss_of = [&](DilatedTcn& n) {
    return 0.5 * n.forward(x).squaredNorm();
  };
  const double h = 1e-6;
  struct Probe {
    Tensor* t;
    int idx;
  };
  std::vector<Probe> probes = {{&net.convs[0].w_tap1, 3},
                               {&net.convs[1].w_tap0, 17},
                               {&net.convs[2].bias, 5},
                               {&net.out_w, 20}};
  for (const auto& p : probes) {
    const double analytic = p.t->grad.data()[p.idx];
    const double orig = p.t->value.data()[p.idx];
    p.t->value.data()[p.idx] = orig + h;
    const double lp = loss_of(net);
    p.t->value.data()[p.idx] = orig - h;
    const double lm = loss_of(net);
    p.t->value.data()[p.idx] = orig;
    const double fd = (lp - lm) / (2.0 * h);
    CHECK(std::abs(analytic - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
  }
}

TEST_CASE("perfect rates give zero rotation loss") {
  const double dt = 0.005;
  const int n = 200;
  std::vector<Vec3> w_hat(n);
  std::vector<Quat> q_gt(n);
  q_gt[0] = Quat::Identity();
  for (int i = 0; i + 1 < n; ++i) {
    w_hat[i] = Vec3(0.2 * std::sin(i * 0.01), 0.1, -0.05);
    q_gt[i + 1] = (q_gt[i] * so3_exp(w_hat[i] * dt)).normalized();
  }
  CHECK(gyro_horizon_loss(w_hat, q_gt, dt, {16, 32}, 4) < 1e-12);
}

TEST_CASE("training pipeline") {
  const auto train_ds = simulate_scenario(biased_imu_scenario(11));
  const auto heldout_ds = simulate_scenario(biased_imu_scenario(23));

  Denoiser model;
  model.init(small_config(7));
  const auto greport = train_gyro(model, train_ds);
  MESSAGE("gyro loss ", greport.initial_loss, " -> ", greport.final_loss);
  CHECK(greport.final_loss < greport.initial_loss);

  {
    const auto den = model.correct_stream(heldout_ds.imu);
    const double dt = 0.005;
    std::vector<Vec3> w_raw(heldout_ds.imu.size()), w_corr(den.size());
    std::vector<Quat> q_gt(heldout_ds.imu.size());
    for (size_t i = 0; i < heldout_ds.imu.size(); ++i) {
      w_raw[i] = heldout_ds.imu[i].w;
      w_corr[i] = den[i].w;
      q_gt[i] = heldout_ds.groundtruth[i].q;
    }
    const double raw_loss = gyro_horizon_loss(w_raw, q_gt, dt, {16, 32}, 8);
    const double corr_loss = gyro_horizon_loss(w_corr, q_gt, dt, {16, 32}, 8);
    MESSAGE("held-out gyro loss raw ", raw_loss, " corrected ", corr_loss);
    CHECK(corr_loss < raw_loss);

    // mean residual gyro error below 10% of the injected bias
    Vec3 mean_err = Vec3::Zero();
    Vec3 mean_raw_err = Vec3::Zero();
    for (size_t i = 0; i + 1 < den.size(); ++i) {
      const Vec3 w_true = so3_log((heldout_ds.groundtruth[i].q.conjugate() *
                                   heldout_ds.groundtruth[i + 1].q)
                                      .normalized()) /
                          dt;
      mean_err += den[i].w - w_true;
      mean_raw_err += heldout_ds.imu[i].w - w_true;
    }
    mean_err /= static_cast<double>(den.size());
    mean_raw_err /= static_cast<double>(den.size());
    MESSAGE("mean gyro error corrected ", mean_err.norm(), " raw ",
            mean_raw_err.norm());
    CHECK(mean_err.norm() < 0.1 * mean_raw_err.norm());
  }

  const auto areport = train_accel(model, train_ds);
  MESSAGE("accel loss ", areport.initial_loss, " -> ", areport.final_loss);
  CHECK(areport.final_loss < areport.initial_loss);

  {
    const auto den = model.correct_stream(heldout_ds.imu);
    std::vector<Vec3> w_raw, a_raw, w_corr, a_corr;
    for (size_t i = 0; i < heldout_ds.imu.size(); ++i) {
      w_raw.push_back(heldout_ds.imu[i].w);
      a_raw.push_back(heldout_ds.imu[i].a);
      w_corr.push_back(den[i].w);
      a_corr.push_back(den[i].a);
    }
    const double raw_drift = open_loop_drift(w_raw, a_raw, heldout_ds, 1.0);
    const double corr_drift = open_loop_drift(w_corr, a_corr, heldout_ds, 1.0);
    MESSAGE("1s open-loop drift raw ", raw_drift, " corrected ", corr_drift);
    CHECK(corr_drift <= 0.5 * raw_drift);
  }

  train_quality(model, train_ds);
  {
    const double dt = 0.005;
    const double sg = heldout_ds.noise.gyro_white_sigma / std::sqrt(dt);
    Rng rng(99);
    double clean_sum = 0.0, noisy_sum = 0.0;
    int count = 0;
    for (int start = 0; start + model.config.window <
                        static_cast<int>(heldout_ds.imu.size());
         start += 500) {
      std::vector<ImuRecord> win(
          heldout_ds.imu.begin() + start,
          heldout_ds.imu.begin() + start + model.config.window);
      clean_sum += model.correct(win).raw_output.zeta_gyro;
      for (auto& s : win) {
        s.w += std::sqrt(25.0 - 1.0) * sg * rng.gaussian3();
      }
      noisy_sum += model.correct(win).raw_output.zeta_gyro;
      ++count;
    }
    MESSAGE("clean zeta ", clean_sum / count, " 5x-noise zeta ",
            noisy_sum / count);
    CHECK(clean_sum / count >= 0.8);
    CHECK(noisy_sum / count <= 0.5);
  }

  // model round trip: loaded weights reproduce outputs bitwise
  {
    const std::string dir = "/tmp/viokit_test_model";
    std::filesystem::remove_all(dir);
    model.save(dir);
    const auto loaded1 = Denoiser::load(dir);
    const auto loaded2 = Denoiser::load(dir);
    std::vector<ImuRecord> win(heldout_ds.imu.begin(),
                               heldout_ds.imu.begin() + model.config.window);
    const auto o1 = loaded1.correct(win);
    const auto o2 = loaded2.correct(win);
    CHECK(o1.w == o2.w);
    CHECK(o1.a == o2.a);
    CHECK(o1.raw_output.zeta_gyro == o2.raw_output.zeta_gyro);
    const std::string dir2 = "/tmp/viokit_test_model2";
    std::filesystem::remove_all(dir2);
    loaded1.save(dir2);
    for (const std::string f :
         {"weights.bin", "manifest.json", "calibration.csv"}) {
      std::ifstream a(dir + "/" + f, std::ios::binary);
      std::ifstream b(dir2 + "/" + f, std::ios::binary);
      std::string sa((std::istreambuf_iterator<char>(a)),
                     std::istreambuf_iterator<char>());
      std::string sb((std::istreambuf_iterator<char>(b)),
                     std::istreambuf_iterator<char>());
      CHECK(sa == sb);
    }
  }

  // a wrong gyro model strictly increases the final accel loss
  {
    Denoiser right = model;
    right.accel_net.init(right.config, 12,
                         hash_combine(right.config.seed, 0xa5u));
    right.calib.accel_scale = Mat3::Identity();

    Denoiser wrong = model;
    wrong.accel_net.init(wrong.config, 12,
                         hash_combine(wrong.config.seed, 0xa5u));
    wrong.calib.accel_scale = Mat3::Identity();
    // corrupt the gyro branch: randomize its output layer so the
    // corrections become time-varying garbage
    Rng corrupt_rng(4242);
    for (int i = 0; i < wrong.gyro_net.out_w.value.size(); ++i) {
      wrong.gyro_net.out_w.value.data()[i] = 0.5 * corrupt_rng.gaussian();
    }

    right.config.epochs = 6;
    wrong.config.epochs = 6;
    const auto rep_right = train_accel(right, train_ds);
    const auto rep_wrong = train_accel(wrong, train_ds);
    MESSAGE("accel loss right ", rep_right.final_loss, " wrong ",
            rep_wrong.final_loss);
    CHECK(rep_wrong.final_loss > rep_right.final_loss);
  }
}

TEST_CASE("training determinism") {
  auto spec = biased_imu_scenario(31);
  spec.traj.duration_s = 8.0;
  const auto ds = simulate_scenario(spec);
  DenoiserConfig cfg = small_config(5);
  cfg.epochs = 3;
  Denoiser a, b;
  a.init(cfg);
  b.init(cfg);
  const auto ra = train_gyro(a, ds);
  const auto rb = train_gyro(b, ds);
  CHECK(std::abs(ra.final_loss - rb.final_loss) < 1e-9);
}

TEST_CASE("training requires ground truth") {
  auto spec = biased_imu_scenario(1);
  spec.traj.duration_s = 5.0;
  auto ds = simulate_scenario(spec);
  ds.groundtruth.resize(10);
  Denoiser model;
  model.init(small_config());
  CHECK_THROWS_AS(train_gyro(model, ds), std::invalid_argument);
}
