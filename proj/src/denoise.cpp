#include "vio/denoise.hpp"

#include "vio/geometry.hpp"
#include "vio/util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace vio {

namespace {

constexpr double kAccelZShift = 9.81;  // input featurization constant

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

MatX gelu_mat(const MatX& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

MatX shift_cols(const MatX& x, int d) {
  MatX y(x.rows(), x.cols());
  for (int t = 0; t < x.cols(); ++t) {
    y.col(t) = x.col(std::max(t - d, 0));
  }
  return y;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void DenoiserConfig::validate() const {
  if (static_cast<int>(dilations.size()) != layers) {
    throw std::invalid_argument("denoiser: dilation count must match layers");
  }
  if (receptive_field() > window) {
    throw std::invalid_argument(
        "denoiser: receptive field exceeds the input window");
  }
}

double imu_attention_weight(const std::vector<double>& zetas,
                            bool confident_override) {
  if (confident_override) return 1.0;
  if (zetas.empty()) {
    throw std::invalid_argument("imu_attention_weight: empty score set");
  }
  double sum = 0.0;
  for (double z : zetas) sum += z;
  return sum / static_cast<double>(zetas.size());
}

void Tensor::init(int rows, int cols) {
  value = MatX::Zero(rows, cols);
  grad = MatX::Zero(rows, cols);
  m = MatX::Zero(rows, cols);
  v = MatX::Zero(rows, cols);
}

void DilatedTcn::init(const DenoiserConfig& config, int in_channels,
                      uint64_t seed) {
  Rng rng(seed);
  convs.assign(config.layers, ConvLayer{});
  int in = in_channels;
  for (int l = 0; l < config.layers; ++l) {
    auto& c = convs[l];
    c.dilation = config.dilations[l];
    c.w_tap0.init(config.channels, in);
    c.w_tap1.init(config.channels, in);
    c.bias.init(config.channels, 1);
    const double lim = std::sqrt(1.0 / (in * 2.0));
    for (Tensor* t : {&c.w_tap0, &c.w_tap1}) {
      for (int i = 0; i < t->value.size(); ++i) {
        t->value.data()[i] = rng.uniform(-lim, lim);
      }
    }
    in = config.channels;
  }
  out_w.init(3, config.channels);  // zero init: corrections start at zero
  out_b.init(3, 1);
  q1_w.init(16, config.channels);
  q1_b.init(16, 1);
  q2_w.init(1, 16);
  q2_b.init(1, 1);
  const double lim = std::sqrt(1.0 / config.channels);
  for (int i = 0; i < q1_w.value.size(); ++i) {
    q1_w.value.data()[i] = rng.uniform(-lim, lim);
  }
}

MatX DilatedTcn::forward(const MatX& x) {
  input_ = x;
  preacts_.clear();
  acts_.clear();
  MatX cur = x;
  for (auto& c : convs) {
    MatX z =
        c.w_tap1.value * cur + c.w_tap0.value * shift_cols(cur, c.dilation);
    z.colwise() += VecX(c.bias.value.col(0));
    preacts_.push_back(z);
    MatX a = gelu_mat(z);
    if (a.rows() == cur.rows()) a += cur;  // residual connection
    acts_.push_back(std::move(a));
    cur = acts_.back();
  }
  MatX corr = out_w.value * cur;
  corr.colwise() += VecX(out_b.value.col(0));
  return corr;
}

MatX DilatedTcn::backward(const MatX& d_corr) {
  const MatX& features = acts_.back();
  out_w.grad += d_corr * features.transpose();
  out_b.grad += d_corr.rowwise().sum();
  MatX da = out_w.value.transpose() * d_corr;

  for (int l = static_cast<int>(convs.size()) - 1; l >= 0; --l) {
    auto& c = convs[l];
    MatX dz = da.cwiseProduct(
        preacts_[l].unaryExpr([](double v) { return gelu_deriv(v); }));
    const MatX& x = l == 0 ? input_ : acts_[l - 1];
    const bool residual = preacts_[l].rows() == x.rows();
    const MatX xs = shift_cols(x, c.dilation);
    c.w_tap1.grad += dz * x.transpose();
    c.w_tap0.grad += dz * xs.transpose();
    c.bias.grad += dz.rowwise().sum();

    MatX dx = c.w_tap1.value.transpose() * dz;
    const MatX d0 = c.w_tap0.value.transpose() * dz;
    for (int t = 0; t < d0.cols(); ++t) {
      dx.col(std::max(t - c.dilation, 0)) += d0.col(t);
    }
    if (residual) dx += da;  // skip-path gradient
    da = std::move(dx);
  }
  return da;
}

double DilatedTcn::quality(const VecX& feature) const {
  const VecX z1 = q1_w.value * feature + q1_b.value.col(0);
  VecX h(z1.size());
  for (int i = 0; i < z1.size(); ++i) h(i) = gelu(z1(i));
  const double u = (q2_w.value * h)(0, 0) + q2_b.value(0, 0);
  return sigmoid(u);
}

void DilatedTcn::quality_backward(const VecX& feature, double d_out) {
  const VecX z1 = q1_w.value * feature + q1_b.value.col(0);
  VecX h(z1.size());
  for (int i = 0; i < z1.size(); ++i) h(i) = gelu(z1(i));
  const double u = (q2_w.value * h)(0, 0) + q2_b.value(0, 0);
  const double s = sigmoid(u);
  const double du = d_out * s * (1.0 - s);
  q2_w.grad += du * h.transpose();
  q2_b.grad(0, 0) += du;
  const VecX dh = du * q2_w.value.transpose();
  VecX dz1(z1.size());
  for (int i = 0; i < z1.size(); ++i) dz1(i) = dh(i) * gelu_deriv(z1(i));
  q1_w.grad += dz1 * feature.transpose();
  q1_b.grad.col(0) += dz1;
}

std::vector<Tensor*> DilatedTcn::conv_params() {
  std::vector<Tensor*> out;
  for (auto& c : convs) {
    out.push_back(&c.w_tap0);
    out.push_back(&c.w_tap1);
    out.push_back(&c.bias);
  }
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

std::vector<Tensor*> DilatedTcn::quality_params() {
  return {&q1_w, &q1_b, &q2_w, &q2_b};
}

std::vector<Tensor*> DilatedTcn::all_params() {
  auto out = conv_params();
  for (Tensor* t : quality_params()) out.push_back(t);
  return out;
}

namespace {

// 12 channels: raw rates/forces plus scaled first differences. The
// difference channels expose the white-noise level to the stack (smooth
// motion has tiny sample-to-sample differences).
constexpr int kInputChannels = 12;
constexpr double kGyroDiffScale = 20.0;
constexpr double kAccelDiffScale = 2.0;

MatX featurize(const std::vector<ImuRecord>& stream, int begin, int count) {
  MatX x(kInputChannels, count);
  for (int t = 0; t < count; ++t) {
    const auto& s = stream[begin + t];
    const auto& prev = stream[begin + std::max(t - 1, 0)];
    x(0, t) = s.w.x();
    x(1, t) = s.w.y();
    x(2, t) = s.w.z();
    x(3, t) = s.a.x();
    x(4, t) = s.a.y();
    x(5, t) = s.a.z() - kAccelZShift;
    for (int k = 0; k < 3; ++k) {
      x(6 + k, t) = kGyroDiffScale * (s.w[k] - prev.w[k]);
      x(9 + k, t) = kAccelDiffScale * (s.a[k] - prev.a[k]);
    }
  }
  return x;
}

}  // namespace

void Denoiser::init(const DenoiserConfig& cfg) {
  cfg.validate();
  config = cfg;
  gyro_net.init(cfg, kInputChannels, hash_combine(cfg.seed, 0x67u));
  accel_net.init(cfg, kInputChannels, hash_combine(cfg.seed, 0xa5u));
  calib = CalibrationModel{};
}

DenoisedSample Denoiser::correct(const std::vector<ImuRecord>& window) const {
  if (static_cast<int>(window.size()) != config.window) {
    throw std::invalid_argument(
        "denoiser: correct() expects a window of exactly " +
        std::to_string(config.window) + " samples");
  }
  const MatX x = featurize(window, 0, config.window);
  auto& gn = const_cast<DilatedTcn&>(gyro_net);
  auto& an = const_cast<DilatedTcn&>(accel_net);
  const MatX gcorr = gn.forward(x);
  const VecX gfeat = gn.features().col(config.window - 1);
  const MatX acorr = an.forward(x);
  const VecX afeat = an.features().col(config.window - 1);

  DenoisedSample out;
  const auto& s = window.back();
  out.raw_output.gyro_correction = gcorr.col(config.window - 1);
  out.raw_output.accel_correction = acorr.col(config.window - 1);
  out.raw_output.zeta_gyro = gyro_net.quality(gfeat);
  out.raw_output.zeta_accel = accel_net.quality(afeat);
  out.w = calib.gyro_combined() * s.w + out.raw_output.gyro_correction;
  out.a = calib.accel_combined() * s.a + out.raw_output.accel_correction;
  return out;
}

std::vector<DenoisedSample> Denoiser::correct_stream(
    const std::vector<ImuRecord>& stream) const {
  std::vector<DenoisedSample> out(stream.size());
  if (stream.empty()) return out;
  const int t_total = static_cast<int>(stream.size());
  const MatX x = featurize(stream, 0, t_total);
  auto& gn = const_cast<DilatedTcn&>(gyro_net);
  auto& an = const_cast<DilatedTcn&>(accel_net);
  const MatX gcorr = gn.forward(x);
  const MatX gfeat = gn.features();
  std::vector<double> zg(t_total);
  for (int t = 0; t < t_total; ++t) zg[t] = gyro_net.quality(gfeat.col(t));
  const MatX acorr = an.forward(x);
  const MatX& afeat = an.features();
  const Mat3 cg = calib.gyro_combined();
  const Mat3 ca = calib.accel_combined();
  for (int t = 0; t < t_total; ++t) {
    out[t].raw_output.gyro_correction = gcorr.col(t);
    out[t].raw_output.accel_correction = acorr.col(t);
    out[t].raw_output.zeta_gyro = zg[t];
    out[t].raw_output.zeta_accel = accel_net.quality(afeat.col(t));
    out[t].w = cg * stream[t].w + out[t].raw_output.gyro_correction;
    out[t].a = ca * stream[t].a + out[t].raw_output.accel_correction;
  }
  return out;
}

double gyro_horizon_loss(const std::vector<Vec3>& w_hat,
                         const std::vector<Quat>& q_gt, double dt,
                         const std::vector<int>& horizons, int stride,
                         MatX* d_loss_d_what) {
  const int t_total = static_cast<int>(w_hat.size());
  if (d_loss_d_what) *d_loss_d_what = MatX::Zero(3, t_total);
  std::vector<Mat3> exps(t_total);
  for (int k = 0; k < t_total; ++k) {
    exps[k] = so3_exp(w_hat[k] * dt).toRotationMatrix();
  }
  double loss = 0.0;
  std::vector<Mat3> prefix;
  for (int j : horizons) {
    prefix.assign(j, Mat3::Identity());
    for (int i = 0; i + j < t_total; i += stride) {
      Mat3 b = Mat3::Identity();
      for (int k = 0; k < j; ++k) {
        b = b * exps[i + k];
        prefix[k] = b;  // E_i ... E_{i+k}
      }
      const Mat3 dr_gt =
          (q_gt[i].conjugate() * q_gt[i + j]).toRotationMatrix();
      const Mat3 m = dr_gt * b.transpose();
      const Vec3 e = so3_log(Quat(m));
      const double s = e.squaredNorm();
      loss += huber(s);
      if (d_loss_d_what) {
        const Vec3 de = 2.0 * huber_deriv(s) * e;
        const Eigen::RowVector3d common =
            de.transpose() * so3_right_jacobian_inv(e);
        for (int k = 0; k < j; ++k) {
          const Eigen::RowVector3d g =
              -dt * common * prefix[k] *
              so3_right_jacobian(w_hat[i + k] * dt);
          d_loss_d_what->col(i + k) += g.transpose();
        }
      }
    }
  }
  return loss;
}

double accel_horizon_loss(const std::vector<Vec3>& a_hat,
                          const std::vector<Vec3>& w_for_rot,
                          const std::vector<GroundTruthRecord>& gt, int i0,
                          double dt, const std::vector<int>& horizons,
                          int stride, const Vec3& gravity_w,
                          MatX* d_loss_d_ahat) {
  const int t_total = static_cast<int>(a_hat.size());
  if (d_loss_d_ahat) *d_loss_d_ahat = MatX::Zero(3, t_total);
  std::vector<Mat3> exps(t_total);
  for (int k = 0; k < t_total; ++k) {
    exps[k] = so3_exp(w_for_rot[k] * dt).toRotationMatrix();
  }
  double loss = 0.0;
  std::vector<Mat3> rots;
  for (int j : horizons) {
    rots.assign(j, Mat3::Identity());
    for (int i = 0; i + j < t_total; i += stride) {
      Mat3 r = Mat3::Identity();
      Vec3 p = Vec3::Zero(), v = Vec3::Zero();
      for (int t = 0; t < j; ++t) {
        rots[t] = r;  // R_{i,i+t}
        const Vec3 u = r * a_hat[i + t];
        p += v * dt + 0.5 * u * dt * dt;
        v += u * dt;
        r = r * exps[i + t];
      }
      const double big_t = j * dt;
      const auto& g0 = gt[i0 + i];
      const auto& g1 = gt[i0 + i + j];
      const Vec3 dp_gt =
          g0.q.conjugate() *
          (g1.p - g0.p - g0.v * big_t - 0.5 * gravity_w * big_t * big_t);
      const Vec3 d = dp_gt - p;
      const double s = d.squaredNorm();
      loss += huber(s);
      if (d_loss_d_ahat) {
        const Vec3 dldp_hat = -2.0 * huber_deriv(s) * d;
        for (int t = 0; t < j; ++t) {
          const double coeff = dt * dt * (j - 1 - t + 0.5);
          d_loss_d_ahat->col(i + t) +=
              coeff * (rots[t].transpose() * dldp_hat);
        }
      }
    }
  }
  return loss;
}

namespace {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int step = 0;

  void update(std::vector<Tensor*> params, double lr_now) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    for (Tensor* t : params) {
      t->m = beta1 * t->m + (1.0 - beta1) * t->grad;
      t->v = beta2 * t->v + (1.0 - beta2) * t->grad.cwiseProduct(t->grad);
      const MatX mhat = t->m / c1;
      const MatX vhat = t->v / c2;
      t->value -= lr_now * mhat.cwiseQuotient(
                               (vhat.cwiseSqrt().array() + eps).matrix());
      t->grad.setZero();
    }
  }
};

double cosine_lr(double base, int step, int total_steps) {
  if (total_steps <= 1) return base;
  const double f = static_cast<double>(step) / (total_steps - 1);
  return base * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, f)));
}

void check_training_inputs(const Dataset& ds) {
  if (ds.groundtruth.size() != ds.imu.size() || ds.imu.size() < 256) {
    throw std::invalid_argument(
        "denoiser training: dataset lacks per-sample ground truth");
  }
}

std::vector<int> chunk_starts(int total, int chunk, int stride) {
  std::vector<int> starts;
  for (int c = 0; c + chunk <= total; c += stride) starts.push_back(c);
  if (starts.empty()) starts.push_back(0);
  return starts;
}

}  // namespace

TrainReport train_gyro(Denoiser& model, const Dataset& ds) {
  check_training_inputs(ds);
  const auto& cfg = model.config;
  const double dt = (ds.imu[1].t_ns - ds.imu[0].t_ns) * 1e-9;
  const int total = static_cast<int>(ds.imu.size());
  const int chunk = std::min(cfg.chunk, total);
  const auto starts = chunk_starts(total, chunk, cfg.chunk_stride);

  Tensor calib_t;
  calib_t.init(3, 3);
  calib_t.value = model.calib.gyro_scale;

  auto params = model.gyro_net.conv_params();
  params.push_back(&calib_t);

  auto run_epoch = [&](bool train, AdamState* adam, double lr) {
    double sum = 0.0;
    for (int c : starts) {
      const MatX x = featurize(ds.imu, c, chunk);
      const MatX corr = model.gyro_net.forward(x);
      const int ext = std::min(chunk + cfg.horizons.back(), total - c);
      std::vector<Vec3> w_hat(ext);
      std::vector<Quat> q_gt(ext);
      for (int t = 0; t < ext; ++t) {
        w_hat[t] = calib_t.value * ds.imu[c + t].w;
        if (t < chunk) w_hat[t] += Vec3(corr.col(t));
        q_gt[t] = ds.groundtruth[c + t].q;
      }
      MatX dgrad;
      const double loss =
          gyro_horizon_loss(w_hat, q_gt, dt, cfg.horizons, cfg.loss_stride,
                            train ? &dgrad : nullptr);
      sum += loss;
      if (train) {
        model.gyro_net.backward(dgrad.leftCols(chunk));
        for (int t = 0; t < ext; ++t) {
          calib_t.grad += dgrad.col(t) * ds.imu[c + t].w.transpose();
        }
        adam->update(params, lr);
      }
    }
    return sum / static_cast<double>(starts.size());
  };

  TrainReport report;
  report.initial_loss = run_epoch(false, nullptr, 0.0);
  AdamState adam;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr = cosine_lr(cfg.learning_rate, e, cfg.epochs);
    run_epoch(true, &adam, lr);
    report.loss_curve.push_back(run_epoch(false, nullptr, 0.0));
  }
  report.final_loss = report.loss_curve.empty() ? report.initial_loss
                                                : report.loss_curve.back();
  model.calib.gyro_scale = calib_t.value;
  return report;
}

TrainReport train_accel(Denoiser& model, const Dataset& ds) {
  check_training_inputs(ds);
  const auto& cfg = model.config;
  const double dt = (ds.imu[1].t_ns - ds.imu[0].t_ns) * 1e-9;
  const int total = static_cast<int>(ds.imu.size());
  const int chunk = std::min(cfg.chunk, total);
  const auto starts = chunk_starts(total, chunk, cfg.chunk_stride);

  // the trained gyro branch supplies the incremental rotations
  const auto denoised = model.correct_stream(ds.imu);

  Tensor calib_t;
  calib_t.init(3, 3);
  calib_t.value = model.calib.accel_scale;
  auto params = model.accel_net.conv_params();
  params.push_back(&calib_t);

  auto run_epoch = [&](bool train, AdamState* adam, double lr) {
    double sum = 0.0;
    for (int c : starts) {
      const MatX x = featurize(ds.imu, c, chunk);
      const MatX corr = model.accel_net.forward(x);
      const int ext = std::min(chunk + cfg.horizons.back(), total - c);
      std::vector<Vec3> a_hat(ext), w_rot(ext);
      for (int t = 0; t < ext; ++t) {
        w_rot[t] = denoised[c + t].w;
        a_hat[t] = calib_t.value * ds.imu[c + t].a;
        if (t < chunk) a_hat[t] += Vec3(corr.col(t));
      }
      MatX dgrad;
      const double loss = accel_horizon_loss(
          a_hat, w_rot, ds.groundtruth, c, dt, cfg.horizons, cfg.loss_stride,
          kGravityWorld, train ? &dgrad : nullptr);
      sum += loss;
      if (train) {
        model.accel_net.backward(dgrad.leftCols(chunk));
        for (int t = 0; t < ext; ++t) {
          calib_t.grad += dgrad.col(t) * ds.imu[c + t].a.transpose();
        }
        adam->update(params, lr);
      }
    }
    return sum / static_cast<double>(starts.size());
  };

  TrainReport report;
  report.initial_loss = run_epoch(false, nullptr, 0.0);
  AdamState adam;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr = cosine_lr(cfg.learning_rate, e, cfg.epochs);
    run_epoch(true, &adam, lr);
    report.loss_curve.push_back(run_epoch(false, nullptr, 0.0));
  }
  report.final_loss = report.loss_curve.empty() ? report.initial_loss
                                                : report.loss_curve.back();
  model.calib.accel_scale = calib_t.value;
  return report;
}

TrainReport train_quality(Denoiser& model, const Dataset& ds) {
  check_training_inputs(ds);
  const auto& cfg = model.config;
  const double dt = (ds.imu[1].t_ns - ds.imu[0].t_ns) * 1e-9;
  const int total = static_cast<int>(ds.imu.size());
  const int chunk = std::min(cfg.chunk, total);
  const auto starts = chunk_starts(total, chunk, cfg.chunk_stride * 2);
  const double sg = std::max(ds.noise.gyro_white_sigma, 1e-4) / std::sqrt(dt);
  const double sa = std::max(ds.noise.accel_white_sigma, 1e-3) / std::sqrt(dt);
  const std::vector<double> scales = {1.0, 2.0, 5.0, 10.0};

  Rng rng(hash_combine(cfg.seed, 0x9f1u));
  AdamState adam_g, adam_a;
  TrainReport report;

  for (int e = 0; e < cfg.quality_epochs; ++e) {
    const double lr = cosine_lr(cfg.quality_learning_rate, e,
                                cfg.quality_epochs);
    double sum = 0.0;
    int count = 0;
    for (int c : starts) {
      for (double f : scales) {
        const double label = 1.0 - std::log10(f);  // 1 clean, 0 at 10x noise
        const double extra = std::sqrt(std::max(f * f - 1.0, 0.0));
        std::vector<ImuRecord> aug_g(ds.imu.begin() + c,
                                     ds.imu.begin() + c + chunk);
        std::vector<ImuRecord> aug_a = aug_g;
        for (auto& s : aug_g) s.w += extra * sg * rng.gaussian3();
        for (auto& s : aug_a) s.a += extra * sa * rng.gaussian3();

        for (int sensor = 0; sensor < 2; ++sensor) {
          auto& net = sensor == 0 ? model.gyro_net : model.accel_net;
          const MatX x = featurize(sensor == 0 ? aug_g : aug_a, 0, chunk);
          net.forward(x);
          const MatX& feats = net.features();
          for (int t = cfg.window - 1; t < chunk; t += 12) {
            const VecX feat = feats.col(t);
            const double z = net.quality(feat);
            const double err = z - label;
            sum += err * err;
            ++count;
            net.quality_backward(feat, 2.0 * err);
          }
          (sensor == 0 ? adam_g : adam_a).update(net.quality_params(), lr);
        }
      }
    }
    report.loss_curve.push_back(sum / std::max(count, 1));
  }
  report.initial_loss =
      report.loss_curve.empty() ? 0.0 : report.loss_curve.front();
  report.final_loss =
      report.loss_curve.empty() ? 0.0 : report.loss_curve.back();
  return report;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

std::vector<NamedTensor> named_tensors(Denoiser& model) {
  std::vector<NamedTensor> out;
  auto add_net = [&](const std::string& prefix, DilatedTcn& net) {
    for (size_t l = 0; l < net.convs.size(); ++l) {
      const std::string p = prefix + "_conv" + std::to_string(l);
      out.push_back({p + "_w0", &net.convs[l].w_tap0});
      out.push_back({p + "_w1", &net.convs[l].w_tap1});
      out.push_back({p + "_b", &net.convs[l].bias});
    }
    out.push_back({prefix + "_out_w", &net.out_w});
    out.push_back({prefix + "_out_b", &net.out_b});
    out.push_back({prefix + "_q1_w", &net.q1_w});
    out.push_back({prefix + "_q1_b", &net.q1_b});
    out.push_back({prefix + "_q2_w", &net.q2_w});
    out.push_back({prefix + "_q2_b", &net.q2_b});
  };
  add_net("gyro", model.gyro_net);
  add_net("accel", model.accel_net);
  return out;
}

void write_calib_csv(const std::string& path, const CalibrationModel& c) {
  CsvWriter w(path, "name,m00,m01,m02,m10,m11,m12,m20,m21,m22");
  auto row = [&](const std::string& name, const Mat3& m) {
    std::vector<std::string> fields{name};
    for (int i = 0; i < 9; ++i) {
      fields.push_back(format_double(m(i / 3, i % 3)));
    }
    w.row(fields);
  };
  row("gyro_scale", c.gyro_scale);
  row("gyro_misalignment", c.gyro_misalignment);
  row("accel_scale", c.accel_scale);
  row("accel_misalignment", c.accel_misalignment);
}

}  // namespace

void Denoiser::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto& self = const_cast<Denoiser&>(*this);
  auto tensors = named_tensors(self);

  nlohmann::json manifest;
  manifest["format"] = "viokit-denoiser-v1";
  manifest["config"] = {
      {"window", config.window},
      {"layers", config.layers},
      {"channels", config.channels},
      {"kernel", config.kernel},
      {"dilations", config.dilations},
      {"horizons", config.horizons},
      {"epochs", config.epochs},
      {"quality_epochs", config.quality_epochs},
      {"learning_rate", config.learning_rate},
      {"quality_learning_rate", config.quality_learning_rate},
      {"chunk", config.chunk},
      {"chunk_stride", config.chunk_stride},
      {"loss_stride", config.loss_stride},
      {"seed", config.seed},
  };
  std::ofstream bin(dir + "/weights.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + dir + "/weights.bin");
  size_t offset = 0;
  nlohmann::json tlist = nlohmann::json::array();
  for (const auto& nt : tensors) {
    const auto& v = nt.tensor->value;
    tlist.push_back({{"name", nt.name},
                     {"rows", v.rows()},
                     {"cols", v.cols()},
                     {"dtype", "float32"},
                     {"offset", offset}});
    for (int c = 0; c < v.cols(); ++c) {
      for (int r = 0; r < v.rows(); ++r) {
        const float f = static_cast<float>(v(r, c));
        bin.write(reinterpret_cast<const char*>(&f), sizeof(float));
        offset += sizeof(float);
      }
    }
  }
  manifest["tensors"] = tlist;
  std::ofstream mf(dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";
  write_calib_csv(dir + "/calibration.csv", calib);
}

Denoiser Denoiser::load(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error(dir + "/manifest.json not found");
  nlohmann::json manifest;
  mf >> manifest;
  if (manifest.value("format", "") != "viokit-denoiser-v1") {
    throw std::runtime_error(dir + ": unknown denoiser model format");
  }
  DenoiserConfig cfg;
  const auto& jc = manifest["config"];
  cfg.window = jc["window"];
  cfg.layers = jc["layers"];
  cfg.channels = jc["channels"];
  cfg.kernel = jc["kernel"];
  cfg.dilations = jc["dilations"].get<std::vector<int>>();
  cfg.horizons = jc["horizons"].get<std::vector<int>>();
  cfg.epochs = jc["epochs"];
  cfg.quality_epochs = jc["quality_epochs"];
  cfg.learning_rate = jc["learning_rate"];
  cfg.quality_learning_rate = jc["quality_learning_rate"];
  cfg.chunk = jc["chunk"];
  cfg.chunk_stride = jc["chunk_stride"];
  cfg.loss_stride = jc["loss_stride"];
  cfg.seed = jc["seed"];

  Denoiser model;
  model.init(cfg);
  auto tensors = named_tensors(model);

  std::ifstream bin(dir + "/weights.bin", std::ios::binary);
  if (!bin) throw std::runtime_error(dir + "/weights.bin not found");
  for (const auto& tj : manifest["tensors"]) {
    const std::string name = tj["name"];
    const int rows = tj["rows"];
    const int cols = tj["cols"];
    const size_t offset = tj["offset"];
    Tensor* target = nullptr;
    for (auto& nt : tensors) {
      if (nt.name == name) target = nt.tensor;
    }
    if (!target) throw std::runtime_error(dir + ": unknown tensor " + name);
    if (target->value.rows() != rows || target->value.cols() != cols) {
      throw std::runtime_error(dir + ": shape mismatch for " + name);
    }
    bin.seekg(static_cast<std::streamoff>(offset));
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) {
        float f = 0.0f;
        bin.read(reinterpret_cast<char*>(&f), sizeof(float));
        target->value(r, c) = static_cast<double>(f);
      }
    }
    if (!bin) throw std::runtime_error(dir + ": truncated weights.bin");
  }

  const auto calib_csv = read_csv(dir + "/calibration.csv", 10);
  for (const auto& row : calib_csv.rows) {
    Mat3 m;
    for (int i = 0; i < 9; ++i) {
      m(i / 3, i % 3) = parse_double(row[i + 1], dir + "/calibration.csv");
    }
    if (row[0] == "gyro_scale") model.calib.gyro_scale = m;
    else if (row[0] == "gyro_misalignment") model.calib.gyro_misalignment = m;
    else if (row[0] == "accel_scale") model.calib.accel_scale = m;
    else if (row[0] == "accel_misalignment") {
      model.calib.accel_misalignment = m;
    }
  }
  return model;
}

}  // namespace vio
