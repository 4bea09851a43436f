#pragma once

#include "vio/dataset.hpp"
#include "vio/types.hpp"

#include <string>
#include <vector>

namespace vio {

struct DenoiserConfig {
  int window = 128;  // N: input samples per prediction
  int layers = 7;
  int channels = 32;
  int kernel = 2;  // causal taps per conv; receptive field = 1 + sum(dilations)
  std::vector<int> dilations = {1, 2, 4, 8, 16, 32, 64};
  std::vector<int> horizons = {16, 32};
  int epochs = 30;
  int quality_epochs = 12;
  double learning_rate = 2e-3;
  double quality_learning_rate = 1e-2;
  int chunk = 512;        // training subsequence length
  int chunk_stride = 384;
  int loss_stride = 4;    // anchor subsampling inside a chunk
  uint64_t seed = 0;

  int receptive_field() const {
    int rf = 1;
    for (int d : dilations) rf += d * (kernel - 1);
    return rf;
  }
  void validate() const;
};

struct CalibrationModel {
  Mat3 gyro_scale = Mat3::Identity();          // learned
  Mat3 gyro_misalignment = Mat3::Identity();   // fixed identity factor
  Mat3 accel_scale = Mat3::Identity();
  Mat3 accel_misalignment = Mat3::Identity();

  Mat3 gyro_combined() const { return gyro_scale * gyro_misalignment; }
  Mat3 accel_combined() const { return accel_scale * accel_misalignment; }
};

struct DenoiserOutput {
  Vec3 gyro_correction = Vec3::Zero();
  Vec3 accel_correction = Vec3::Zero();
  double zeta_gyro = 0.0;   // [0, 1]
  double zeta_accel = 0.0;  // [0, 1]
  double zeta() const { return zeta_gyro + zeta_accel; }
};

struct DenoisedSample {
  Vec3 w = Vec3::Zero();  // corrected rate
  Vec3 a = Vec3::Zero();  // corrected specific force
  DenoiserOutput raw_output;
};

// Mean data-quality score over one inter-frame IMU set; the override pins
// the weight to 1 regardless of the scores.
double imu_attention_weight(const std::vector<double>& zetas,
                            bool confident_override = false);

// Parameter block with Adam state.
struct Tensor {
  MatX value;
  MatX grad;
  MatX m;
  MatX v;
  void init(int rows, int cols);
};

struct ConvLayer {
  Tensor w_tap0;  // applied to x[t - dilation]
  Tensor w_tap1;  // applied to x[t]
  Tensor bias;
  int dilation = 1;
};

// Causal dilated temporal convolution stack with a linear correction head
// and a two-layer quality head.
class DilatedTcn {
 public:
  void init(const DenoiserConfig& config, int in_channels, uint64_t seed);

  // x: in_channels x T. Returns corrections (3 x T); caches activations.
  MatX forward(const MatX& x);
  const MatX& features() const { return acts_.back(); }

  // Backward from d(loss)/d(corrections); accumulates parameter grads and
  // returns d(loss)/d(input).
  MatX backward(const MatX& d_corr);

  double quality(const VecX& feature) const;  // sigmoid head
  void quality_backward(const VecX& feature, double d_out);

  std::vector<Tensor*> conv_params();
  std::vector<Tensor*> quality_params();
  std::vector<Tensor*> all_params();

  std::vector<ConvLayer> convs;
  Tensor out_w, out_b;
  Tensor q1_w, q1_b, q2_w, q2_b;

 private:
  MatX input_;
  std::vector<MatX> preacts_;
  std::vector<MatX> acts_;
};

class Denoiser {
 public:
  DenoiserConfig config;
  CalibrationModel calib;
  DilatedTcn gyro_net;
  DilatedTcn accel_net;

  void init(const DenoiserConfig& cfg);

  // Correction for the final sample of a window of exactly N samples
  // (Eq.-5 form: corrected = C * raw + correction). Streams shorter than N
  // must be padded by the caller by repeating the first sample.
  DenoisedSample correct(const std::vector<ImuRecord>& window) const;

  // Whole-stream corrections (replicate padding at the stream start).
  std::vector<DenoisedSample> correct_stream(
      const std::vector<ImuRecord>& stream) const;

  void save(const std::string& dir) const;
  static Denoiser load(const std::string& dir);
};

struct TrainReport {
  std::vector<double> loss_curve;  // per epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Stage-1 training of the gyro branch on the rotation horizon loss
// (sum over 16- and 32-step horizons of huber(|log(dR dR_hat^T)|^2)).
TrainReport train_gyro(Denoiser& model, const Dataset& ds);

// Stage-1 training of the accelerometer branch on the position horizon
// loss; requires the gyro branch to be trained first (its corrected rates
// supply the rotations).
TrainReport train_accel(Denoiser& model, const Dataset& ds);

// Stage-2: freezes the conv stacks and trains the quality heads on
// noise-augmented windows labeled with the (log-normalized) noise scale.
TrainReport train_quality(Denoiser& model, const Dataset& ds);

// Rotation horizon loss over corrected rates, plus its analytic gradient.
// Exposed for the finite-difference gradient check.
double gyro_horizon_loss(const std::vector<Vec3>& w_hat,
                         const std::vector<Quat>& q_gt, double dt,
                         const std::vector<int>& horizons, int stride,
                         MatX* d_loss_d_what = nullptr);

// Position horizon loss given corrected specific forces and fixed
// per-sample incremental rotations from the gyro branch.
double accel_horizon_loss(const std::vector<Vec3>& a_hat,
                          const std::vector<Vec3>& w_for_rot,
                          const std::vector<GroundTruthRecord>& gt, int i0,
                          double dt, const std::vector<int>& horizons,
                          int stride, const Vec3& gravity_w,
                          MatX* d_loss_d_ahat = nullptr);

}  // namespace vio
