#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "softsample/curation.hpp"
#include "softsample/dataset.hpp"
#include "softsample/eval.hpp"
#include "softsample/sampling.hpp"
#include "softsample/weigh.hpp"

namespace softsample {

// Synthetic scene family. Objects carry latent feature vectors near their
// class mean; proposals cover the full IoU range against their object, plus
// background proposals of which a confuser_rate fraction mimic a class
// (an unannotated look-alike the detector must still learn to reject).
struct SceneConfig {
  int n_images = 60;
  int n_classes = 4;
  int feature_dim = 16;
  int min_objects_per_image = 2;
  int max_objects_per_image = 6;
  double image_size = 1000.0;
  double min_object_size = 80.0;
  double max_object_size = 240.0;
  double class_mean_scale = 1.5;
  std::optional<Eigen::MatrixXd> class_feature_means;  // K x d; generated from seed when absent
  double feature_noise_scale = 0.3;
  double confuser_rate = 0.12;
  double confuser_attenuation = 0.65;
  double proposal_jitter = 0.05;
  int proposals_per_object = 3;
  int background_proposals_per_image = 12;
  std::uint64_t seed = 1;

  void validate() const;  // throws UsageError
};

// Generator latents for one dataset; keyed by image id, aligned with the
// proposal order of the emitted Dataset.
struct SceneState {
  struct ProposalLatent {
    std::optional<std::size_t> object_index;  // annotation index in the image
    Eigen::VectorXd target_feature;           // object (or confuser) feature
    Eigen::VectorXd background_feature;
  };
  int feature_dim = 0;
  std::map<std::string, std::vector<ProposalLatent>> proposals;
  std::map<std::string, std::vector<Eigen::VectorXd>> object_features;
};

struct Scene {
  Dataset dataset;
  SceneState state;
};

Scene generate_scenes(const SceneConfig& cfg);

using FeatureMap = std::map<std::string, Eigen::MatrixXd>;  // rows = proposals

// feature(p) = t * object_feature + (1 - t) * background_feature with t the
// proposal's IoU against its source object; background proposals use their
// stored (background or confuser) feature. Throws DataError when ds does not
// line up with the generator state.
FeatureMap roi_features(const Dataset& ds, const SceneState& state);

// Linear softmax head over n_classes + 1 outputs (last row = background).
struct ToyDetector {
  Eigen::MatrixXd weights;  // (K+1) x d
  Eigen::VectorXd bias;     // K+1
  int n_classes = 0;

  Eigen::VectorXd class_probabilities(const Eigen::VectorXd& feature) const;
};

struct TrainerConfig {
  double learning_rate = 0.5;
  int epochs = 30;
};

struct ExperimentSpec {
  Strategy strategy = Strategy::baseline;
  double drop_rate = 0.0;
  GompertzParams gompertz;
  AssignmentConfig assignment;
  TrainerConfig trainer;
  SceneConfig scene;
  int n_seeds = 20;
};

// Weighted cross entropy over one batch: sum_i w_i * nll_i / sum_i w_i.
// Fills the parameter gradients when the out-pointers are non-null. Batches
// whose weights sum to zero contribute nothing (returns 0 with zero grads).
double weighted_softmax_loss(const ToyDetector& det, const Eigen::MatrixXd& X,
                             std::span<const int> labels,
                             const Eigen::VectorXd& weights,
                             Eigen::MatrixXd* grad_weights = nullptr,
                             Eigen::VectorXd* grad_bias = nullptr);

// Mini-batch gradient descent on the weighted cross entropy
//   L(batch) = sum_i w_i * nll_i / sum_i w_i
// with one batch per image (subsampled via sample_minibatch when an image
// exceeds assignment.minibatch_size). Labels come from kept annotations only;
// the strategy decides the weights, hard-negative filtering drops far
// negatives and upper-bound removes masked RoIs entirely. score-ss first
// trains a baseline round, scores the training set and retrains from scratch
// with score weights. Throws NumericError (with the epoch) on divergence.
ToyDetector train_toy_detector(const Dataset& curated,
                               const FeatureMap& features,
                               const ExperimentSpec& spec,
                               std::uint64_t run_seed,
                               std::vector<double>* epoch_losses = nullptr);

// Softmax class scores per proposal (max non-background class), plus per
// kept annotation the detector's score for the annotation's class at its
// best-matching proposal.
TrainingScores score_training_set(const ToyDetector& det, const Dataset& ds,
                                  const FeatureMap& features);

// One detection per proposal per foreground class, scored by its softmax
// probability.
std::vector<Detection> detect(const ToyDetector& det, const Dataset& ds,
                              const FeatureMap& features);

struct SimulationConfig {
  SceneConfig scene;
  int test_images = 40;
  GompertzParams gompertz;
  AssignmentConfig assignment;
  TrainerConfig trainer;
  std::vector<Strategy> strategies = {
      Strategy::baseline, Strategy::hard_negative, Strategy::overlap_soft,
      Strategy::score_soft, Strategy::upper_bound};
  std::vector<double> drop_rates = {0.0, 0.3, 0.4, 0.5};
  int n_seeds = 20;
  double eval_iou = 0.5;
  ApMode ap_mode = ApMode::all_points;
  std::uint64_t base_seed = 1;
};

SimulationConfig default_simulation_config();
// Strict schema: unknown or ill-typed fields raise DataError naming the
// field. Missing fields fall back to the defaults above.
SimulationConfig parse_simulation_config(const std::string& json_text);
std::string simulation_config_to_json(const SimulationConfig& cfg);

struct RunLog {
  Strategy strategy = Strategy::baseline;
  double drop_rate = 0.0;
  int seed_index = 0;
  std::vector<double> epoch_losses;
  std::string params_digest;
  EvalReport report;
};

struct ExperimentResult {
  Strategy strategy = Strategy::baseline;
  double drop_rate = 0.0;
  std::vector<double> per_seed_map;
  double mean_map = 0.0;
  double sd_map = 0.0;  // sample standard deviation
};

struct SimulationOutput {
  std::vector<ExperimentResult> results;
  std::vector<RunLog> runs;
  std::string table_csv;  // rows = strategies, columns = drop rates
};

// For every seed: generate a train/test scene pair, curate each drop rate,
// train every strategy on the shared curated data and evaluate mAP on the
// fully annotated test split.
SimulationOutput run_strategy_comparison(const SimulationConfig& cfg);

std::string results_to_json(const SimulationOutput& out);

// Writes table.csv, results.json and runs/<strategy>_<rate>_<seed>.json.
void write_simulation_outputs(const SimulationOutput& out,
                              const std::string& out_dir);

}  // namespace softsample
