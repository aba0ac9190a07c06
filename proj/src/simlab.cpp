#include "softsample/simlab.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "softsample/error.hpp"
#include "softsample/io.hpp"
#include "softsample/random.hpp"

namespace softsample {

using nlohmann::ordered_json;

void SceneConfig::validate() const {
  if (n_images <= 0 || n_classes <= 0 || feature_dim <= 0)
    throw UsageError("scene: image, class and feature counts must be positive");
  if (min_objects_per_image <= 0 || max_objects_per_image < min_objects_per_image)
    throw UsageError("scene: objects_per_image range is invalid");
  if (!(image_size > 0 && min_object_size > 0 &&
        max_object_size >= min_object_size && max_object_size <= image_size))
    throw UsageError("scene: object sizes must fit the image");
  if (!(confuser_rate >= 0.0 && confuser_rate <= 1.0))
    throw UsageError("scene: confuser_rate must be in [0,1]");
  if (!(feature_noise_scale >= 0.0) || !(proposal_jitter >= 0.0))
    throw UsageError("scene: noise scales must be non-negative");
  if (proposals_per_object < 0 || background_proposals_per_image < 0)
    throw UsageError("scene: proposal counts must be non-negative");
  if (class_feature_means &&
      (class_feature_means->rows() != n_classes ||
       class_feature_means->cols() != feature_dim))
    throw UsageError("scene: class_feature_means must be n_classes x feature_dim");
}

namespace {

Eigen::VectorXd gaussian_vector(Rng& rng, int dim, double scale) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = scale * rng.normal();
  return v;
}

Eigen::MatrixXd default_class_means(Rng& rng, int n_classes, int dim,
                                    double scale) {
  Eigen::MatrixXd means(n_classes, dim);
  for (int k = 0; k < n_classes; ++k) {
    Eigen::VectorXd v = gaussian_vector(rng, dim, 1.0);
    means.row(k) = (scale / v.norm()) * v.transpose();
  }
  return means;
}

Box clamp_to_image(Box b, double size) {
  b.x_min = std::clamp(b.x_min, 0.0, size);
  b.x_max = std::clamp(b.x_max, 0.0, size);
  b.y_min = std::clamp(b.y_min, 0.0, size);
  b.y_max = std::clamp(b.y_max, 0.0, size);
  return b;
}

Box random_box(Rng& rng, const SceneConfig& cfg) {
  double w = rng.uniform(cfg.min_object_size, cfg.max_object_size);
  double h = rng.uniform(cfg.min_object_size, cfg.max_object_size);
  double x = rng.uniform(0.0, cfg.image_size - w);
  double y = rng.uniform(0.0, cfg.image_size - h);
  return {x, y, x + w, y + h};
}

double max_iou_with(const Box& b, const std::vector<Box>& boxes) {
  double best = 0.0;
  for (const auto& other : boxes) best = std::max(best, iou(b, other));
  return best;
}

// Translation along one axis achieving IoU exactly t against `base`
// (before jitter and clamping).
Box displaced_proposal(Rng& rng, const Box& base, double t, double jitter,
                       double image_size) {
  Box prop = base;
  bool along_x = rng.below(2) == 0;
  double sign = rng.below(2) == 0 ? 1.0 : -1.0;
  if (along_x) {
    double d = base.width() * (1.0 - t) / (1.0 + t);
    prop.x_min += sign * d;
    prop.x_max += sign * d;
  } else {
    double d = base.height() * (1.0 - t) / (1.0 + t);
    prop.y_min += sign * d;
    prop.y_max += sign * d;
  }
  if (jitter > 0.0) {
    double cx = 0.5 * (prop.x_min + prop.x_max);
    double cy = 0.5 * (prop.y_min + prop.y_max);
    double sx = 1.0 + rng.uniform(-jitter, jitter);
    double sy = 1.0 + rng.uniform(-jitter, jitter);
    double hw = 0.5 * prop.width() * sx, hh = 0.5 * prop.height() * sy;
    prop = {cx - hw, cy - hh, cx + hw, cy + hh};
  }
  return clamp_to_image(prop, image_size);
}

}  // namespace

Scene generate_scenes(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  Eigen::MatrixXd means =
      cfg.class_feature_means
          ? *cfg.class_feature_means
          : default_class_means(rng, cfg.n_classes, cfg.feature_dim,
                                cfg.class_mean_scale);

  Scene scene;
  scene.state.feature_dim = cfg.feature_dim;
  for (int k = 0; k < cfg.n_classes; ++k)
    scene.dataset.class_names[k] = "class_" + std::to_string(k);

  for (int i = 0; i < cfg.n_images; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%04d", i);
    ImageRecord img;
    img.image_id = buf;
    img.width = cfg.image_size;
    img.height = cfg.image_size;

    int span = cfg.max_objects_per_image - cfg.min_objects_per_image + 1;
    int n_objects = cfg.min_objects_per_image +
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));

    std::vector<Box> object_boxes;
    std::vector<Eigen::VectorXd> object_features;
    for (int o = 0; o < n_objects; ++o) {
      Box box = random_box(rng, cfg);
      for (int attempt = 0; attempt < 40 && max_iou_with(box, object_boxes) > 0.25;
           ++attempt)
        box = random_box(rng, cfg);
      int class_id = static_cast<int>(rng.below(cfg.n_classes));
      img.annotations.push_back({box, class_id, false, false});
      object_boxes.push_back(box);
      object_features.push_back(
          means.row(class_id).transpose() +
          gaussian_vector(rng, cfg.feature_dim, cfg.feature_noise_scale));
    }

    std::vector<Proposal> proposals;
    std::vector<SceneState::ProposalLatent> latents;
    for (std::size_t o = 0; o < object_boxes.size(); ++o) {
      for (int p = 0; p < cfg.proposals_per_object; ++p) {
        double t = rng.uniform01();
        Box prop = displaced_proposal(rng, object_boxes[o], t,
                                      cfg.proposal_jitter, cfg.image_size);
        double score = std::clamp(0.5 * t + 0.5 * rng.uniform01(), 0.0, 1.0);
        proposals.push_back({prop, score});
        latents.push_back({o, object_features[o],
                           gaussian_vector(rng, cfg.feature_dim,
                                           cfg.feature_noise_scale)});
      }
    }
    for (int p = 0; p < cfg.background_proposals_per_image; ++p) {
      Box box = random_box(rng, cfg);
      for (int attempt = 0; attempt < 40 && max_iou_with(box, object_boxes) > 0.25;
           ++attempt)
        box = random_box(rng, cfg);
      Eigen::VectorXd feature;
      if (rng.uniform01() < cfg.confuser_rate) {
        int k = static_cast<int>(rng.below(cfg.n_classes));
        feature = cfg.confuser_attenuation * means.row(k).transpose() +
                  gaussian_vector(rng, cfg.feature_dim, cfg.feature_noise_scale);
      } else {
        feature = gaussian_vector(rng, cfg.feature_dim, cfg.feature_noise_scale);
      }
      proposals.push_back({box, 0.2 * rng.uniform01()});
      latents.push_back({std::nullopt, feature, feature});
    }

    img.proposals = std::move(proposals);
    scene.state.proposals[img.image_id] = std::move(latents);
    scene.state.object_features[img.image_id] = std::move(object_features);
    scene.dataset.images.push_back(std::move(img));
  }
  return scene;
}

FeatureMap roi_features(const Dataset& ds, const SceneState& state) {
  FeatureMap out;
  for (const auto& img : ds.images) {
    auto it = state.proposals.find(img.image_id);
    if (it == state.proposals.end())
      throw DataError("roi_features: image '" + img.image_id +
                      "' is not part of the generator state");
    std::size_t n = img.proposals ? img.proposals->size() : 0;
    if (it->second.size() != n)
      throw DataError("roi_features: proposal count mismatch for image '" +
                      img.image_id + "'");
    Eigen::MatrixXd features(n, state.feature_dim);
    for (std::size_t p = 0; p < n; ++p) {
      const auto& latent = it->second[p];
      if (latent.object_index) {
        if (*latent.object_index >= img.annotations.size())
          throw DataError("roi_features: stale object index for image '" +
                          img.image_id + "'");
        double t = iou((*img.proposals)[p].box,
                       img.annotations[*latent.object_index].box);
        features.row(p) = (t * latent.target_feature +
                           (1.0 - t) * latent.background_feature)
                              .transpose();
      } else {
        features.row(p) = latent.target_feature.transpose();
      }
    }
    out[img.image_id] = std::move(features);
  }
  return out;
}

Eigen::VectorXd ToyDetector::class_probabilities(
    const Eigen::VectorXd& feature) const {
  Eigen::VectorXd z = weights * feature + bias;
  double zmax = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - zmax).exp();
  return e / e.sum();
}

double weighted_softmax_loss(const ToyDetector& det, const Eigen::MatrixXd& X,
                             std::span<const int> labels,
                             const Eigen::VectorXd& weights,
                             Eigen::MatrixXd* grad_weights,
                             Eigen::VectorXd* grad_bias) {
  const auto n = X.rows();
  if (labels.size() != static_cast<std::size_t>(n) || weights.size() != n)
    throw UsageError("weighted_softmax_loss: batch sizes disagree");
  if (grad_weights) grad_weights->setZero(det.weights.rows(), det.weights.cols());
  if (grad_bias) grad_bias->setZero(det.bias.size());

  double weight_sum = weights.sum();
  if (!(weight_sum > 0.0)) return 0.0;

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = weights(i);
    if (w == 0.0) continue;
    int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= det.weights.rows())
      throw UsageError("weighted_softmax_loss: label out of range");
    Eigen::VectorXd x = X.row(i).transpose();
    Eigen::VectorXd p = det.class_probabilities(x);
    loss += w * -std::log(std::max(p(y), 1e-300));
    if (grad_weights || grad_bias) {
      p(y) -= 1.0;
      if (grad_weights) grad_weights->noalias() += w * p * x.transpose();
      if (grad_bias) *grad_bias += w * p;
    }
  }
  loss /= weight_sum;
  if (grad_weights) *grad_weights /= weight_sum;
  if (grad_bias) *grad_bias /= weight_sum;
  return loss;
}

namespace {

struct ImageBatch {
  Eigen::MatrixXd features;
  std::vector<int> labels;  // class id, or n_classes for background
  Eigen::VectorXd weights;
  std::vector<RoISample> samples;  // aligned with rows, for subsampling
};

int foreground_classes(const Dataset& ds) {
  int K = static_cast<int>(ds.class_names.size());
  for (const auto& [id, name] : ds.class_names)
    if (id < 0 || id >= K)
      throw DataError("toy detector requires contiguous class ids 0..K-1");
  return K;
}

std::vector<ImageBatch> build_batches(const Dataset& ds,
                                      const FeatureMap& features,
                                      const ExperimentSpec& spec,
                                      const TrainingScores* scores) {
  WeighOptions opts;
  opts.strategy = spec.strategy;
  opts.gompertz = spec.gompertz;
  opts.assignment = spec.assignment;
  std::vector<WeighRow> rows = weigh_dataset(ds, opts, scores);

  int K = foreground_classes(ds);
  std::map<std::string, std::vector<const WeighRow*>> by_image;
  for (const auto& r : rows)
    if (r.included) by_image[r.image_id].push_back(&r);

  std::vector<ImageBatch> batches;
  for (const auto& [image_id, image_rows] : by_image) {
    auto fit = features.find(image_id);
    if (fit == features.end())
      throw DataError("training features missing for image '" + image_id + "'");
    ImageBatch batch;
    batch.features.resize(static_cast<Eigen::Index>(image_rows.size()),
                          fit->second.cols());
    batch.weights.resize(static_cast<Eigen::Index>(image_rows.size()));
    for (std::size_t i = 0; i < image_rows.size(); ++i) {
      const WeighRow& r = *image_rows[i];
      batch.features.row(static_cast<Eigen::Index>(i)) =
          fit->second.row(static_cast<Eigen::Index>(r.proposal_index));
      batch.labels.push_back(r.sample.positive() ? r.sample.class_id : K);
      batch.weights(static_cast<Eigen::Index>(i)) = r.sample.weight;
      batch.samples.push_back(r.sample);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

ToyDetector train_on_batches(std::vector<ImageBatch>& batches, int K, int dim,
                             const ExperimentSpec& spec, std::uint64_t run_seed,
                             std::vector<double>* epoch_losses) {
  ToyDetector det;
  det.n_classes = K;
  det.weights = Eigen::MatrixXd::Zero(K + 1, dim);
  det.bias = Eigen::VectorXd::Zero(K + 1);

  Rng order_rng(derive_seed(run_seed, "epoch-order"));
  std::vector<std::size_t> order(batches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Eigen::MatrixXd grad_w(K + 1, dim);
  Eigen::VectorXd grad_b(K + 1);
  for (int epoch = 0; epoch < spec.trainer.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      ImageBatch& batch = batches[order[step]];
      double loss;
      if (batch.samples.size() >
          static_cast<std::size_t>(spec.assignment.minibatch_size)) {
        std::uint64_t sub_seed = derive_seed(
            run_seed, "minibatch",
            static_cast<std::uint64_t>(epoch) * batches.size() + order[step]);
        std::vector<std::size_t> keep =
            sample_minibatch_indices(batch.samples, spec.assignment, sub_seed);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(keep.size()),
                          batch.features.cols());
        std::vector<int> labels;
        Eigen::VectorXd w(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
          X.row(static_cast<Eigen::Index>(i)) =
              batch.features.row(static_cast<Eigen::Index>(keep[i]));
          labels.push_back(batch.labels[keep[i]]);
          w(static_cast<Eigen::Index>(i)) =
              batch.weights(static_cast<Eigen::Index>(keep[i]));
        }
        loss = weighted_softmax_loss(det, X, labels, w, &grad_w, &grad_b);
      } else {
        loss = weighted_softmax_loss(det, batch.features, batch.labels,
                                     batch.weights, &grad_w, &grad_b);
      }
      if (!std::isfinite(loss))
        throw NumericError("toy detector diverged at epoch " +
                           std::to_string(epoch));
      det.weights.noalias() -= spec.trainer.learning_rate * grad_w;
      det.bias -= spec.trainer.learning_rate * grad_b;
      epoch_loss += loss;
      ++n_batches;
    }
    if (epoch_losses)
      epoch_losses->push_back(n_batches ? epoch_loss / static_cast<double>(n_batches)
                                        : 0.0);
  }
  return det;
}

}  // namespace

ToyDetector train_toy_detector(const Dataset& curated,
                               const FeatureMap& features,
                               const ExperimentSpec& spec,
                               std::uint64_t run_seed,
                               std::vector<double>* epoch_losses) {
  int K = foreground_classes(curated);
  int dim = features.empty() ? 0 : static_cast<int>(features.begin()->second.cols());
  if (dim == 0) throw DataError("train_toy_detector: empty feature map");

  if (spec.strategy == Strategy::score_soft) {
    // Two rounds: a baseline detector first, then retrain from scratch with
    // score-based weights derived from its training-set scores.
    ExperimentSpec round1 = spec;
    round1.strategy = Strategy::baseline;
    ToyDetector prior = train_toy_detector(curated, features, round1,
                                           derive_seed(run_seed, "round1"));
    TrainingScores scores = score_training_set(prior, curated, features);
    auto batches = build_batches(curated, features, spec, &scores);
    return train_on_batches(batches, K, dim, spec, run_seed, epoch_losses);
  }

  auto batches = build_batches(curated, features, spec, nullptr);
  return train_on_batches(batches, K, dim, spec, run_seed, epoch_losses);
}

TrainingScores score_training_set(const ToyDetector& det, const Dataset& ds,
                                  const FeatureMap& features) {
  TrainingScores out;
  for (const auto& img : ds.images) {
    if (!img.proposals || img.proposals->empty()) continue;
    auto fit = features.find(img.image_id);
    if (fit == features.end())
      throw DataError("scoring features missing for image '" + img.image_id + "'");
    const Eigen::MatrixXd& X = fit->second;

    std::vector<Eigen::VectorXd> probs;
    probs.reserve(img.proposals->size());
    std::vector<RoIScore> roi_scores;
    for (Eigen::Index p = 0; p < X.rows(); ++p) {
      Eigen::VectorXd pr = det.class_probabilities(X.row(p).transpose());
      int best = 0;
      for (int k = 1; k < det.n_classes; ++k)
        if (pr(k) > pr(best)) best = k;
      roi_scores.push_back({pr(best), best});
      probs.push_back(std::move(pr));
    }
    out.per_roi[img.image_id] = std::move(roi_scores);

    for (const auto& ann : img.annotations) {
      if (ann.dropped) continue;
      std::size_t best_p = 0;
      double best_iou = -1.0;
      for (std::size_t p = 0; p < img.proposals->size(); ++p) {
        double o = iou((*img.proposals)[p].box, ann.box);
        if (o > best_iou) {
          best_iou = o;
          best_p = p;
        }
      }
      out.gt_scores[ann.class_id].push_back(probs[best_p](ann.class_id));
    }
  }
  return out;
}

std::vector<Detection> detect(const ToyDetector& det, const Dataset& ds,
                              const FeatureMap& features) {
  std::vector<Detection> out;
  for (const auto& img : ds.images) {
    if (!img.proposals || img.proposals->empty()) continue;
    auto fit = features.find(img.image_id);
    if (fit == features.end())
      throw DataError("detection features missing for image '" + img.image_id + "'");
    const Eigen::MatrixXd& X = fit->second;
    for (Eigen::Index p = 0; p < X.rows(); ++p) {
      Eigen::VectorXd pr = det.class_probabilities(X.row(p).transpose());
      for (int k = 0; k < det.n_classes; ++k)
        out.push_back({img.image_id, (*img.proposals)[static_cast<std::size_t>(p)].box,
                       k, pr(k)});
    }
  }
  return out;
}

}  // namespace softsample
