#include "markush/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "markush/augment.hpp"
#include "markush/errors.hpp"
#include "markush/metrics.hpp"
#include "markush/rng.hpp"

namespace markush {

std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw FormatError("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 1e-5 && learning_rate <= 1e-3))
    throw std::invalid_argument("train: learning_rate must be in [1e-5, 1e-3]");
  if (!(augmentation_probability >= 0.0 && augmentation_probability <= 1.0))
    throw std::invalid_argument("train: augmentation_probability must be in [0, 1]");
  if (max_epochs < 1 || max_epochs > 50)
    throw std::invalid_argument("train: max_epochs must be in [1, 50]");
  if (early_stop_patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (jobs < 1) throw std::invalid_argument("train: jobs must be >= 1");
}

namespace {

// Adam (beta 0.9/0.999, eps 1e-8) or SGD with momentum 0.9. In frozen mode
// only the head segment [begin, end) moves.
struct Optimizer {
  OptimizerKind kind;
  double lr;
  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;

  Optimizer(OptimizerKind k, double learning_rate, std::size_t n)
      : kind(k), lr(learning_rate), m(n, 0.0), v(kind == OptimizerKind::adam ? n : 0, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, std::size_t begin,
            std::size_t end) {
    ++t;
    if (kind == OptimizerKind::adam) {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      for (std::size_t i = begin; i < end; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    } else {
      constexpr double momentum = 0.9;
      for (std::size_t i = begin; i < end; ++i) {
        m[i] = momentum * m[i] + grad[i];
        params[i] -= lr * m[i];
      }
    }
  }
};

std::uint64_t sample_rng_seed(std::uint64_t seed, int epoch, std::size_t sample_index) {
  // Per-sample stream independent of worker scheduling.
  return seed ^ (static_cast<std::uint64_t>(epoch) << 40) ^
         (static_cast<std::uint64_t>(sample_index) + 0xB5297A4D) ;
}

struct EpochStats {
  double loss_sum = 0.0;
};

void run_epoch(ConvNet& model, const std::vector<Patch>& patches,
               const std::vector<std::size_t>& order, const TrainConfig& cfg, int epoch,
               Optimizer& opt, EpochStats& stats) {
  const std::size_t n_params = model.parameters().size();
  const std::size_t param_begin = model.frozen_feature_layers ? model.head_offset() : 0;
  const bool head_only = model.frozen_feature_layers;
  const int input_size = model.config().input_size;

  std::vector<std::vector<double>> slot_grads(static_cast<std::size_t>(cfg.batch_size));
  std::vector<double> slot_loss(static_cast<std::size_t>(cfg.batch_size), 0.0);
  std::vector<double> grad(n_params, 0.0);

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);

    auto work = [&](std::size_t slot_begin, std::size_t step) {
      ConvNet::Workspace ws;
      for (std::size_t s = slot_begin; s < count; s += step) {
        const std::size_t idx = order[start + s];
        const Patch& patch = patches[idx];
        Tensor3 input = preprocess(patch.pixels, input_size);
        if (cfg.augmentation_probability > 0.0) {
          Rng arng(sample_rng_seed(cfg.seed, epoch, idx));
          input = augment(input, cfg.augmentation_probability, arng);
        }
        model.forward(input, ws);
        std::array<double, 2> dlogits;
        slot_loss[s] = softmax_cross_entropy(ws.logits, patch.label ? 1 : 0, &dlogits);
        auto& sg = slot_grads[s];
        sg.assign(n_params, 0.0);
        model.backward(ws, dlogits, sg, head_only, nullptr);
      }
    };

    const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(count)));
    if (workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < workers; ++t)
        pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(workers));
      for (auto& t : pool) t.join();
    }

    // Fixed-order reduction keeps runs byte-reproducible.
    std::fill(grad.begin() + static_cast<std::ptrdiff_t>(param_begin), grad.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t s = 0; s < count; ++s) {
      stats.loss_sum += slot_loss[s];
      const auto& sg = slot_grads[s];
      for (std::size_t i = param_begin; i < n_params; ++i) grad[i] += sg[i];
    }
    for (std::size_t i = param_begin; i < n_params; ++i) grad[i] *= inv;

    opt.step(model.parameters(), grad, param_begin, n_params);
  }
}

void check_two_classes(const std::vector<Patch>& patches, const char* what) {
  bool any_true = false, any_false = false;
  for (const auto& p : patches) (p.label ? any_true : any_false) = true;
  if (!any_true || !any_false)
    throw std::invalid_argument(std::string(what) + ": both classes must be present");
}

}  // namespace

double validation_macro_f1(const ConvNet& model, const std::vector<Patch>& patches, int jobs) {
  if (patches.empty()) throw std::invalid_argument("validation_macro_f1: no patches");
  std::vector<char> preds(patches.size(), 0);

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(patches.size())));
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < patches.size(); i += step)
      preds[i] = model.predict_proba(patches[i].pixels) > 0.5 ? 1 : 0;
  };
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(workers));
    for (auto& t : pool) t.join();
  }

  ConfusionMatrix cm;
  for (std::size_t i = 0; i < patches.size(); ++i) cm.add(patches[i].label, preds[i] != 0);
  return macro_f1(cm);
}

TrainResult train(const ConvNet& init, const std::vector<Patch>& train_patches,
                  const std::vector<Patch>& val_patches, const TrainConfig& cfg) {
  cfg.validate();
  if (train_patches.empty()) throw std::invalid_argument("train: empty training set");
  if (val_patches.empty()) throw std::invalid_argument("train: empty validation set");
  check_two_classes(train_patches, "train");

  TrainResult result;
  result.model = init;
  ConvNet& model = result.model;
  Optimizer opt(cfg.optimizer, cfg.learning_rate, model.parameters().size());

  std::vector<double> best_params = model.parameters();
  double best_f1 = -1.0;
  int best_epoch = 0;
  int since_best = 0;

  std::vector<std::size_t> order(train_patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(cfg.seed ^ (0x5E9ULL + static_cast<std::uint64_t>(epoch) * 0x9E3779B9ULL));
    shuffle_rng.shuffle(order);

    EpochStats stats;
    run_epoch(model, train_patches, order, cfg, epoch, opt, stats);
    const double train_loss = stats.loss_sum / static_cast<double>(train_patches.size());
    const double val_f1 = validation_macro_f1(model, val_patches, cfg.jobs);
    result.history.push_back({epoch, train_loss, val_f1});

    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      best_epoch = epoch;
      best_params = model.parameters();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.early_stop_patience) break;
  }

  model.parameters() = best_params;
  result.best_epoch = best_epoch;
  result.best_val_macro_f1 = best_f1;
  return result;
}

ConvNet train_fixed_epochs(const ConvNet& init, const std::vector<Patch>& patches,
                           const TrainConfig& cfg, int epochs,
                           std::vector<EpochRecord>* history) {
  cfg.validate();
  if (epochs < 1) throw std::invalid_argument("train_fixed_epochs: epochs must be >= 1");
  check_two_classes(patches, "train_fixed_epochs");

  ConvNet model = init;
  Optimizer opt(cfg.optimizer, cfg.learning_rate, model.parameters().size());
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (history) history->clear();
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    Rng shuffle_rng(cfg.seed ^ (0x5E9ULL + static_cast<std::uint64_t>(epoch) * 0x9E3779B9ULL));
    shuffle_rng.shuffle(order);
    EpochStats stats;
    run_epoch(model, patches, order, cfg, epoch, opt, stats);
    if (history)
      history->push_back({epoch, stats.loss_sum / static_cast<double>(patches.size()), 0.0});
  }
  return model;
}

HyperSearchResult hyper_search(const ConvNetConfig& arch, bool frozen_features,
                               const std::vector<Patch>& train_patches,
                               const std::vector<Patch>& val_patches, int n_trials,
                               std::uint64_t seed, const TrainConfig& base) {
  if (n_trials < 1) throw std::invalid_argument("hyper_search: n_trials must be >= 1");

  HyperSearchResult result;
  Rng sampler(seed ^ 0x0B7AEULL);
  double best_score = -1.0;
  int best_trial = -1;

  for (int trial = 0; trial < n_trials; ++trial) {
    TrainConfig cfg = base;
    cfg.learning_rate = std::pow(10.0, sampler.uniform(-5.0, -3.0));
    cfg.optimizer = sampler.uniform_int(0, 1) == 0 ? OptimizerKind::adam : OptimizerKind::sgd;
    cfg.augmentation_probability = sampler.uniform();
    cfg.seed = seed ^ (0x7100ULL + static_cast<std::uint64_t>(trial));

    ConvNet init = ConvNet::create(arch, seed ^ (0x4A00ULL + static_cast<std::uint64_t>(trial)));
    init.frozen_feature_layers = frozen_features;

    const TrainResult tr = train(init, train_patches, val_patches, cfg);
    result.trials.push_back({trial, cfg, tr.best_val_macro_f1, tr.best_epoch});

    if (tr.best_val_macro_f1 > best_score) {
      best_score = tr.best_val_macro_f1;
      best_trial = trial;
    }
  }

  const TrialRecord& winner = result.trials[static_cast<std::size_t>(best_trial)];
  result.best_config = winner.config;
  result.best_epoch = winner.best_epoch;

  // Refit on train + validation for the winning epoch count.
  std::vector<Patch> merged = train_patches;
  merged.insert(merged.end(), val_patches.begin(), val_patches.end());
  ConvNet init = ConvNet::create(arch, seed ^ 0x3F17ULL);
  init.frozen_feature_layers = frozen_features;
  TrainConfig refit_cfg = result.best_config;
  refit_cfg.seed = seed ^ 0x52F1ULL;
  result.final_model =
      train_fixed_epochs(init, merged, refit_cfg, result.best_epoch, &result.final_history);
  return result;
}

}  // namespace markush
