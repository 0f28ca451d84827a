#include "roomsense/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "roomsense/config_json.hpp"
#include "roomsense/error.hpp"
#include "roomsense/layers.hpp"
#include "roomsense/loss.hpp"
#include "roomsense/optim.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

std::string to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "constant"; }

Schedule parse_schedule(std::string_view s) {
  if (s == "cosine") return Schedule::cosine;
  if (s == "constant") return Schedule::constant;
  throw ConfigError("schedule must be cosine or constant, got '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max) throw ConfigError("train.lr_max/lr_min must satisfy 0 <= lr_min <= lr_max, lr_max > 0");
  if (early_stopping && patience < 1) throw ConfigError("train.patience must be >= 1 with early stopping");
  if (min_delta < 0.0) throw ConfigError("train.min_delta must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},     {"batch_size", c.batch_size},
       {"lr_max", c.lr_max},     {"lr_min", c.lr_min},
       {"schedule", to_string(c.schedule)},
       {"early_stopping", c.early_stopping},
       {"patience", c.patience}, {"min_delta", c.min_delta},
       {"seed", c.seed},         {"shuffle", c.shuffle}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"epochs", "batch_size", "lr_max", "lr_min", "schedule", "early_stopping", "patience", "min_delta",
                  "seed", "shuffle"},
                 "train");
  TrainConfig d;
  c.epochs = get_or(j, "epochs", d.epochs);
  c.batch_size = get_or(j, "batch_size", d.batch_size);
  c.lr_max = get_or(j, "lr_max", d.lr_max);
  c.lr_min = get_or(j, "lr_min", d.lr_min);
  c.schedule = parse_schedule(get_or<std::string>(j, "schedule", to_string(d.schedule)));
  c.early_stopping = get_or(j, "early_stopping", d.early_stopping);
  c.patience = get_or(j, "patience", d.patience);
  c.min_delta = get_or(j, "min_delta", d.min_delta);
  c.seed = get_or(j, "seed", d.seed);
  c.shuffle = get_or(j, "shuffle", d.shuffle);
  c.validate();
}

// ---------------------------------------------------------------------------
// History

double History::best_valid_loss() const {
  if (best_epoch == 0) return std::numeric_limits<double>::quiet_NaN();
  return epochs.at(best_epoch - 1).valid_loss;
}

double History::total_seconds() const {
  double s = 0.0;
  for (const auto& e : epochs) s += e.seconds;
  return s;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const History& h) {
  nlohmann::json epochs = nlohmann::json::array(), seconds = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"valid_loss", number_or_null(e.valid_loss)},
                      {"valid_accuracy", number_or_null(e.valid_accuracy)},
                      {"lr", e.lr}});
    seconds.push_back(e.seconds);
  }
  j = {{"epochs", epochs},
       {"best_epoch", h.best_epoch},
       {"stopped_early", h.stopped_early},
       {"meta", {{"seconds", seconds}}}};
}

void from_json(const nlohmann::json& j, History& h) {
  h = {};
  const auto& secs = j.contains("meta") ? j.at("meta").value("seconds", nlohmann::json::array()) : nlohmann::json::array();
  for (std::size_t i = 0; i < j.at("epochs").size(); ++i) {
    const auto& e = j.at("epochs")[i];
    EpochRecord r;
    r.epoch = e.at("epoch").get<std::size_t>();
    r.train_loss = e.at("train_loss").get<double>();
    r.valid_loss = number_or_nan(e.at("valid_loss"));
    r.valid_accuracy = number_or_nan(e.at("valid_accuracy"));
    r.lr = e.at("lr").get<double>();
    r.seconds = i < secs.size() ? secs[i].get<double>() : 0.0;
    h.epochs.push_back(r);
  }
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.stopped_early = j.at("stopped_early").get<bool>();
}

std::string history_csv(const History& h) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,valid_loss,valid_accuracy,lr,seconds\n";
  for (const auto& e : h.epochs) {
    os << e.epoch << ',' << e.train_loss << ',';
    if (std::isfinite(e.valid_loss)) os << e.valid_loss;
    os << ',';
    if (std::isfinite(e.valid_accuracy)) os << e.valid_accuracy;
    os << ',' << e.lr << ',' << e.seconds << '\n';
  }
  return os.str();
}

bool EarlyStopper::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

constexpr std::size_t kEvalChunk = 512;
constexpr std::uint64_t kDropoutSalt = 0x64726f706f7574ULL;

LossResult compute_loss(const Tensor& out, const Tensor& y, Objective objective) {
  switch (objective) {
    case Objective::bce: return bce_with_logits(out, y);
    case Objective::softmax_cross_entropy: return softmax_cross_entropy(out, y);
    case Objective::mse: return mse(out, y);
  }
  throw ConfigError("unknown objective");
}

std::vector<std::size_t> iota_index(std::size_t n, std::size_t begin = 0) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

// Mean loss and, for classification objectives, element-wise accuracy.
std::pair<double, double> evaluate_set(Model& model, const Tensor& x, const Tensor& y, Objective objective) {
  const std::size_t n = x.dim(0);
  double loss = 0.0, correct = 0.0, cells = 0.0;
  for (std::size_t b = 0; b < n; b += kEvalChunk) {
    const std::size_t e = std::min(n, b + kEvalChunk);
    const Tensor xb = x.rows(b, e), yb = y.rows(b, e);
    const Tensor out = model.forward(xb, Mode::eval);
    const double weight = static_cast<double>(e - b);
    loss += compute_loss(out, yb, objective).value * weight;
    if (objective == Objective::bce) {
      for (std::size_t i = 0; i < out.size(); ++i) correct += ((out[i] >= 0.0) == (yb[i] > 0.5)) ? 1.0 : 0.0;
      cells += static_cast<double>(out.size());
    } else if (objective == Objective::softmax_cross_entropy) {
      const std::size_t k = out.dim(1);
      for (std::size_t i = 0; i < e - b; ++i) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < k; ++c)
          if (out.at(i, c) > out.at(i, arg)) arg = c;
        correct += yb.at(i, arg) > 0.5 ? 1.0 : 0.0;
      }
      cells += weight;
    }
  }
  const double acc = cells > 0 ? correct / cells : std::numeric_limits<double>::quiet_NaN();
  return {loss / static_cast<double>(n), acc};
}

}  // namespace

double evaluate_loss(Model& model, const Tensor& x, const Tensor& y, Objective objective) {
  return evaluate_set(model, x, y, objective).first;
}

History fit(Model& model, const Tensor& x, const Tensor& y, const Tensor& valid_x, const Tensor& valid_y,
            Objective objective, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = x.dim(0);
  if (n == 0) throw ShapeError("no training windows");
  if (y.dim(0) != n) throw ShapeError("training inputs and targets disagree in count");
  const bool has_valid = valid_x.rank() > 0 && valid_x.dim(0) > 0;

  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps = static_cast<std::uint64_t>(batches) * cfg.epochs;
  std::uint64_t step = 0;
  AdamState adam;
  EarlyStopper stopper(cfg.patience, cfg.min_delta);
  std::vector<std::vector<double>> best_snapshot;
  History history;
  model.params().zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = iota_index(n);
    if (cfg.shuffle) {
      Rng rng(derive_seed(cfg.seed, epoch));
      rng.shuffle(order);
    }
    double loss_sum = 0.0, lr = cfg.lr_max;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size, end = std::min(n, begin + cfg.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const Tensor xb = x.gather(idx), yb = y.gather(idx);
      model.set_dropout_seed(derive_seed(cfg.seed ^ kDropoutSalt, step));
      const auto loss = compute_loss(model.forward(xb, Mode::train), yb, objective);
      if (!std::isfinite(loss.value))
        throw DivergenceError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
      model.backward(loss.grad);
      lr = cfg.schedule == Schedule::cosine ? cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min) : cfg.lr_max;
      adam_step(model.params(), adam, lr);
      loss_sum += loss.value * static_cast<double>(end - begin);
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.lr = lr;
    if (has_valid) {
      std::tie(rec.valid_loss, rec.valid_accuracy) = evaluate_set(model, valid_x, valid_y, objective);
      if (!std::isfinite(rec.valid_loss))
        throw DivergenceError("training diverged: non-finite validation loss in epoch " + std::to_string(epoch));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);

    if (has_valid && cfg.early_stopping) {
      if (stopper.update(rec.valid_loss)) {
        history.best_epoch = epoch;
        best_snapshot = model.params().snapshot();
      }
      if (stopper.should_stop()) {
        history.stopped_early = true;
        break;
      }
    } else if (has_valid) {
      if (history.best_epoch == 0 || rec.valid_loss < history.epochs[history.best_epoch - 1].valid_loss)
        history.best_epoch = epoch;
    }
  }
  if (!best_snapshot.empty()) model.params().restore(best_snapshot);
  return history;
}

Tensor targets_for(const Model& model, const BinaryMatrix& y, std::size_t class_index) {
  if (model.head_mode() == HeadMode::multi_label) {
    if (y.cols != model.classes())
      throw ShapeError("model has " + std::to_string(model.classes()) + " classes, labels have " + std::to_string(y.cols));
    Tensor t({y.rows, y.cols});
    for (std::size_t i = 0; i < y.data.size(); ++i) t[i] = y.data[i];
    return t;
  }
  if (class_index >= y.cols) throw ShapeError("class index out of range");
  Tensor t({y.rows, 2});
  for (std::size_t i = 0; i < y.rows; ++i) t.at(i, y(i, class_index) ? 1 : 0) = 1.0;
  return t;
}

History train_classifier(Model& model, const WindowSet& train, const WindowSet& valid, const TrainConfig& cfg,
                         std::size_t class_index) {
  const Objective obj = model.head_mode() == HeadMode::multi_label ? Objective::bce : Objective::softmax_cross_entropy;
  const Tensor y = targets_for(model, train.y, class_index);
  const Tensor vy = valid.count() > 0 ? targets_for(model, valid.y, class_index) : Tensor();
  return fit(model, train.x, y, valid.count() > 0 ? valid.x : Tensor(), vy, obj, cfg);
}

TrainedClassifier fit_classifier(const ModelFactory& factory, const WindowSet& train, const WindowSet& valid,
                                 const TrainConfig& cfg, std::size_t members) {
  TrainedClassifier out;
  auto first = factory(derive_seed(cfg.seed, 0));
  out.classifier.mode = first->head_mode();
  const std::size_t count = out.classifier.mode == HeadMode::multi_label ? std::max<std::size_t>(members, 1) : first->classes();
  for (std::size_t i = 0; i < count; ++i) {
    auto model = i == 0 ? std::move(first) : factory(derive_seed(cfg.seed, i));
    TrainConfig member_cfg = cfg;
    member_cfg.seed = derive_seed(cfg.seed, i);
    const std::size_t class_index = out.classifier.mode == HeadMode::single_label ? i : 0;
    out.histories.push_back(train_classifier(*model, train, valid, member_cfg, class_index));
    out.classifier.members.push_back(std::move(model));
  }
  return out;
}

TrainedClassifier fit_classifier(const nlohmann::json& architecture, const WindowSet& train, const WindowSet& valid,
                                 const TrainConfig& cfg) {
  std::size_t members = 1;
  if (architecture.at("kind") == "inception")
    members = architecture.at("config").get<InceptionConfig>().ensemble;
  return fit_classifier([&](std::uint64_t seed) { return build_model(architecture, seed); }, train, valid, cfg, members);
}

History train_autoencoder(Model& autoencoder, const WindowSet& unlabeled, const TrainConfig& cfg,
                          double valid_fraction) {
  if (unlabeled.count() == 0) throw ShapeError("no unlabeled windows");
  if (valid_fraction > 0.0 && unlabeled.count() >= 10) {
    const auto [train, valid] = holdout(unlabeled, valid_fraction, cfg.seed);
    return fit(autoencoder, train.x, train.x, valid.x, valid.x, Objective::mse, cfg);
  }
  return fit(autoencoder, unlabeled.x, unlabeled.x, Tensor(), Tensor(), Objective::mse, cfg);
}

}  // namespace roomsense
