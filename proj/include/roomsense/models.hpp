#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "roomsense/layers.hpp"
#include "roomsense/params.hpp"
#include "roomsense/tensor.hpp"

namespace roomsense {

/// multi_label: one sigmoid output per class, trained with BCE.
/// single_label: one network per class, each with a two-way softmax.
enum class HeadMode { multi_label, single_label };

std::string to_string(HeadMode m);
HeadMode parse_head_mode(std::string_view s);
/// Logit count of one network under the given head mode.
std::size_t head_outputs(HeadMode mode, std::size_t classes);

struct FcnConfig {
  std::size_t in_channels = 9;
  std::vector<std::size_t> filters = {128, 256, 128};
  std::vector<std::size_t> kernels = {8, 5, 3};
  std::size_t classes = 2;
  HeadMode head = HeadMode::multi_label;

  static FcnConfig minimized(std::size_t in_channels = 9) { return {in_channels, {16, 32}, {5, 3}, 2, HeadMode::multi_label}; }
  static FcnConfig optimized(std::size_t in_channels = 9) { return {in_channels, {32, 8}, {5, 3}, 2, HeadMode::multi_label}; }
};

struct LstmConfig {
  std::size_t in_channels = 9;
  std::size_t hidden = 100;
  bool bidirectional = false;
  double dropout = 0.0;
  std::size_t classes = 2;
  HeadMode head = HeadMode::multi_label;

  static LstmConfig optimized(std::size_t in_channels = 9) { return {in_channels, 26, false, 0.2, 2, HeadMode::multi_label}; }
};

struct InceptionConfig {
  std::size_t in_channels = 9;
  std::size_t filters = 32;     // per branch; a module emits 4x this
  std::size_t bottleneck = 32;
  std::vector<std::size_t> kernels = {10, 20, 40};
  std::size_t depth = 6;        // modules; a residual shortcut closes every 3
  std::size_t ensemble = 5;
  std::size_t classes = 2;
  HeadMode head = HeadMode::multi_label;
};

struct AutoencoderConfig {
  std::size_t in_channels = 17;
  std::vector<std::size_t> hidden = {128, 64};  // encoder sizes before the latent layer
  std::size_t latent = 10;
  std::size_t length = 7;
};

struct HeadConfig {
  std::size_t latent = 0;  // expected encoder latent size, 0 = take the encoder's
  std::size_t hidden = 100;
  std::size_t classes = 2;
  HeadMode head = HeadMode::multi_label;
};

void to_json(nlohmann::json& j, const FcnConfig& c);
void from_json(const nlohmann::json& j, FcnConfig& c);
void to_json(nlohmann::json& j, const LstmConfig& c);
void from_json(const nlohmann::json& j, LstmConfig& c);
void to_json(nlohmann::json& j, const InceptionConfig& c);
void from_json(const nlohmann::json& j, InceptionConfig& c);
void to_json(nlohmann::json& j, const AutoencoderConfig& c);
void from_json(const nlohmann::json& j, AutoencoderConfig& c);
void to_json(nlohmann::json& j, const HeadConfig& c);
void from_json(const nlohmann::json& j, HeadConfig& c);

/// A network with its parameters. forward() caches what backward() needs;
/// backward() accumulates parameter gradients and returns d/d input (empty
/// when the input gradient is not needed, e.g. behind a frozen encoder).
class Model {
 public:
  virtual ~Model() = default;

  virtual std::unique_ptr<Model> clone() const = 0;
  /// "fcn", "lstm", "inception", "autoencoder" or "encoder_classifier".
  virtual std::string kind() const = 0;
  virtual nlohmann::json config() const = 0;

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  /// Representation feeding the head in the last forward pass (GAP output,
  /// last hidden state or latent code), shape (N, D).
  virtual const Tensor& features() const { return features_; }

  virtual HeadMode head_mode() const { return HeadMode::multi_label; }
  virtual std::size_t classes() const { return 0; }

  void set_dropout_seed(std::uint64_t seed) noexcept { dropout_seed_ = seed; }

  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// {"kind": ..., "config": ...}
  nlohmann::json architecture() const;
  /// FNV-1a of the architecture document and every buffer's name and shape.
  std::string fingerprint() const;

 protected:
  explicit Model(std::uint64_t seed) : seed_(seed) {}

  ParamStore params_;
  Tensor features_;
  std::uint64_t seed_ = 0;
  std::uint64_t dropout_seed_ = 0;
};

/// Trainable parameter count.
std::size_t param_count(const Model& model);

// ---------------------------------------------------------------------------
// Architectures

/// conv -> batch norm -> relu per block, global average pooling, dense head.
class Fcn final : public Model {
 public:
  Fcn(const FcnConfig& config, std::uint64_t seed);

  std::unique_ptr<Model> clone() const override { return std::make_unique<Fcn>(*this); }
  std::string kind() const override { return "fcn"; }
  nlohmann::json config() const override { return config_; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  HeadMode head_mode() const override { return config_.head; }
  std::size_t classes() const override { return config_.classes; }

  /// Time length of the last block's feature maps in the last forward.
  std::size_t feature_map_length() const noexcept { return feature_map_length_; }

 private:
  struct Block {
    Conv1d conv;
    BatchNorm1d bn;
    Relu relu;
  };
  FcnConfig config_;
  std::vector<Block> blocks_;
  GlobalAvgPool gap_;
  Dense dense_;
  std::size_t feature_map_length_ = 0;
};

/// One recurrent layer read at its last step, dropout, dense head.
class LstmClassifier final : public Model {
 public:
  LstmClassifier(const LstmConfig& config, std::uint64_t seed);

  std::unique_ptr<Model> clone() const override { return std::make_unique<LstmClassifier>(*this); }
  std::string kind() const override { return "lstm"; }
  nlohmann::json config() const override { return config_; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  HeadMode head_mode() const override { return config_.head; }
  std::size_t classes() const override { return config_.classes; }

  const Lstm& lstm() const noexcept { return lstm_; }
  const Dense& dense() const noexcept { return dense_; }

 private:
  LstmConfig config_;
  Lstm lstm_;
  Dropout dropout_;
  Dense dense_;
};

/// One Inception network: modules of (bottleneck conv, three parallel convs
/// plus maxpool -> 1x1 conv, concat, batch norm, relu) with a residual
/// shortcut around every three modules, then GAP and a dense head.
class InceptionNet final : public Model {
 public:
  InceptionNet(const InceptionConfig& config, std::uint64_t seed);

  std::unique_ptr<Model> clone() const override { return std::make_unique<InceptionNet>(*this); }
  std::string kind() const override { return "inception"; }
  nlohmann::json config() const override { return config_; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  HeadMode head_mode() const override { return config_.head; }
  std::size_t classes() const override { return config_.classes; }

  /// Output of residual block `b` in the last forward pass.
  const Tensor& block_output(std::size_t b) const { return block_out_.at(b); }
  const Tensor& block_input(std::size_t b) const { return block_in_.at(b); }
  std::size_t modules() const noexcept { return modules_.size(); }
  /// Buffer-name prefix of module m, e.g. "module3".
  static std::string module_prefix(std::size_t m) { return "module" + std::to_string(m); }

 private:
  struct Module {
    Conv1d bottleneck;
    std::vector<Conv1d> branches;
    MaxPool1d pool;
    Conv1d pool_conv;
    BatchNorm1d bn;
    Relu relu;
    std::size_t branch_channels = 0;
  };
  struct Shortcut {
    bool projection = false;
    Conv1d conv;
    BatchNorm1d bn;
    Relu relu;  // applied to the sum
  };

  Tensor module_forward(Module& m, const Tensor& x, Mode mode);
  Tensor module_backward(Module& m, const Tensor& g);

  InceptionConfig config_;
  std::vector<Module> modules_;
  std::vector<Shortcut> shortcuts_;
  GlobalAvgPool gap_;
  Dense dense_;
  std::vector<Tensor> block_in_, block_out_;
};

/// Stacked recurrent autoencoder. The encoder's last layer is read at its
/// last step to give the latent code; the decoder receives that code at
/// every step, mirrors the encoder sizes and maps each step back to the
/// input channels with a shared dense layer. forward() reconstructs.
class Autoencoder final : public Model {
 public:
  Autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

  std::unique_ptr<Model> clone() const override { return std::make_unique<Autoencoder>(*this); }
  std::string kind() const override { return "autoencoder"; }
  nlohmann::json config() const override { return config_; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

  Tensor encode(const Tensor& x);
  Tensor decode(const Tensor& z, std::size_t length);
  const AutoencoderConfig& autoencoder_config() const noexcept { return config_; }

 private:
  friend class EncoderClassifier;
  AutoencoderConfig config_;
  std::vector<Lstm> encoder_;
  std::vector<Lstm> decoder_;
  Dense output_;
  std::size_t last_length_ = 0;
};

/// The encoder of a trained autoencoder, frozen, under a dense -> relu ->
/// dense head.
class EncoderClassifier final : public Model {
 public:
  EncoderClassifier(const Autoencoder& trained, const HeadConfig& head, std::uint64_t seed);
  /// Fresh (untrained) encoder; used when loading checkpoints.
  EncoderClassifier(const AutoencoderConfig& encoder, const HeadConfig& head, std::uint64_t seed);

  std::unique_ptr<Model> clone() const override { return std::make_unique<EncoderClassifier>(*this); }
  std::string kind() const override { return "encoder_classifier"; }
  nlohmann::json config() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  HeadMode head_mode() const override { return head_.head; }
  std::size_t classes() const override { return head_.classes; }

 private:
  bool encoder_trainable() const;

  AutoencoderConfig encoder_config_;
  HeadConfig head_;
  std::vector<Lstm> encoder_;
  Dense hidden_;
  Relu relu_;
  Dense out_;
};

// ---------------------------------------------------------------------------
// Factories, prediction, checkpoints

std::unique_ptr<Model> build_fcn(const FcnConfig& config, std::uint64_t seed);
std::unique_ptr<Model> build_lstm_classifier(const LstmConfig& config, std::uint64_t seed);
std::unique_ptr<Model> build_inception(const InceptionConfig& config, std::uint64_t seed);
std::unique_ptr<Model> build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed);
std::unique_ptr<Model> build_encoder_classifier(const Autoencoder& trained, const HeadConfig& head,
                                                std::uint64_t seed);
/// Rebuilds an untrained model from an architecture() document.
std::unique_ptr<Model> build_model(const nlohmann::json& architecture, std::uint64_t seed);

/// Head probabilities (N, outputs): sigmoid for multi-label, softmax for
/// single-label. Eval mode.
Tensor predict_proba(Model& model, const Tensor& x);

/// A trained classifier: for multi-label heads, members form an ensemble
/// whose probabilities are averaged; for single-label heads, member k is the
/// two-way network of class k.
struct Classifier {
  HeadMode mode = HeadMode::multi_label;
  std::vector<std::unique_ptr<Model>> members;

  Classifier() = default;
  Classifier(const Classifier& other);
  Classifier& operator=(const Classifier& other);
  Classifier(Classifier&&) noexcept = default;
  Classifier& operator=(Classifier&&) noexcept = default;

  std::size_t classes() const;
  /// Per-class positive probability, (N, K).
  Tensor predict(const Tensor& x) const;
};

/// Average of member probabilities; a one-member ensemble equals the member.
Tensor ensemble_predict(const std::vector<std::unique_ptr<Model>>& models, const Tensor& x);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// `<base>.json` manifest (architecture, fingerprint, seed, step, buffer
/// table) and `<base>.bin` (little-endian f64 values in table order).
void save_checkpoint(const std::string& base, const Model& model, const CheckpointMeta& meta = {});
/// Loads values into `model`; the fingerprints must agree.
CheckpointMeta load_checkpoint(const std::string& base, Model& model);
/// Builds the model the manifest describes and loads it.
std::unique_ptr<Model> load_model(const std::string& base);

void save_classifier(const std::string& dir, const Classifier& c);
Classifier load_classifier(const std::string& dir);

}  // namespace roomsense
