#include "roomsense/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "roomsense/config_json.hpp"
#include "roomsense/error.hpp"
#include "roomsense/io.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

std::string to_string(HeadMode m) { return m == HeadMode::multi_label ? "multi_label" : "single_label"; }

HeadMode parse_head_mode(std::string_view s) {
  if (s == "multi_label") return HeadMode::multi_label;
  if (s == "single_label") return HeadMode::single_label;
  throw ConfigError("head mode must be multi_label or single_label, got '" + std::string(s) + "'");
}

std::size_t head_outputs(HeadMode mode, std::size_t classes) { return mode == HeadMode::multi_label ? classes : 2; }

// ---------------------------------------------------------------------------
// Config JSON


void to_json(nlohmann::json& j, const FcnConfig& c) {
  j = {{"in_channels", c.in_channels}, {"filters", c.filters}, {"kernels", c.kernels},
       {"classes", c.classes},         {"head", to_string(c.head)}};
}

void from_json(const nlohmann::json& j, FcnConfig& c) {
  reject_unknown(j, {"in_channels", "filters", "kernels", "classes", "head"}, "fcn");
  FcnConfig d;
  c.in_channels = get_or(j, "in_channels", d.in_channels);
  c.filters = get_or(j, "filters", d.filters);
  c.kernels = get_or(j, "kernels", d.kernels);
  c.classes = get_or(j, "classes", d.classes);
  c.head = parse_head_mode(get_or<std::string>(j, "head", "multi_label"));
}

void to_json(nlohmann::json& j, const LstmConfig& c) {
  j = {{"in_channels", c.in_channels}, {"hidden", c.hidden},   {"bidirectional", c.bidirectional},
       {"dropout", c.dropout},         {"classes", c.classes}, {"head", to_string(c.head)}};
}

void from_json(const nlohmann::json& j, LstmConfig& c) {
  reject_unknown(j, {"in_channels", "hidden", "bidirectional", "dropout", "classes", "head"}, "lstm");
  LstmConfig d;
  c.in_channels = get_or(j, "in_channels", d.in_channels);
  c.hidden = get_or(j, "hidden", d.hidden);
  c.bidirectional = get_or(j, "bidirectional", d.bidirectional);
  c.dropout = get_or(j, "dropout", d.dropout);
  c.classes = get_or(j, "classes", d.classes);
  c.head = parse_head_mode(get_or<std::string>(j, "head", "multi_label"));
}

void to_json(nlohmann::json& j, const InceptionConfig& c) {
  j = {{"in_channels", c.in_channels}, {"filters", c.filters}, {"bottleneck", c.bottleneck},
       {"kernels", c.kernels},         {"depth", c.depth},     {"ensemble", c.ensemble},
       {"classes", c.classes},         {"head", to_string(c.head)}};
}

void from_json(const nlohmann::json& j, InceptionConfig& c) {
  reject_unknown(j, {"in_channels", "filters", "bottleneck", "kernels", "depth", "ensemble", "classes", "head"},
                 "inception");
  InceptionConfig d;
  c.in_channels = get_or(j, "in_channels", d.in_channels);
  c.filters = get_or(j, "filters", d.filters);
  c.bottleneck = get_or(j, "bottleneck", d.bottleneck);
  c.kernels = get_or(j, "kernels", d.kernels);
  c.depth = get_or(j, "depth", d.depth);
  c.ensemble = get_or(j, "ensemble", d.ensemble);
  c.classes = get_or(j, "classes", d.classes);
  c.head = parse_head_mode(get_or<std::string>(j, "head", "multi_label"));
}

void to_json(nlohmann::json& j, const AutoencoderConfig& c) {
  j = {{"in_channels", c.in_channels}, {"hidden", c.hidden}, {"latent", c.latent}, {"length", c.length}};
}

void from_json(const nlohmann::json& j, AutoencoderConfig& c) {
  reject_unknown(j, {"in_channels", "hidden", "latent", "length"}, "autoencoder");
  AutoencoderConfig d;
  c.in_channels = get_or(j, "in_channels", d.in_channels);
  c.hidden = get_or(j, "hidden", d.hidden);
  c.latent = get_or(j, "latent", d.latent);
  c.length = get_or(j, "length", d.length);
}

void to_json(nlohmann::json& j, const HeadConfig& c) {
  j = {{"latent", c.latent}, {"hidden", c.hidden}, {"classes", c.classes}, {"head", to_string(c.head)}};
}

void from_json(const nlohmann::json& j, HeadConfig& c) {
  reject_unknown(j, {"latent", "hidden", "classes", "head"}, "head");
  HeadConfig d;
  c.latent = get_or(j, "latent", d.latent);
  c.hidden = get_or(j, "hidden", d.hidden);
  c.classes = get_or(j, "classes", d.classes);
  c.head = parse_head_mode(get_or<std::string>(j, "head", "multi_label"));
}

// ---------------------------------------------------------------------------
// Model

nlohmann::json Model::architecture() const { return {{"kind", kind()}, {"config", config()}}; }

std::string Model::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  mix(architecture().dump());
  for (const auto& b : params_.buffers()) mix(b.name + shape_string(b.shape));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t param_count(const Model& model) { return model.params().trainable_count(); }

namespace {

void init_conv(ParamStore& ps, const Conv1d& conv, Rng& rng) {
  init_uniform(ps[conv.weight()], glorot_bound(conv.in_channels() * conv.kernel(), conv.filters() * conv.kernel()),
               rng);
}

void init_dense(ParamStore& ps, const Dense& d, Rng& rng) {
  init_uniform(ps[d.weight()], glorot_bound(d.in(), d.out()), rng);
}

void init_lstm(ParamStore& ps, const Lstm& l, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(l.hidden()));
  for (std::size_t d = 0; d < l.directions(); ++d) {
    init_uniform(ps[l.wx(d)], bound, rng);
    init_uniform(ps[l.wh(d)], bound, rng);
    auto& bias = ps[l.b(d)].value;
    std::fill(bias.begin(), bias.end(), 0.0);
    std::fill(bias.begin() + static_cast<std::ptrdiff_t>(l.hidden()),
              bias.begin() + static_cast<std::ptrdiff_t>(2 * l.hidden()), 1.0);
  }
}

void check_lists(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const char* what) {
  if (a.empty() || a.size() != b.size())
    throw ConfigError(std::string(what) + ": filter and kernel lists must be non-empty and of equal length");
  for (auto v : a)
    if (v == 0) throw ConfigError(std::string(what) + ": filter counts must be >= 1");
  for (auto v : b)
    if (v == 0) throw ConfigError(std::string(what) + ": kernel sizes must be >= 1");
}

void check_input(const Tensor& x, std::size_t channels, const char* who) {
  if (x.rank() != 3 || x.dim(1) != channels)
    throw ShapeError(std::string(who) + " expects (N, " + std::to_string(channels) + ", L) input, got " +
                     x.shape_string());
}

}  // namespace

// ---------------------------------------------------------------------------
// FCN

Fcn::Fcn(const FcnConfig& config, std::uint64_t seed) : Model(seed), config_(config) {
  check_lists(config.filters, config.kernels, "fcn");
  if (config.classes < 1 || config.in_channels < 1) throw ConfigError("fcn: classes and in_channels must be >= 1");
  std::size_t in = config.in_channels;
  for (std::size_t b = 0; b < config.filters.size(); ++b) {
    const std::string p = "block" + std::to_string(b);
    blocks_.push_back({Conv1d(params_, p + ".conv", in, config.filters[b], config.kernels[b]),
                       BatchNorm1d(params_, p + ".bn", config.filters[b]), Relu()});
    in = config.filters[b];
  }
  dense_ = Dense(params_, "head", in, head_outputs(config.head, config.classes));
  Rng rng(seed);
  for (const auto& b : blocks_) init_conv(params_, b.conv, rng);
  init_dense(params_, dense_, rng);
}

Tensor Fcn::forward(const Tensor& x, Mode mode) {
  check_input(x, config_.in_channels, "fcn");
  Tensor h = x;
  for (auto& b : blocks_) h = b.relu.forward(b.bn.forward(params_, b.conv.forward(params_, h), mode));
  feature_map_length_ = h.dim(2);
  features_ = gap_.forward(h);
  return dense_.forward(params_, features_);
}

Tensor Fcn::backward(const Tensor& grad_out) {
  Tensor g = gap_.backward(dense_.backward(params_, grad_out));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    g = it->conv.backward(params_, it->bn.backward(params_, it->relu.backward(g)));
  return g;
}

// ---------------------------------------------------------------------------
// LSTM classifier

LstmClassifier::LstmClassifier(const LstmConfig& config, std::uint64_t seed)
    : Model(seed),
      config_(config),
      lstm_(params_, "lstm", config.in_channels, config.hidden, config.bidirectional, LstmOutput::last),
      dropout_(config.dropout),
      dense_(params_, "head", config.hidden * (config.bidirectional ? 2 : 1),
             head_outputs(config.head, config.classes)) {
  if (config.classes < 1) throw ConfigError("lstm: classes must be >= 1");
  Rng rng(seed);
  init_lstm(params_, lstm_, rng);
  init_dense(params_, dense_, rng);
}

Tensor LstmClassifier::forward(const Tensor& x, Mode mode) {
  check_input(x, config_.in_channels, "lstm classifier");
  features_ = lstm_.forward(params_, x);
  return dense_.forward(params_, dropout_.forward(features_, mode, dropout_seed_));
}

Tensor LstmClassifier::backward(const Tensor& grad_out) {
  return lstm_.backward(params_, dropout_.backward(dense_.backward(params_, grad_out)));
}

// ---------------------------------------------------------------------------
// Inception

InceptionNet::InceptionNet(const InceptionConfig& config, std::uint64_t seed) : Model(seed), config_(config) {
  if (config.depth == 0 || config.depth % 3 != 0) throw ConfigError("inception: depth must be a positive multiple of 3");
  if (config.ensemble < 1) throw ConfigError("inception: ensemble size must be >= 1");
  if (config.filters < 1 || config.bottleneck < 1 || config.kernels.empty())
    throw ConfigError("inception: filters, bottleneck and kernels must be non-empty");
  const std::size_t out_ch = config.filters * (config.kernels.size() + 1);
  std::size_t in = config.in_channels;
  std::size_t block_in = in;
  for (std::size_t m = 0; m < config.depth; ++m) {
    const std::string p = module_prefix(m);
    Module mod;
    mod.bottleneck = Conv1d(params_, p + ".bottleneck", in, config.bottleneck, 1);
    for (std::size_t k = 0; k < config.kernels.size(); ++k)
      mod.branches.emplace_back(params_, p + ".branch" + std::to_string(k), config.bottleneck, config.filters,
                                config.kernels[k]);
    mod.pool = MaxPool1d(3);
    mod.pool_conv = Conv1d(params_, p + ".pool_conv", in, config.filters, 1);
    mod.bn = BatchNorm1d(params_, p + ".bn", out_ch);
    mod.branch_channels = config.filters;
    modules_.push_back(std::move(mod));
    in = out_ch;
    if (m % 3 == 2) {
      const std::string s = "shortcut" + std::to_string(m / 3);
      Shortcut sc;
      sc.projection = block_in != out_ch;
      if (sc.projection) {
        sc.conv = Conv1d(params_, s + ".conv", block_in, out_ch, 1);
        sc.bn = BatchNorm1d(params_, s + ".bn", out_ch);
      }
      shortcuts_.push_back(std::move(sc));
      block_in = out_ch;
    }
  }
  dense_ = Dense(params_, "head", out_ch, head_outputs(config.head, config.classes));
  Rng rng(seed);
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    init_conv(params_, modules_[m].bottleneck, rng);
    for (const auto& b : modules_[m].branches) init_conv(params_, b, rng);
    init_conv(params_, modules_[m].pool_conv, rng);
  }
  for (const auto& s : shortcuts_)
    if (s.projection) init_conv(params_, s.conv, rng);
  init_dense(params_, dense_, rng);
}

Tensor InceptionNet::module_forward(Module& m, const Tensor& x, Mode mode) {
  const Tensor b = m.bottleneck.forward(params_, x);
  std::vector<Tensor> outs;
  for (auto& conv : m.branches) outs.push_back(conv.forward(params_, b));
  outs.push_back(m.pool_conv.forward(params_, m.pool.forward(x)));
  std::vector<const Tensor*> parts;
  for (const auto& o : outs) parts.push_back(&o);
  return m.relu.forward(m.bn.forward(params_, concat_channels(parts), mode));
}

Tensor InceptionNet::module_backward(Module& m, const Tensor& g) {
  const Tensor gcat = m.bn.backward(params_, m.relu.backward(g));
  const std::size_t nf = m.branch_channels;
  Tensor gb;
  for (std::size_t k = 0; k < m.branches.size(); ++k) {
    Tensor gk = m.branches[k].backward(params_, slice_channels(gcat, k * nf, nf));
    gb = gb.empty() ? std::move(gk) : add(gb, gk);
  }
  const Tensor gpool = m.pool.backward(m.pool_conv.backward(params_, slice_channels(gcat, m.branches.size() * nf, nf)));
  return add(m.bottleneck.backward(params_, gb), gpool);
}

Tensor InceptionNet::forward(const Tensor& x, Mode mode) {
  check_input(x, config_.in_channels, "inception");
  block_in_.clear();
  block_out_.clear();
  Tensor h = x;
  for (std::size_t blk = 0; blk < shortcuts_.size(); ++blk) {
    block_in_.push_back(h);
    Tensor y = h;
    for (std::size_t m = 3 * blk; m < 3 * blk + 3; ++m) y = module_forward(modules_[m], y, mode);
    auto& sc = shortcuts_[blk];
    const Tensor s = sc.projection ? sc.bn.forward(params_, sc.conv.forward(params_, h), mode) : h;
    h = sc.relu.forward(add(y, s));
    block_out_.push_back(h);
  }
  features_ = gap_.forward(h);
  return dense_.forward(params_, features_);
}

Tensor InceptionNet::backward(const Tensor& grad_out) {
  Tensor g = gap_.backward(dense_.backward(params_, grad_out));
  for (std::size_t blk = shortcuts_.size(); blk-- > 0;) {
    auto& sc = shortcuts_[blk];
    const Tensor gsum = sc.relu.backward(g);
    Tensor gm = gsum;
    for (std::size_t m = 3 * blk + 3; m-- > 3 * blk;) gm = module_backward(modules_[m], gm);
    const Tensor gs = sc.projection ? sc.conv.backward(params_, sc.bn.backward(params_, gsum)) : gsum;
    g = add(gm, gs);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Autoencoder

namespace {

std::vector<Lstm> make_encoder(ParamStore& ps, const AutoencoderConfig& c) {
  if (c.latent < 1 || c.in_channels < 1 || c.length < 1)
    throw ConfigError("autoencoder: in_channels, latent and length must be >= 1");
  std::vector<Lstm> layers;
  std::size_t in = c.in_channels;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    layers.emplace_back(ps, "encoder.lstm" + std::to_string(i), in, c.hidden[i], false, LstmOutput::sequence);
    in = c.hidden[i];
  }
  layers.emplace_back(ps, "encoder.lstm" + std::to_string(c.hidden.size()), in, c.latent, false, LstmOutput::last);
  return layers;
}

Tensor encoder_forward(std::vector<Lstm>& layers, const ParamStore& ps, const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers) h = l.forward(ps, h);
  return h;
}

Tensor encoder_backward(std::vector<Lstm>& layers, ParamStore& ps, const Tensor& g) {
  Tensor h = g;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) h = it->backward(ps, h);
  return h;
}

Tensor repeat_over_time(const Tensor& z, std::size_t len) {
  const std::size_t n = z.dim(0), d = z.dim(1);
  Tensor r({n, d, len});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t t = 0; t < len; ++t) r.at(b, k, t) = z.at(b, k);
  return r;
}

}  // namespace

Autoencoder::Autoencoder(const AutoencoderConfig& config, std::uint64_t seed)
    : Model(seed), config_(config), encoder_(make_encoder(params_, config)) {
  std::vector<std::size_t> sizes = {config.latent};
  for (auto it = config.hidden.rbegin(); it != config.hidden.rend(); ++it) sizes.push_back(*it);
  std::size_t in = config.latent;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    decoder_.emplace_back(params_, "decoder.lstm" + std::to_string(i), in, sizes[i], false, LstmOutput::sequence);
    in = sizes[i];
  }
  output_ = Dense(params_, "decoder.output", in, config.in_channels);
  Rng rng(seed);
  for (const auto& l : encoder_) init_lstm(params_, l, rng);
  for (const auto& l : decoder_) init_lstm(params_, l, rng);
  init_dense(params_, output_, rng);
}

Tensor Autoencoder::encode(const Tensor& x) {
  check_input(x, config_.in_channels, "autoencoder");
  features_ = encoder_forward(encoder_, params_, x);
  return features_;
}

Tensor Autoencoder::decode(const Tensor& z, std::size_t length) {
  if (z.rank() != 2 || z.dim(1) != config_.latent) throw ShapeError("decode expects (N, latent), got " + z.shape_string());
  last_length_ = length;
  Tensor h = repeat_over_time(z, length);
  for (auto& l : decoder_) h = l.forward(params_, h);
  return from_steps(output_.forward(params_, to_steps(h)), z.dim(0), length);
}

Tensor Autoencoder::forward(const Tensor& x, Mode) { return decode(encode(x), x.dim(2)); }

Tensor Autoencoder::backward(const Tensor& grad_out) {
  const std::size_t n = grad_out.dim(0), len = last_length_;
  const Tensor g_rows = output_.backward(params_, to_steps(grad_out));
  Tensor g = from_steps(g_rows, n, len);
  for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) g = it->backward(params_, g);
  Tensor gz({n, config_.latent});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < config_.latent; ++k)
      for (std::size_t t = 0; t < len; ++t) gz.at(b, k) += g.at(b, k, t);
  return encoder_backward(encoder_, params_, gz);
}

// ---------------------------------------------------------------------------
// Encoder classifier

EncoderClassifier::EncoderClassifier(const AutoencoderConfig& encoder, const HeadConfig& head, std::uint64_t seed)
    : Model(seed), encoder_config_(encoder), head_(head), encoder_(make_encoder(params_, encoder)) {
  if (head.latent != 0 && head.latent != encoder.latent)
    throw ConfigError("head expects latent size " + std::to_string(head.latent) + " but the encoder produces " +
                      std::to_string(encoder.latent));
  if (head.hidden < 1 || head.classes < 1) throw ConfigError("head: hidden and classes must be >= 1");
  head_.latent = encoder.latent;
  hidden_ = Dense(params_, "head.hidden", encoder.latent, head.hidden);
  out_ = Dense(params_, "head.out", head.hidden, head_outputs(head.head, head.classes));
  Rng rng(seed);
  for (const auto& l : encoder_) init_lstm(params_, l, rng);
  init_dense(params_, hidden_, rng);
  init_dense(params_, out_, rng);
  params_.set_trainable("encoder.", false);
}

EncoderClassifier::EncoderClassifier(const Autoencoder& trained, const HeadConfig& head, std::uint64_t seed)
    : EncoderClassifier(trained.autoencoder_config(), head, seed) {
  for (auto& b : params_.buffers()) {
    if (b.name.rfind("encoder.", 0) != 0) continue;
    const Buffer* src = trained.params().find(b.name);
    if (!src || src->shape != b.shape) throw SchemaError("trained autoencoder lacks buffer '" + b.name + "'");
    b.value = src->value;
  }
}

nlohmann::json EncoderClassifier::config() const { return {{"encoder", encoder_config_}, {"head", head_}}; }

bool EncoderClassifier::encoder_trainable() const {
  for (const auto& b : params_.buffers())
    if (b.trainable && b.name.rfind("encoder.", 0) == 0) return true;
  return false;
}

Tensor EncoderClassifier::forward(const Tensor& x, Mode) {
  check_input(x, encoder_config_.in_channels, "encoder classifier");
  features_ = encoder_forward(encoder_, params_, x);
  return out_.forward(params_, relu_.forward(hidden_.forward(params_, features_)));
}

Tensor EncoderClassifier::backward(const Tensor& grad_out) {
  const Tensor gz = hidden_.backward(params_, relu_.backward(out_.backward(params_, grad_out)));
  if (!encoder_trainable()) return {};
  return encoder_backward(encoder_, params_, gz);
}

// ---------------------------------------------------------------------------
// Factories

std::unique_ptr<Model> build_fcn(const FcnConfig& config, std::uint64_t seed) {
  return std::make_unique<Fcn>(config, seed);
}
std::unique_ptr<Model> build_lstm_classifier(const LstmConfig& config, std::uint64_t seed) {
  return std::make_unique<LstmClassifier>(config, seed);
}
std::unique_ptr<Model> build_inception(const InceptionConfig& config, std::uint64_t seed) {
  return std::make_unique<InceptionNet>(config, seed);
}
std::unique_ptr<Model> build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed) {
  return std::make_unique<Autoencoder>(config, seed);
}
std::unique_ptr<Model> build_encoder_classifier(const Autoencoder& trained, const HeadConfig& head,
                                                std::uint64_t seed) {
  return std::make_unique<EncoderClassifier>(trained, head, seed);
}

std::unique_ptr<Model> build_model(const nlohmann::json& architecture, std::uint64_t seed) {
  const std::string kind = architecture.at("kind").get<std::string>();
  const auto& cfg = architecture.at("config");
  if (kind == "fcn") return build_fcn(cfg.get<FcnConfig>(), seed);
  if (kind == "lstm") return build_lstm_classifier(cfg.get<LstmConfig>(), seed);
  if (kind == "inception") return build_inception(cfg.get<InceptionConfig>(), seed);
  if (kind == "autoencoder") return build_autoencoder(cfg.get<AutoencoderConfig>(), seed);
  if (kind == "encoder_classifier")
    return std::make_unique<EncoderClassifier>(cfg.at("encoder").get<AutoencoderConfig>(),
                                               cfg.at("head").get<HeadConfig>(), seed);
  throw ConfigError("unknown model kind '" + kind + "'");
}

Tensor predict_proba(Model& model, const Tensor& x) {
  const Tensor logits = model.forward(x, Mode::eval);
  return model.head_mode() == HeadMode::multi_label ? sigmoid(logits) : softmax_over_classes(logits);
}

Classifier::Classifier(const Classifier& other) : mode(other.mode) {
  for (const auto& m : other.members) members.push_back(m->clone());
}

Classifier& Classifier::operator=(const Classifier& other) {
  if (this != &other) {
    Classifier copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::size_t Classifier::classes() const {
  if (members.empty()) return 0;
  return mode == HeadMode::multi_label ? members.front()->classes() : members.size();
}

Tensor Classifier::predict(const Tensor& x) const {
  if (members.empty()) throw StateError("classifier has no members");
  if (mode == HeadMode::multi_label) return ensemble_predict(members, x);
  const std::size_t n = x.dim(0);
  Tensor out({n, members.size()});
  for (std::size_t k = 0; k < members.size(); ++k) {
    auto copy = members[k]->clone();
    const Tensor p = predict_proba(*copy, x);
    for (std::size_t i = 0; i < n; ++i) out.at(i, k) = p.at(i, 1);
  }
  return out;
}

Tensor ensemble_predict(const std::vector<std::unique_ptr<Model>>& models, const Tensor& x) {
  if (models.empty()) throw StateError("empty ensemble");
  Tensor sum;
  for (const auto& m : models) {
    auto copy = m->clone();
    const Tensor p = predict_proba(*copy, x);
    sum = sum.empty() ? p : add(sum, p);
  }
  if (models.size() > 1)
    for (double& v : sum.values()) v /= static_cast<double>(models.size());
  return sum;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& base, const Model& model, const CheckpointMeta& meta) {
  nlohmann::json table = nlohmann::json::array();
  std::vector<double> blob;
  for (const auto& b : model.params().buffers()) {
    table.push_back({{"name", b.name},
                     {"shape", b.shape},
                     {"offset", blob.size()},
                     {"count", b.size()},
                     {"trainable", b.trainable},
                     {"state", b.state}});
    blob.insert(blob.end(), b.value.begin(), b.value.end());
  }
  const nlohmann::json manifest{{"format", "roomsense-checkpoint/1"},
                                {"architecture", model.architecture()},
                                {"fingerprint", model.fingerprint()},
                                {"seed", meta.seed},
                                {"step", meta.step},
                                {"buffers", table}};
  io::write_json(base + ".json", manifest);
  io::write_f64(base + ".bin", blob);
}

namespace {

nlohmann::json read_manifest(const std::string& base) {
  auto manifest = io::read_json(base + ".json");
  if (manifest.value("format", "") != "roomsense-checkpoint/1")
    throw SchemaError("'" + base + ".json' is not a checkpoint manifest");
  return manifest;
}

}  // namespace

CheckpointMeta load_checkpoint(const std::string& base, Model& model) {
  const auto manifest = read_manifest(base);
  const std::string fp = manifest.at("fingerprint").get<std::string>();
  if (fp != model.fingerprint())
    throw SchemaError("checkpoint fingerprint " + fp + " does not match the model's " + model.fingerprint());
  const auto blob = io::read_f64(base + ".bin");
  for (const auto& entry : manifest.at("buffers")) {
    Buffer* b = model.params().find(entry.at("name").get<std::string>());
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (!b || b->size() != count || offset + count > blob.size())
      throw SchemaError("checkpoint buffer '" + entry.at("name").get<std::string>() + "' does not fit the model");
    std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(offset), count, b->value.begin());
  }
  return {manifest.at("seed").get<std::uint64_t>(), manifest.at("step").get<std::uint64_t>()};
}

std::unique_ptr<Model> load_model(const std::string& base) {
  const auto manifest = read_manifest(base);
  auto model = build_model(manifest.at("architecture"), manifest.at("seed").get<std::uint64_t>());
  load_checkpoint(base, *model);
  return model;
}

void save_classifier(const std::string& dir, const Classifier& c) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc{{"format", "roomsense-classifier/1"}, {"head", to_string(c.mode)}, {"members", nlohmann::json::array()}};
  for (std::size_t i = 0; i < c.members.size(); ++i) {
    const std::string name = "member" + std::to_string(i);
    save_checkpoint(dir + "/" + name, *c.members[i], {c.members[i]->seed(), 0});
    doc["members"].push_back(name);
  }
  io::write_json(dir + "/classifier.json", doc);
}

Classifier load_classifier(const std::string& dir) {
  const auto doc = io::read_json(dir + "/classifier.json");
  if (doc.value("format", "") != "roomsense-classifier/1") throw SchemaError("'" + dir + "' holds no classifier");
  Classifier c;
  c.mode = parse_head_mode(doc.at("head").get<std::string>());
  for (const auto& name : doc.at("members")) c.members.push_back(load_model(dir + "/" + name.get<std::string>()));
  if (c.members.empty()) throw SchemaError("classifier in '" + dir + "' has no members");
  return c;
}

}  // namespace roomsense
