#include "ada/model_zoo.hpp"

#include <cmath>

#include "ada/errors.hpp"
#include "ada/hash.hpp"
#include "ada/serialize.hpp"

namespace ada {

LogitObjective class_logit_objective(std::span<const int> class_index) {
  std::vector<int> idx(class_index.begin(), class_index.end());
  return [idx = std::move(idx)](std::span<const double> logits, int sample, std::span<double> grad) {
    const int t = idx.at(static_cast<std::size_t>(sample));
    if (t < 0 || t >= static_cast<int>(logits.size())) {
      throw ShapeError("class index " + std::to_string(t) + " out of range");
    }
    grad[static_cast<std::size_t>(t)] = 1.0;
    return logits[static_cast<std::size_t>(t)];
  };
}

Classifier::Classifier(std::string id, nn::Sequential net, std::string feature_layer,
                       int num_classes, Shape input_shape)
    : id_(std::move(id)),
      net_(std::move(net)),
      num_classes_(num_classes),
      input_shape_(Shape{1, input_shape.c, input_shape.h, input_shape.w}) {
  if (num_classes_ <= 0) throw ShapeError("classifier needs a positive class count");
  const Shape out = [&] {
    Shape s = input_shape_;
    for (int i = 0; i < net_.size(); ++i) s = net_.layer(i).output_shape(s);
    return s;
  }();
  if (out.c != num_classes_ || out.h != 1 || out.w != 1) {
    throw ShapeError("classifier '" + id_ + "' produces " + out.str() + ", expected " +
                     std::to_string(num_classes_) + " logits");
  }
  set_feature_layer(feature_layer);
}

void Classifier::set_feature_layer(const std::string& name) {
  const int idx = net_.find(name);
  if (idx < 0) {
    throw ShapeError("feature layer '" + name + "' not found in classifier '" + id_ + "'");
  }
  Shape s = input_shape_;
  for (int i = 0; i <= idx; ++i) s = net_.layer(i).output_shape(s);
  if (s.h == 1 && s.w == 1) {
    throw ShapeError("feature layer '" + name + "' does not produce a spatial activation");
  }
  // Attention treats the class-gradient at F as locally constant; that is
  // exact (almost everywhere) only if the head is piecewise linear.
  if (!net_.piecewise_linear(idx + 1)) {
    throw ShapeError("layers after feature layer '" + name + "' must be piecewise linear");
  }
  feature_layer_ = name;
  feature_index_ = idx;
}

void Classifier::check_input(const Shape& s) const {
  if (s.c != input_shape_.c || s.h != input_shape_.h || s.w != input_shape_.w) {
    throw ShapeError("classifier '" + id_ + "' expects samples of " +
                     std::to_string(input_shape_.c) + "x" + std::to_string(input_shape_.h) + "x" +
                     std::to_string(input_shape_.w) + ", got " + s.str());
  }
}

Tensor Classifier::predict(const Tensor& pixels) const {
  check_input(pixels.shape());
  Tensor x = pixels;
  for (int i = 0; i < net_.size(); ++i) x = net_.layer(i).forward(x, nn::Mode::Eval);
  return x;
}

ForwardPass Classifier::forward_with_features(const Tensor& pixels, nn::Mode mode) const {
  check_input(pixels.shape());
  ForwardPass pass;
  pass.acts = net_.forward(pixels, mode);
  pass.feature_slot = feature_index_ + 1;
  return pass;
}

Tensor Classifier::logits_from_features(const Tensor& features) const {
  Tensor x = features;
  for (int i = feature_index_ + 1; i < net_.size(); ++i) x = net_.layer(i).forward(x, nn::Mode::Eval);
  return x;
}

Tensor Classifier::head_backward(const ForwardPass& pass, const Tensor& d_logits,
                                 nn::Mode mode) const {
  nn::Activations head(pass.acts.begin() + pass.feature_slot, pass.acts.end());
  return net_.backward(head, d_logits, mode, feature_index_ + 1, net_.size());
}

Tensor Classifier::trunk_backward(const ForwardPass& pass, const Tensor& d_features, nn::Mode mode,
                                  nn::Gradients* grads) const {
  nn::Activations trunk(pass.acts.begin(), pass.acts.begin() + pass.feature_slot + 1);
  return net_.backward(trunk, d_features, mode, 0, feature_index_ + 1, grads);
}

Tensor Classifier::input_backward(const ForwardPass& pass, const Tensor& d_logits, nn::Mode mode,
                                  nn::Gradients* grads) const {
  return net_.backward(pass.acts, d_logits, mode, 0, net_.size(), grads);
}

Tensor Classifier::grad_wrt(const Tensor& pixels, const LogitObjective& objective,
                            GradTarget target) const {
  const ForwardPass pass = forward_with_features(pixels);
  const Tensor& logits = pass.logits();
  Tensor d_logits(logits.shape());
  for (int n = 0; n < logits.shape().n; ++n) {
    objective(logits.sample(n), n, d_logits.sample(n));
  }
  Tensor d_features = head_backward(pass, d_logits);
  if (target == GradTarget::Features) return d_features;
  Tensor g = trunk_backward(pass, d_features);
  for (double v : g.values()) {
    if (!std::isfinite(v)) throw Error("non-finite input gradient in classifier '" + id_ + "'");
  }
  return g;
}

std::string Classifier::weights_hash() const {
  Sha256 h;
  auto* self = const_cast<Classifier*>(this);
  for (const Tensor* t : self->net_.state()) h.update(*t);
  return h.hex_digest();
}

void Classifier::save(const std::filesystem::path& path) const {
  nlohmann::json header{{"kind", "classifier"},
                        {"id", id_},
                        {"architecture", net_.describe()},
                        {"feature_layer", feature_layer_},
                        {"num_classes", num_classes_},
                        {"input", {input_shape_.c, input_shape_.h, input_shape_.w}}};
  auto* self = const_cast<Classifier*>(this);
  std::vector<const Tensor*> tensors;
  for (Tensor* t : self->net_.state()) tensors.push_back(t);
  save_checkpoint(path, std::move(header), tensors);
}

Classifier Classifier::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.header.value("kind", "") != "classifier") {
    throw IoError(path.string() + " is not a classifier checkpoint");
  }
  nn::Sequential net = nn::Sequential::from_json(ck.header.at("architecture"));
  auto state = net.state();
  if (state.size() != ck.tensors.size()) throw IoError(path.string() + ": tensor count mismatch");
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!(state[i]->shape() == ck.tensors[i].shape())) {
      throw IoError(path.string() + ": tensor shape mismatch at index " + std::to_string(i));
    }
    *state[i] = std::move(ck.tensors[i]);
  }
  const auto& in = ck.header.at("input");
  return Classifier(ck.header.at("id").get<std::string>(), std::move(net),
                    ck.header.at("feature_layer").get<std::string>(),
                    ck.header.at("num_classes").get<int>(),
                    Shape{1, in[0].get<int>(), in[1].get<int>(), in[2].get<int>()});
}

// ------------------------------------------------------------ toy models

std::string to_string(ToyArch arch) {
  switch (arch) {
    case ToyArch::CnnA: return "cnn-a";
    case ToyArch::CnnB: return "cnn-b";
    case ToyArch::LinearProbe: return "linear";
  }
  return "cnn-a";
}

ToyArch parse_toy_arch(const std::string& text) {
  if (text == "cnn-a") return ToyArch::CnnA;
  if (text == "cnn-b") return ToyArch::CnnB;
  if (text == "linear") return ToyArch::LinearProbe;
  throw ConfigError("unknown toy architecture '" + text + "' (cnn-a, cnn-b, linear)");
}

namespace {

void init_all(nn::Sequential& net, std::uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < net.size(); ++i) nn::init_he_normal(net.layer(i), rng);
}

}  // namespace

Classifier make_small_cnn(const std::string& id, int channels, int size,
                          const std::vector<int>& conv_widths, int hidden, int num_classes,
                          std::uint64_t seed) {
  nn::Sequential net;
  net.add("normalize", std::make_unique<nn::Normalize>(std::vector<double>(channels, 0.5),
                                                       std::vector<double>(channels, 0.25)));
  int in = channels;
  int spatial = size;
  const nn::ConvGeometry g{3, 2, 1};
  for (std::size_t i = 0; i < conv_widths.size(); ++i) {
    const std::string k = std::to_string(i + 1);
    net.add("conv" + k, std::make_unique<nn::Conv2d>(in, conv_widths[i], g));
    net.add("relu" + k, std::make_unique<nn::ReLU>());
    in = conv_widths[i];
    spatial = g.out_size(spatial);
  }
  const std::string feature = "relu" + std::to_string(conv_widths.size());
  net.add("fc1", std::make_unique<nn::Linear>(in * spatial * spatial, hidden));
  net.add("relu_fc1", std::make_unique<nn::ReLU>());
  net.add("logits", std::make_unique<nn::Linear>(hidden, num_classes));
  init_all(net, seed);
  return Classifier(id, std::move(net), feature, num_classes, Shape{1, channels, size, size});
}

Classifier make_toy_model(ToyArch arch, const std::string& id, int channels, int size,
                          int num_classes, std::uint64_t seed) {
  switch (arch) {
    case ToyArch::CnnA:
      return make_small_cnn(id, channels, size, {16, 32}, 64, num_classes, seed);
    case ToyArch::CnnB: {
      nn::Sequential net;
      net.add("normalize", std::make_unique<nn::Normalize>(std::vector<double>(channels, 0.45),
                                                           std::vector<double>(channels, 0.3)));
      net.add("conv1", std::make_unique<nn::Conv2d>(channels, 12, nn::ConvGeometry{3, 1, 1}));
      net.add("relu1", std::make_unique<nn::ReLU>());
      net.add("conv2", std::make_unique<nn::Conv2d>(12, 24, nn::ConvGeometry{4, 2, 1}));
      net.add("relu2", std::make_unique<nn::ReLU>());
      net.add("conv3", std::make_unique<nn::Conv2d>(24, 32, nn::ConvGeometry{4, 2, 1}));
      net.add("relu3", std::make_unique<nn::ReLU>());
      const int spatial = size / 4;
      net.add("fc1", std::make_unique<nn::Linear>(32 * spatial * spatial, 48));
      net.add("relu_fc1", std::make_unique<nn::ReLU>());
      net.add("logits", std::make_unique<nn::Linear>(48, num_classes));
      init_all(net, seed);
      return Classifier(id, std::move(net), "relu3", num_classes, Shape{1, channels, size, size});
    }
    case ToyArch::LinearProbe: {
      nn::Sequential net;
      net.add("normalize", std::make_unique<nn::Normalize>(std::vector<double>(channels, 0.5),
                                                           std::vector<double>(channels, 0.5)));
      net.add("logits", std::make_unique<nn::Linear>(channels * size * size, num_classes));
      init_all(net, seed);
      return Classifier(id, std::move(net), "normalize", num_classes,
                        Shape{1, channels, size, size});
    }
  }
  throw ConfigError("unknown toy architecture");
}

// -------------------------------------------------------------- ModelZoo

ModelZoo::ModelZoo(std::filesystem::path dir) : dir_(std::move(dir)) {}

ModelZoo ModelZoo::open(const std::filesystem::path& dir) {
  ModelZoo zoo(dir);
  const auto manifest = dir / "manifest.json";
  if (!std::filesystem::exists(manifest)) return zoo;
  const auto j = nlohmann::json::parse(read_file(manifest));
  for (const auto& m : j.at("models")) {
    zoo.entries_.push_back(ModelEntry{m.at("id").get<std::string>(),
                                      m.at("checkpoint").get<std::string>(),
                                      m.at("feature_layer").get<std::string>(),
                                      m.at("num_classes").get<int>()});
  }
  return zoo;
}

void ModelZoo::add(const Classifier& model) {
  const std::string file = model.id() + ".ckpt";
  model.save(dir_ / file);
  ModelEntry entry{model.id(), file, model.feature_layer(), model.num_classes()};
  bool replaced = false;
  for (auto& e : entries_) {
    if (e.id == model.id()) {
      e = entry;
      replaced = true;
    }
  }
  if (!replaced) entries_.push_back(entry);
  write_manifest();
}

bool ModelZoo::contains(const std::string& id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return true;
  }
  return false;
}

Classifier ModelZoo::load(const std::string& id) const {
  for (const auto& e : entries_) {
    if (e.id != id) continue;
    Classifier model = Classifier::load(dir_ / e.checkpoint);
    if (model.feature_layer() != e.feature_layer) model.set_feature_layer(e.feature_layer);
    return model;
  }
  throw IoError("model '" + id + "' is not listed in " + (dir_ / "manifest.json").string());
}

void ModelZoo::write_manifest() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& e : entries_) {
    models.push_back({{"id", e.id},
                      {"checkpoint", e.checkpoint},
                      {"feature_layer", e.feature_layer},
                      {"num_classes", e.num_classes}});
  }
  nlohmann::json j{{"version", 1}, {"models", models}};
  write_file_atomic(dir_ / "manifest.json", j.dump(2) + "\n");
}

}  // namespace ada
