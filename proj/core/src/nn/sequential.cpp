#include "ada/nn/sequential.hpp"

#include "ada/errors.hpp"

namespace ada::nn {

Sequential::Sequential(const Sequential& other) : names_(other.names_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Sequential::add(std::string name, std::unique_ptr<Layer> layer) {
  if (find(name) >= 0) throw ShapeError("duplicate layer name '" + name + "'");
  names_.push_back(std::move(name));
  layers_.push_back(std::move(layer));
}

int Sequential::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[static_cast<std::size_t>(i)] == name) return i;
  }
  return -1;
}

Activations Sequential::forward(const Tensor& in, Mode mode, int begin, int end) const {
  end = resolve_end(end);
  Activations acts;
  acts.reserve(static_cast<std::size_t>(end - begin + 1));
  acts.push_back(in);
  for (int i = begin; i < end; ++i) acts.push_back(layer(i).forward(acts.back(), mode));
  return acts;
}

std::size_t Sequential::param_offset(int layer_index) {
  std::size_t off = 0;
  for (int i = 0; i < layer_index; ++i) off += layer(i).params().size();
  return off;
}

Tensor Sequential::backward(const Activations& acts, const Tensor& grad_out, Mode mode, int begin,
                            int end, Gradients* grads) const {
  end = resolve_end(end);
  if (static_cast<int>(acts.size()) != end - begin + 1) {
    throw ShapeError("backward: activation count does not match layer range");
  }
  auto* self = const_cast<Sequential*>(this);
  Tensor grad = grad_out;
  for (int i = end - 1; i >= begin; --i) {
    const auto local = static_cast<std::size_t>(i - begin);
    std::span<Tensor> pg;
    if (grads != nullptr) {
      const std::size_t count = self->layer(i).params().size();
      if (count > 0) pg = std::span<Tensor>(grads->data() + self->param_offset(i), count);
    }
    grad = layer(i).backward(acts[local], acts[local + 1], grad, mode, pg);
  }
  return grad;
}

void Sequential::update_running_stats(const Activations& acts, int begin) {
  for (std::size_t k = 0; k + 1 < acts.size(); ++k) {
    layer(begin + static_cast<int>(k)).update_running_stats(acts[k]);
  }
}

std::vector<Tensor*> Sequential::params() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* p : l->params()) out.push_back(p);
  }
  return out;
}

std::vector<Tensor*> Sequential::state() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* p : l->state()) out.push_back(p);
  }
  return out;
}

Gradients Sequential::zero_gradients() {
  Gradients g;
  for (Tensor* p : params()) g.emplace_back(p->shape());
  return g;
}

std::size_t Sequential::num_params() {
  std::size_t n = 0;
  for (Tensor* p : params()) n += p->size();
  return n;
}

bool Sequential::piecewise_linear(int begin, int end) const {
  end = resolve_end(end);
  for (int i = begin; i < end; ++i) {
    if (!layer(i).piecewise_linear()) return false;
  }
  return true;
}

nlohmann::json Sequential::describe() const {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) {
    nlohmann::json j = layer(i).describe();
    j["name"] = name(i);
    arr.push_back(j);
  }
  return arr;
}

Sequential Sequential::from_json(const nlohmann::json& j) {
  Sequential seq;
  for (const auto& item : j) seq.add(item.at("name").get<std::string>(), layer_from_json(item));
  return seq;
}

}  // namespace ada::nn
