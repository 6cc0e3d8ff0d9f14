#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mutadelta/tensor.hpp"

namespace mutadelta::numkit {

template <class T>
struct ParamSlot {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Named trainable tensors in stable insertion order.  Insertion order drives
// optimizer iteration and checkpoint layout, so it must be deterministic.
template <class T>
class ParamSet {
 public:
  ParamSlot<T>& add(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw contract_error("duplicate parameter: " + name);
    index_[name] = static_cast<int>(items_.size());
    items_.push_back(ParamSlot<T>{name, std::move(init), {}});
    ParamSlot<T>& slot = items_.back();
    slot.grad = slot.value;
    slot.grad.fill(T(0));
    return slot;
  }

  bool exists(const std::string& name) const { return index_.count(name) != 0; }

  ParamSlot<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw contract_error("unknown parameter: " + name);
    return items_[static_cast<size_t>(it->second)];
  }

  const ParamSlot<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw contract_error("unknown parameter: " + name);
    return items_[static_cast<size_t>(it->second)];
  }

  void zero_grads() {
    for (auto& p : items_) p.grad.fill(T(0));
  }

  size_t size() const { return items_.size(); }
  int64_t total_values() const {
    int64_t n = 0;
    for (const auto& p : items_) n += p.value.numel();
    return n;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<ParamSlot<T>> items_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace mutadelta::numkit
