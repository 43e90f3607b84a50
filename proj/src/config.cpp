#include <cmath>

#include <json.hpp>

#include "ibkd/config.hpp"
#include "ibkd/error.hpp"

namespace ibkd {

namespace {

using json = nlohmann::json;

void check_range(std::vector<std::string>& out, const char* name, double v, double lo, double hi) {
  if (v < lo || v > hi) {
    out.push_back(std::string(name) + "=" + json(v).dump() + " is outside the usual range [" + json(lo).dump() +
                  ", " + json(hi).dump() + "]");
  }
}

kernels::KernelSpec kernel_from_json(const json& j, double default_gamma) {
  if (!j.is_object() || !j.contains("kind")) fail(ErrorKind::Config, "kernel must be an object with a \"kind\"");
  kernels::KernelSpec k;
  k.kind = kernels::kind_from_string(j.at("kind").get<std::string>());
  k.gamma = k.kind == kernels::KernelKind::RBF ? j.value("gamma", default_gamma) : 0.0;
  k.c = k.kind == kernels::KernelKind::IMQ ? j.value("c", 1.0) : 0.0;
  for (const auto& [key, v] : j.items()) {
    if (key != "kind" && key != "gamma" && key != "c") fail(ErrorKind::Config, "kernel: unknown field '" + key + "'");
  }
  return k;
}

}  // namespace

void DistillConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::Config, "config: " + m); };
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(tau_distill) || !positive(tau_finetune)) bad("temperatures must be positive");
  if (!positive(lr_distill) || !positive(lr_finetune)) bad("learning rates must be positive");
  if (!(beta1 >= 0.0) || !(beta2 >= 0.0) || !std::isfinite(beta1) || !std::isfinite(beta2)) {
    bad("beta1 and beta2 must be >= 0");
  }
  if (!positive(gamma)) bad("gamma must be positive");
  if (batch_size < 2) bad("batch_size must be at least 2");
  if (!positive(grad_clip)) bad("grad_clip must be positive");
  if (student_dims.size() < 2) bad("student_dims needs at least input and output widths");
  for (auto d : student_dims)
    if (d < 1) bad("student_dims entries must be >= 1");
  if (reduce_to && (*reduce_to < 1 || *reduce_to >= student_dims.back())) {
    bad("reduce_to must be in [1, student output width)");
  }
  kernel.validate();
}

std::vector<std::string> DistillConfig::range_warnings() const {
  std::vector<std::string> w;
  check_range(w, "lr_distill", lr_distill, 1e-5, 1e-4);
  check_range(w, "lr_finetune", lr_finetune, 1e-5, 1e-4);
  check_range(w, "batch_size", static_cast<double>(batch_size), 64, 256);
  check_range(w, "epochs_distill", static_cast<double>(epochs_distill), 3, 10);
  check_range(w, "epochs_finetune", static_cast<double>(epochs_finetune), 3, 10);
  check_range(w, "tau_distill", tau_distill, 0.01, 0.5);
  check_range(w, "tau_finetune", tau_finetune, 0.01, 0.5);
  check_range(w, "gamma", gamma, 0.01, 1.0);
  check_range(w, "beta1", beta1, 0.1, 2.0);
  check_range(w, "beta2", beta2, 0.1, 2.0);
  return w;
}

DistillConfig DistillConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Config, "config: expected a JSON object");
  DistillConfig c;
  try {
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    c.kernel = kernels::KernelSpec::rbf(c.gamma);
    for (const auto& [key, v] : j.items()) {
      if (key == "tau_distill") c.tau_distill = v.get<double>();
      else if (key == "tau_finetune") c.tau_finetune = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "gamma") continue;
      else if (key == "kernel") c.kernel = kernel_from_json(v, c.gamma);
      else if (key == "lr_distill") c.lr_distill = v.get<double>();
      else if (key == "lr_finetune") c.lr_finetune = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "epochs_distill") c.epochs_distill = v.get<std::size_t>();
      else if (key == "epochs_finetune") c.epochs_finetune = v.get<std::size_t>();
      else if (key == "hard_negatives_K") c.hard_negatives_K = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "reduce_to") {
        if (v.is_null()) c.reduce_to.reset();
        else c.reduce_to = v.get<std::size_t>();
      }
      else if (key == "student_dims") c.student_dims = v.get<std::vector<std::size_t>>();
      else if (key == "grad_clip") c.grad_clip = v.get<double>();
      else fail(ErrorKind::Config, "config: unknown field '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string DistillConfig::to_json_text() const {
  nlohmann::ordered_json j;
  j["tau_distill"] = tau_distill;
  j["tau_finetune"] = tau_finetune;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["gamma"] = gamma;
  nlohmann::ordered_json k;
  k["kind"] = kernels::to_string(kernel.kind);
  if (kernel.kind == kernels::KernelKind::RBF) k["gamma"] = kernel.gamma;
  if (kernel.kind == kernels::KernelKind::IMQ) k["c"] = kernel.c;
  j["kernel"] = k;
  j["lr_distill"] = lr_distill;
  j["lr_finetune"] = lr_finetune;
  j["batch_size"] = batch_size;
  j["epochs_distill"] = epochs_distill;
  j["epochs_finetune"] = epochs_finetune;
  j["hard_negatives_K"] = hard_negatives_K;
  j["seed"] = seed;
  j["reduce_to"] = reduce_to ? json(*reduce_to) : json(nullptr);
  j["student_dims"] = student_dims;
  j["grad_clip"] = grad_clip;
  return j.dump(2);
}

}  // namespace ibkd
