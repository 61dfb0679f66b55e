#include "udcnet/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "udcnet/error.hpp"

namespace udcnet {

using json = nlohmann::ordered_json;

namespace {

json model_to_json(const UdcNetConfig& m) {
  json j;
  j["backbone"] = {{"kind", std::string(to_string(m.backbone.kind))},
                   {"weights", m.backbone.weights},
                   {"toy_channels", m.backbone.toy_channels}};
  j["channels"] = m.channels;
  j["image_size"] = m.image_size;
  j["use_fsdt"] = m.use_fsdt;
  j["use_dse"] = m.use_dse;
  j["use_djo"] = m.use_djo;
  j["fsdt"] = {{"dw_kernels", m.fsdt.dw_kernels},
               {"le_dilations", m.fsdt.le_dilations},
               {"cdffn_global_mode", std::string(to_string(m.fsdt.cdffn_global_mode))},
               {"complex_softmax", std::string(freq::to_string(m.fsdt.complex_softmax))},
               {"heads", m.fsdt.heads},
               {"ffn_expansion", m.fsdt.ffn_expansion}};
  j["dse"] = {{"dilations", m.dse.dilations}};
  j["djo"] = {{"freq_path", std::string(to_string(m.djo.freq_path))}};
  return j;
}

/// Reads the members of one JSON object, rejecting unknown keys.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
    for (const auto& [key, _] : node_.items()) unknown_.push_back(key);
  }

  /// Throws when a key was never read.
  void finish() const {
    if (!unknown_.empty()) fail(path_ + "." + unknown_.front(), "unknown key");
  }

  template <typename T>
  void get(const char* key, T& target) {
    if (!take(key)) return;
    try {
      target = node_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(path_ + "." + key, e.what());
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& target, Parse parse) {
    if (!take(key)) return;
    if (!node_.at(key).is_string()) fail(path_ + "." + key, "expected a string");
    target = parse(node_.at(key).get<std::string>());
  }

  /// Returns the child object when present.
  const json* child(const char* key) {
    return take(key) ? &node_.at(key) : nullptr;
  }

  const std::string& path() const { return path_; }

 private:
  bool take(const char* key) {
    auto it = std::find(unknown_.begin(), unknown_.end(), key);
    if (it == unknown_.end()) return false;
    unknown_.erase(it);
    return true;
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw Error("invalid_config", fmt::format("{}: {}", where, what));
  }

  const json& node_;
  std::string path_;
  std::vector<std::string> unknown_;
};

void model_from_json(const json& j, UdcNetConfig& m) {
  Reader r(j, "model");
  if (const auto* b = r.child("backbone")) {
    Reader rb(*b, "model.backbone");
    rb.get_enum("kind", m.backbone.kind, parse_backbone_kind);
    rb.get("weights", m.backbone.weights);
    rb.get("toy_channels", m.backbone.toy_channels);
    rb.finish();
  }
  r.get("channels", m.channels);
  r.get("image_size", m.image_size);
  r.get("use_fsdt", m.use_fsdt);
  r.get("use_dse", m.use_dse);
  r.get("use_djo", m.use_djo);
  if (const auto* f = r.child("fsdt")) {
    Reader rf(*f, "model.fsdt");
    rf.get("dw_kernels", m.fsdt.dw_kernels);
    rf.get("le_dilations", m.fsdt.le_dilations);
    rf.get_enum("cdffn_global_mode", m.fsdt.cdffn_global_mode, parse_cdffn_global_mode);
    rf.get_enum("complex_softmax", m.fsdt.complex_softmax, freq::parse_complex_softmax);
    rf.get("heads", m.fsdt.heads);
    rf.get("ffn_expansion", m.fsdt.ffn_expansion);
    rf.finish();
  }
  if (const auto* d = r.child("dse")) {
    Reader rd(*d, "model.dse");
    rd.get("dilations", m.dse.dilations);
    rd.finish();
  }
  if (const auto* d = r.child("djo")) {
    Reader rd(*d, "model.djo");
    rd.get_enum("freq_path", m.djo.freq_path, parse_freq_path_mode);
    rd.finish();
  }
  r.finish();
}

json to_json_tree(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["log_every"] = c.log_every;
  j["model"] = model_to_json(c.model);
  j["loss"] = {{"window", c.loss.window}, {"dice_eps", c.loss.dice_eps}};
  j["optim"] = {{"optimizer", c.optim.optimizer},
                {"lr", c.optim.lr},
                {"decay_rate", c.optim.decay_rate},
                {"decay_every_epochs", c.optim.decay_every_epochs},
                {"epochs", c.optim.epochs},
                {"batch_size", c.optim.batch_size},
                {"max_steps", c.optim.max_steps}};
  j["data"] = {{"root", c.data.root},
               {"train_split", c.data.train_split},
               {"test_split", c.data.test_split},
               {"val_split", c.data.val_split},
               {"holdout_fraction", c.data.holdout_fraction},
               {"augment", c.data.augment},
               {"synthetic_samples", c.data.synthetic_samples}};
  return j;
}

RunConfig from_json_tree(const json& j) {
  RunConfig c;
  Reader r(j, "config");
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("log_every", c.log_every);
  if (const auto* m = r.child("model")) model_from_json(*m, c.model);
  if (const auto* l = r.child("loss")) {
    Reader rl(*l, "loss");
    rl.get("window", c.loss.window);
    rl.get("dice_eps", c.loss.dice_eps);
    rl.finish();
  }
  if (const auto* o = r.child("optim")) {
    Reader ro(*o, "optim");
    ro.get("optimizer", c.optim.optimizer);
    ro.get("lr", c.optim.lr);
    ro.get("decay_rate", c.optim.decay_rate);
    ro.get("decay_every_epochs", c.optim.decay_every_epochs);
    ro.get("epochs", c.optim.epochs);
    ro.get("batch_size", c.optim.batch_size);
    ro.get("max_steps", c.optim.max_steps);
    ro.finish();
  }
  if (const auto* d = r.child("data")) {
    Reader rd(*d, "data");
    rd.get("root", c.data.root);
    rd.get("train_split", c.data.train_split);
    rd.get("test_split", c.data.test_split);
    rd.get("val_split", c.data.val_split);
    rd.get("holdout_fraction", c.data.holdout_fraction);
    rd.get("augment", c.data.augment);
    rd.get("synthetic_samples", c.data.synthetic_samples);
    rd.finish();
  }
  r.finish();
  return c;
}

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("invalid_config", fmt::format("{} is not valid JSON: {}", what, e.what()));
  }
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::toy() {
  RunConfig c;
  c.model.backbone.kind = BackboneKind::kToy;
  c.model.backbone.toy_channels = {16, 32, 64, 128};
  c.model.channels = 32;
  c.model.image_size = 64;
  c.optim.lr = 1e-3;
  c.optim.epochs = 100;
  c.optim.batch_size = 4;
  c.data.synthetic_samples = 8;
  c.output_dir = "runs/toy";
  return c;
}

RunConfig RunConfig::profile(const std::string& name) {
  if (name == "default") return defaults();
  if (name == "toy") return toy();
  throw Error("invalid_config", fmt::format("unknown profile '{}' (expected default|toy)", name));
}

RunConfig RunConfig::from_json(const std::string& text) {
  auto c = from_json_tree(parse_text(text, "config"));
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("invalid_config", fmt::format("cannot read config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunConfig::to_json() const { return to_json_tree(*this).dump(2) + "\n"; }

std::string RunConfig::model_json() const {
  auto j = model_to_json(model);
  j["backbone"].erase("weights");
  return j.dump();
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error("invalid_config", fmt::format("override '{}' is not key=value", assignment));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json tree = to_json_tree(*this);
  json* node = &tree;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (size_t i = 0; i < path.size(); ++i) {
    if (!node->is_object() || !node->contains(path[i])) {
      throw Error("invalid_config", fmt::format("unknown config key '{}'", key));
    }
    node = &(*node)[path[i]];
  }
  if (node->is_number_float() && value.is_number()) value = value.get<double>();
  *node = value;
  auto updated = from_json_tree(tree);
  updated.validate();
  *this = updated;
}

void RunConfig::validate() const {
  auto positive = [](int64_t v, const char* name) {
    if (v <= 0) throw Error("invalid_config", fmt::format("{} must be positive", name));
  };
  model.validate();
  positive(model.channels, "model.channels");
  for (auto c : model.backbone.toy_channels) positive(c, "model.backbone.toy_channels");
  positive(loss.window, "loss.window");
  if (loss.window % 2 == 0) throw Error("invalid_config", "loss.window must be odd");
  if (optim.optimizer != "adam") {
    throw Error("invalid_config", fmt::format("unknown optimizer '{}' (expected adam)", optim.optimizer));
  }
  if (!(optim.lr > 0.0)) throw Error("invalid_config", "optim.lr must be positive");
  if (!(optim.decay_rate > 0.0)) throw Error("invalid_config", "optim.decay_rate must be positive");
  positive(optim.decay_every_epochs, "optim.decay_every_epochs");
  positive(optim.epochs, "optim.epochs");
  positive(optim.batch_size, "optim.batch_size");
  if (optim.max_steps < 0) throw Error("invalid_config", "optim.max_steps must be >= 0");
  if (data.holdout_fraction < 0.0 || data.holdout_fraction >= 1.0) {
    throw Error("invalid_config", "data.holdout_fraction must lie in [0, 1)");
  }
  if (data.synthetic_samples < 0) throw Error("invalid_config", "data.synthetic_samples must be >= 0");
  positive(log_every, "log_every");
}

double step_lr(double base_lr, double decay_rate, int64_t decay_every, int64_t epoch) {
  return base_lr * std::pow(decay_rate, static_cast<double>(epoch / decay_every));
}

}  // namespace udcnet
