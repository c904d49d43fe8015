#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "situseq/error.hpp"

namespace situseq {

using OperationId = std::size_t;

struct Operation {
  std::string device;
  std::string action;

  std::string key() const { return device + ":" + action; }
  friend auto operator<=>(const Operation&, const Operation&) = default;
};

// Physical range of one sensor channel, inclusive on both ends.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Collected sensor channels and their physical ranges.
struct SensorRanges {
  Range temperature{0.0, 50.0};
  Range humidity{0.0, 100.0};
  Range atmosphere{260.0, 1260.0};
  Range co2{0.0, 5000.0};
  Range noise{30.0, 130.0};
};

// Registered (device, action) pairs plus the roles some devices play:
// presence bookkeeping, cooking appliances and the detection target.
class Vocabulary {
 public:
  Vocabulary() = default;

  OperationId add(const std::string& device, const std::string& action) {
    if (auto id = find(device, action)) return *id;
    ops_.push_back({device, action});
    index_.emplace(ops_.back().key(), ops_.size() - 1);
    return ops_.size() - 1;
  }

  std::optional<OperationId> find(const std::string& device, const std::string& action) const {
    auto it = index_.find(device + ":" + action);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<OperationId> find_key(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  OperationId require(const std::string& device, const std::string& action) const {
    if (auto id = find(device, action)) return *id;
    throw Error(ErrorKind::vocabulary, "unregistered operation " + device + ":" + action);
  }

  std::size_t size() const { return ops_.size(); }
  const Operation& operation(OperationId id) const { return ops_.at(id); }
  const std::vector<Operation>& operations() const { return ops_; }

  bool has_device(const std::string& device) const {
    return std::any_of(ops_.begin(), ops_.end(), [&](const Operation& o) { return o.device == device; });
  }

  const std::string& presence_device() const { return presence_device_; }
  const std::string& entry_action() const { return entry_action_; }
  const std::string& exit_action() const { return exit_action_; }
  void set_presence(std::string device, std::string entry, std::string exit) {
    presence_device_ = std::move(device);
    entry_action_ = std::move(entry);
    exit_action_ = std::move(exit);
  }
  bool is_presence(OperationId id) const { return ops_.at(id).device == presence_device_; }
  bool is_entry(OperationId id) const { return is_presence(id) && ops_[id].action == entry_action_; }
  bool is_exit(OperationId id) const { return is_presence(id) && ops_[id].action == exit_action_; }

  const std::set<std::string>& cooking_appliances() const { return cooking_; }
  void set_cooking_appliances(std::set<std::string> devices) { cooking_ = std::move(devices); }
  bool is_cooking(OperationId id) const { return cooking_.count(ops_.at(id).device) > 0; }

  const std::string& target_device() const { return target_; }
  void set_target_device(std::string device) { target_ = std::move(device); }
  bool is_target(OperationId id) const { return ops_.at(id).device == target_; }

  const SensorRanges& sensor_ranges() const { return ranges_; }
  void set_sensor_ranges(const SensorRanges& r) { ranges_ = r; }

  // Operations and events of a real deployment with a cooking stove as target.
  static Vocabulary standard() {
    Vocabulary v;
    const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
        {"user_position", {"entry", "exit"}},
        {"room_light", {"on", "off"}},
        {"air_conditioner", {"cooling", "heating", "turning_up", "turning_down", "off"}},
        {"electric_fan", {"on", "off"}},
        {"heater", {"on", "off"}},
        {"washing_machine", {"on"}},
        {"refrigerator", {"open"}},
        {"tv", {"on", "off"}},
        {"cooking_stove", {"on", "off"}},
        {"microwave", {"on"}},
        {"toaster_oven", {"on"}},
        {"rice_cooker", {"on"}},
    };
    for (const auto& [device, actions] : table)
      for (const auto& a : actions) v.add(device, a);
    v.set_cooking_appliances({"cooking_stove", "microwave", "toaster_oven", "rice_cooker"});
    v.set_target_device("cooking_stove");
    return v;
  }

  nlohmann::json to_json() const {
    nlohmann::json ops = nlohmann::json::array();
    for (const auto& o : ops_) ops.push_back(o.key());
    nlohmann::json j;
    j["operations"] = ops;
    j["cooking_appliances"] = std::vector<std::string>(cooking_.begin(), cooking_.end());
    j["detection_target"] = target_;
    j["presence"] = {{"device", presence_device_}, {"entry", entry_action_}, {"exit", exit_action_}};
    auto range = [](const Range& r) { return nlohmann::json::array({r.lo, r.hi}); };
    j["sensor_ranges"] = {{"temperature", range(ranges_.temperature)}, {"humidity", range(ranges_.humidity)},
                          {"atmosphere", range(ranges_.atmosphere)},   {"co2", range(ranges_.co2)},
                          {"noise", range(ranges_.noise)}};
    return j;
  }

  // Accepts either {"operations": {"device": ["action", ...]}} or
  // {"operations": ["device:action", ...]}; the array form keeps id order.
  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    try {
      const auto& ops = j.at("operations");
      if (ops.is_object()) {
        for (const auto& [device, actions] : ops.items())
          for (const auto& a : actions) v.add(device, a.get<std::string>());
      } else {
        for (const auto& k : ops) {
          const auto key = k.get<std::string>();
          const auto colon = key.find(':');
          if (colon == std::string::npos || colon == 0 || colon + 1 == key.size())
            throw Error(ErrorKind::schema, "vocabulary entry must be device:action, got '" + key + "'");
          v.add(key.substr(0, colon), key.substr(colon + 1));
        }
      }
      if (j.contains("cooking_appliances"))
        v.set_cooking_appliances(j.at("cooking_appliances").get<std::set<std::string>>());
      else
        v.set_cooking_appliances({});
      v.set_target_device(j.value("detection_target", std::string("cooking_stove")));
      if (j.contains("presence")) {
        const auto& p = j.at("presence");
        v.set_presence(p.value("device", std::string("user_position")), p.value("entry", std::string("entry")),
                       p.value("exit", std::string("exit")));
      }
      if (j.contains("sensor_ranges")) {
        SensorRanges r;
        const auto& sr = j.at("sensor_ranges");
        auto read = [&](const char* name, Range& out) {
          if (sr.contains(name)) out = {sr.at(name).at(0).get<double>(), sr.at(name).at(1).get<double>()};
        };
        read("temperature", r.temperature);
        read("humidity", r.humidity);
        read("atmosphere", r.atmosphere);
        read("co2", r.co2);
        read("noise", r.noise);
        v.set_sensor_ranges(r);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::schema, std::string("vocabulary: ") + e.what());
    }
    if (!v.has_device(v.target_device()))
      throw Error(ErrorKind::schema, "vocabulary: detection target '" + v.target_device() + "' has no operations");
    return v;
  }

 private:
  std::vector<Operation> ops_;
  std::map<std::string, OperationId> index_;
  std::string presence_device_ = "user_position";
  std::string entry_action_ = "entry";
  std::string exit_action_ = "exit";
  std::set<std::string> cooking_;
  std::string target_ = "cooking_stove";
  SensorRanges ranges_;
};

}  // namespace situseq
