#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "situseq/error.hpp"

namespace situseq {

enum class UserActivity { active, out, sleep };
enum class DeviceUsage { use, before, after, none };

inline constexpr std::string_view to_string(UserActivity u) {
  switch (u) {
    case UserActivity::active: return "active";
    case UserActivity::out: return "out";
    case UserActivity::sleep: return "sleep";
  }
  return "?";
}

inline constexpr std::string_view to_string(DeviceUsage d) {
  switch (d) {
    case DeviceUsage::use: return "use";
    case DeviceUsage::before: return "before";
    case DeviceUsage::after: return "after";
    case DeviceUsage::none: return "none";
  }
  return "?";
}

inline std::optional<UserActivity> parse_user_activity(std::string_view s) {
  for (auto u : {UserActivity::active, UserActivity::out, UserActivity::sleep})
    if (to_string(u) == s) return u;
  return std::nullopt;
}

inline std::optional<DeviceUsage> parse_device_usage(std::string_view s) {
  for (auto d : {DeviceUsage::use, DeviceUsage::before, DeviceUsage::after, DeviceUsage::none})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

// User activity paired with device usage. Nobody cooks while everyone is
// out or asleep, so (out, use) and (sleep, use) cannot be constructed.
class HomeState {
 public:
  HomeState(UserActivity u, DeviceUsage d) : u_(u), d_(d) {
    if (d == DeviceUsage::use && u != UserActivity::active)
      throw Error(ErrorKind::invariant, "home state (" + std::string(to_string(u)) + ", use) does not exist");
  }
  static bool constructible(UserActivity u, DeviceUsage d) { return d != DeviceUsage::use || u == UserActivity::active; }

  UserActivity u() const { return u_; }
  DeviceUsage d() const { return d_; }
  std::string name() const { return std::string(to_string(u_)) + "," + std::string(to_string(d_)); }

  friend bool operator==(const HomeState&, const HomeState&) = default;

 private:
  UserActivity u_;
  DeviceUsage d_;
};

using StateIndex = std::size_t;

// The ten cooking-scenario states in a fixed order.
class StateAlphabet {
 public:
  StateAlphabet() {
    for (auto u : {UserActivity::active, UserActivity::out, UserActivity::sleep})
      for (auto d : {DeviceUsage::use, DeviceUsage::before, DeviceUsage::after, DeviceUsage::none})
        if (HomeState::constructible(u, d)) states_.emplace_back(u, d);
  }

  std::size_t size() const { return states_.size(); }
  const HomeState& operator[](StateIndex i) const { return states_.at(i); }
  const std::vector<HomeState>& states() const { return states_; }

  StateIndex index_of(const HomeState& s) const {
    for (StateIndex i = 0; i < states_.size(); ++i)
      if (states_[i] == s) return i;
    throw Error(ErrorKind::invariant, "state not in alphabet: " + s.name());
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& s : states_) n.push_back(s.name());
    return n;
  }

 private:
  std::vector<HomeState> states_;
};

}  // namespace situseq
