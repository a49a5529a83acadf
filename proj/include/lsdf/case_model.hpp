#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lsdf/error.hpp"

namespace lsdf {

enum class BusKind { pq, pv, slack };

inline std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::pq: return "PQ";
    case BusKind::pv: return "PV";
    case BusKind::slack: return "slack";
  }
  return "?";
}

struct Bus {
  int external_id = 0;
  BusKind kind = BusKind::pq;
  double p_load_max = 0.0;  // MW
  double q_load_max = 0.0;  // MVAr
  double shunt_g = 0.0;     // p.u. on base_mva
  double shunt_b = 0.0;     // p.u. on base_mva
  double v_init = 1.0;      // p.u.
  double theta_init = 0.0;  // rad
  double base_kv = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Standard pi-model branch. Bus references are internal (dense) indices.
struct Branch {
  std::size_t from_bus = 0;
  std::size_t to_bus = 0;
  double r = 0.0;           // p.u.
  double x = 0.0;           // p.u.
  double b_charging = 0.0;  // total, p.u.
  double tap = 1.0;         // off-nominal ratio at the from end
  double shift = 0.0;       // rad
  bool is_transformer = false;
  bool in_service = true;

  bool operator==(const Branch&) const = default;
};

struct Generator {
  std::size_t bus = 0;  // internal index
  double p_set = 0.0;   // MW
  double q_set = 0.0;   // MVAr
  double v_set = 1.0;   // p.u.
  bool in_service = true;

  bool operator==(const Generator&) const = default;
};

namespace detail {

/// 64-bit FNV-1a over a canonical field stream. Values are fed as integers
/// so the digest does not depend on host byte order.
class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffu;
      state_ *= 0x100000001b3ull;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v)); }
  void add(bool v) { add(std::uint64_t{v ? 1u : 0u}); }
  void add(int v) { add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace detail

/// Static grid model. Immutable once constructed; safe to share between
/// threads. The constructor checks referential integrity only; physical
/// invariants are reported by validate().
class NetworkCase {
 public:
  NetworkCase() = default;

  NetworkCase(std::string name, double base_mva, std::vector<Bus> buses,
              std::vector<Branch> branches, std::vector<Generator> generators)
      : name_(std::move(name)),
        base_mva_(base_mva),
        buses_(std::move(buses)),
        branches_(std::move(branches)),
        generators_(std::move(generators)) {
    if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) {
      throw CaseError("base MVA must be positive and finite");
    }
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      auto [it, inserted] = index_.emplace(buses_[i].external_id, i);
      if (!inserted) {
        throw CaseError("duplicate bus id " + std::to_string(buses_[i].external_id));
      }
    }
    for (std::size_t l = 0; l < branches_.size(); ++l) {
      const auto& br = branches_[l];
      if (br.from_bus >= buses_.size() || br.to_bus >= buses_.size()) {
        throw CaseError("branch " + std::to_string(l + 1) + " references an unknown bus");
      }
      if (br.in_service && br.shift != 0.0) {
        throw CaseError("branch " + std::to_string(l + 1) +
                        ": phase shifters are not supported");
      }
    }
    for (std::size_t g = 0; g < generators_.size(); ++g) {
      if (generators_[g].bus >= buses_.size()) {
        throw CaseError("generator " + std::to_string(g + 1) + " references an unknown bus");
      }
    }
    hash_ = compute_hash();
  }

  const std::string& name() const noexcept { return name_; }
  double base_mva() const noexcept { return base_mva_; }
  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  const std::vector<Generator>& generators() const noexcept { return generators_; }

  std::size_t bus_count() const noexcept { return buses_.size(); }
  std::size_t branch_count() const noexcept { return branches_.size(); }

  /// Digest of the network data (name excluded). Used to tie sample sets and
  /// factor matrices to the case they came from.
  std::uint64_t hash() const noexcept { return hash_; }

  std::optional<std::size_t> index_of(int external_id) const {
    auto it = index_.find(external_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int external_id(std::size_t index) const { return buses_.at(index).external_id; }

  std::vector<int> external_ids() const {
    std::vector<int> ids(buses_.size());
    std::transform(buses_.begin(), buses_.end(), ids.begin(),
                   [](const Bus& b) { return b.external_id; });
    return ids;
  }

  /// First slack bus in bus order, if any.
  std::optional<std::size_t> slack_bus() const {
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      if (buses_[i].kind == BusKind::slack) return i;
    }
    return std::nullopt;
  }

  /// Max-load profile (MW / MVAr) by internal index.
  std::vector<double> p_load_max() const {
    std::vector<double> out(buses_.size());
    std::transform(buses_.begin(), buses_.end(), out.begin(),
                   [](const Bus& b) { return b.p_load_max; });
    return out;
  }
  std::vector<double> q_load_max() const {
    std::vector<double> out(buses_.size());
    std::transform(buses_.begin(), buses_.end(), out.begin(),
                   [](const Bus& b) { return b.q_load_max; });
    return out;
  }

  /// Nominal generator active set-points in generator order.
  std::vector<double> generator_setpoints() const {
    std::vector<double> out(generators_.size());
    std::transform(generators_.begin(), generators_.end(), out.begin(),
                   [](const Generator& g) { return g.p_set; });
    return out;
  }

  bool operator==(const NetworkCase& o) const {
    return name_ == o.name_ && base_mva_ == o.base_mva_ && buses_ == o.buses_ &&
           branches_ == o.branches_ && generators_ == o.generators_;
  }

 private:
  std::uint64_t compute_hash() const {
    detail::Fnv1a h;
    h.add(base_mva_);
    h.add(buses_.size());
    for (const auto& b : buses_) {
      h.add(b.external_id);
      h.add(static_cast<int>(b.kind));
      for (double v : {b.p_load_max, b.q_load_max, b.shunt_g, b.shunt_b, b.v_init,
                       b.theta_init, b.base_kv}) {
        h.add(v);
      }
    }
    h.add(branches_.size());
    for (const auto& br : branches_) {
      h.add(br.from_bus);
      h.add(br.to_bus);
      for (double v : {br.r, br.x, br.b_charging, br.tap, br.shift}) h.add(v);
      h.add(br.is_transformer);
      h.add(br.in_service);
    }
    h.add(generators_.size());
    for (const auto& g : generators_) {
      h.add(g.bus);
      for (double v : {g.p_set, g.q_set, g.v_set}) h.add(v);
      h.add(g.in_service);
    }
    return h.digest();
  }

  std::string name_;
  double base_mva_ = 100.0;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  std::unordered_map<int, std::size_t> index_;
  std::uint64_t hash_ = 0;
};

struct Violation {
  std::string code;  // stable machine-readable tag, e.g. "multiple slack"
  std::string message;
};

namespace detail {

inline std::vector<std::size_t> component_labels(const NetworkCase& nc) {
  std::vector<std::size_t> parent(nc.bus_count());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& br : nc.branches()) {
    if (!br.in_service) continue;
    auto a = find(br.from_bus);
    auto b = find(br.to_bus);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = find(i);
  return parent;
}

}  // namespace detail

/// True when every bus is reachable from bus 0 over in-service branches.
inline bool is_connected(const NetworkCase& nc) {
  auto labels = detail::component_labels(nc);
  return std::all_of(labels.begin(), labels.end(), [](std::size_t c) { return c == 0; });
}

/// Lists every violated invariant. An empty result means the case is usable.
inline std::vector<Violation> validate(const NetworkCase& nc) {
  std::vector<Violation> out;
  auto bus_label = [&](std::size_t i) { return "bus " + std::to_string(nc.external_id(i)); };

  if (nc.bus_count() == 0) {
    out.push_back({"empty", "case has no buses"});
    return out;
  }

  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < nc.bus_count(); ++i) {
    const auto& b = nc.buses()[i];
    if (b.kind == BusKind::slack) ++slack_count;
    if (!std::isfinite(b.p_load_max) || !std::isfinite(b.q_load_max)) {
      out.push_back({"nonfinite load", bus_label(i) + " has a non-finite load"});
    }
    if (!(b.v_init > 0.0)) {
      out.push_back({"nonpositive voltage", bus_label(i) + " has v_init <= 0"});
    }
  }
  if (slack_count == 0) out.push_back({"no slack", "case has no slack bus"});
  if (slack_count > 1) {
    out.push_back({"multiple slack", std::to_string(slack_count) + " slack buses"});
  }

  for (std::size_t l = 0; l < nc.branch_count(); ++l) {
    const auto& br = nc.branches()[l];
    const std::string label = "branch " + std::to_string(l + 1);
    if (br.from_bus == br.to_bus) out.push_back({"self loop", label + " connects a bus to itself"});
    if (!(br.tap > 0.0)) out.push_back({"nonpositive tap", label + " has tap <= 0"});
    if (br.in_service && br.x == 0.0) {
      out.push_back({"zero reactance", label + " is in service with x = 0"});
    }
  }

  std::vector<bool> has_gen(nc.bus_count(), false);
  for (const auto& g : nc.generators()) {
    if (g.in_service) has_gen[g.bus] = true;
  }
  for (std::size_t i = 0; i < nc.bus_count(); ++i) {
    if (nc.buses()[i].kind != BusKind::pq && !has_gen[i]) {
      out.push_back({"missing generator",
                     bus_label(i) + " is " + std::string(to_string(nc.buses()[i].kind)) +
                         " but has no in-service generator"});
    }
  }

  auto labels = detail::component_labels(nc);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) {
      out.push_back({"disconnected", bus_label(i) + " is not connected to bus " +
                                         std::to_string(nc.external_id(0))});
    }
  }
  return out;
}

enum class BranchClass { line, transformer };

inline std::string_view to_string(BranchClass c) {
  return c == BranchClass::line ? "line" : "transformer";
}

struct BranchParamSummary {
  BranchClass branch_class = BranchClass::line;
  double mean_r = 0.0;
  double mean_x = 0.0;
  double mean_b = 0.0;
  /// mean_x / mean_r. Transformers commonly have r = 0, so a per-branch
  /// x/r average is undefined; the ratio of class means is reported instead.
  double mean_x_over_r = 0.0;
  std::size_t count = 0;
};

/// Average r, x, b of in-service branches, split into lines and
/// transformers. Classes without members are omitted.
inline std::vector<BranchParamSummary> branch_parameter_summary(const NetworkCase& nc) {
  std::vector<BranchParamSummary> out;
  for (BranchClass cls : {BranchClass::line, BranchClass::transformer}) {
    BranchParamSummary s;
    s.branch_class = cls;
    for (const auto& br : nc.branches()) {
      if (!br.in_service) continue;
      if (br.is_transformer != (cls == BranchClass::transformer)) continue;
      s.mean_r += br.r;
      s.mean_x += br.x;
      s.mean_b += br.b_charging;
      ++s.count;
    }
    if (s.count == 0) continue;
    const auto n = static_cast<double>(s.count);
    s.mean_r /= n;
    s.mean_x /= n;
    s.mean_b /= n;
    s.mean_x_over_r = s.mean_r != 0.0 ? s.mean_x / s.mean_r
                                      : std::numeric_limits<double>::infinity();
    out.push_back(s);
  }
  return out;
}

}  // namespace lsdf
