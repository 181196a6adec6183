#include "pfr/network.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "pfr/errors.hpp"

namespace pfr {

namespace {

// Union-find over bus positions.
std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

const char* to_string(BusType t) {
  switch (t) {
    case BusType::Slack: return "slack";
    case BusType::PV: return "pv";
    case BusType::PQ: return "pq";
  }
  return "?";
}

TwoPort branch_two_port(const Branch& br) {
  const Complex y = 1.0 / Complex(br.r, br.x);
  const Complex half_charge(0.0, br.b_charge / 2.0);
  const Complex ratio = std::polar(br.tap, br.shift);
  TwoPort tp;
  tp.y_series = y;
  tp.ff = (y + half_charge) / (br.tap * br.tap);
  tp.ft = -y / std::conj(ratio);
  tp.tf = -y / ratio;
  tp.tt = y + half_charge;
  return tp;
}

Network::Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                 std::vector<Generator> generators)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)) {
  if (!(base_mva_ > 0.0)) {
    throw CaseError(CaseErrorKind::InvalidValue, "base MVA must be positive");
  }
  if (buses_.empty()) {
    throw CaseError(CaseErrorKind::NoSlack, "network has no buses");
  }

  bool have_slack = false;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const Bus& b = buses_[i];
    if (!index_.emplace(b.id, i).second) {
      throw CaseError(CaseErrorKind::DuplicateBus, fmt::format("duplicate bus id {}", b.id));
    }
    if (!(b.v_min > 0.0) || !(b.v_min <= b.v_max)) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("bus {}: voltage bounds must satisfy 0 < v_min <= v_max", b.id));
    }
    if (b.type == BusType::Slack) {
      if (have_slack) {
        throw CaseError(CaseErrorKind::MultipleSlack,
                        fmt::format("bus {} is a second reference bus", b.id));
      }
      have_slack = true;
      slack_ = i;
    }
  }
  if (!have_slack) {
    throw CaseError(CaseErrorKind::NoSlack, "network has no reference (slack) bus");
  }

  from_.reserve(branches_.size());
  to_.reserve(branches_.size());
  two_ports_.reserve(branches_.size());
  for (std::size_t e = 0; e < branches_.size(); ++e) {
    const Branch& br = branches_[e];
    for (int end : {br.from, br.to}) {
      if (!index_.contains(end)) {
        throw CaseError(CaseErrorKind::DanglingEndpoint,
                        fmt::format("branch {} references nonexistent bus {}", e + 1, end));
      }
    }
    if (br.from == br.to) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("branch {} connects bus {} to itself", e + 1, br.from));
    }
    if (!(br.r * br.r + br.x * br.x > 0.0)) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("branch {} has zero series impedance", e + 1));
    }
    if (!(br.tap > 0.0)) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("branch {} has non-positive tap ratio", e + 1));
    }
    if (!(br.theta_max > 0.0) || !(br.s_max >= 0.0)) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("branch {} has a non-positive angle or flow limit", e + 1));
    }
    from_.push_back(index_.at(br.from));
    to_.push_back(index_.at(br.to));
    two_ports_.push_back(branch_two_port(br));
  }

  gens_at_.resize(buses_.size());
  for (std::size_t g = 0; g < generators_.size(); ++g) {
    const Generator& gen = generators_[g];
    if (!index_.contains(gen.bus)) {
      throw CaseError(CaseErrorKind::DanglingEndpoint,
                      fmt::format("generator {} references nonexistent bus {}", g + 1, gen.bus));
    }
    if (gen.p_min > gen.p_max || gen.q_min > gen.q_max) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("generator {} has inverted output bounds", g + 1));
    }
    gens_at_[index_.at(gen.bus)].push_back(g);
  }

  std::vector<std::size_t> parent(buses_.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t e = 0; e < branches_.size(); ++e) {
    parent[find_root(parent, from_[e])] = find_root(parent, to_[e]);
  }
  const std::size_t root = find_root(parent, slack_);
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (find_root(parent, i) != root) {
      throw CaseError(CaseErrorKind::Disconnected,
                      fmt::format("bus {} is not connected to the reference bus", buses_[i].id));
    }
  }
}

std::size_t Network::bus_index(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw LayoutError(fmt::format("unknown bus id {}", id));
  }
  return it->second;
}

LoadTable Network::loads() const {
  LoadTable out(buses_.size());
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    out[i] = {buses_[i].p_load, buses_[i].q_load};
  }
  return out;
}

Network Network::with_loads(const LoadTable& loads) const {
  if (loads.size() != buses_.size()) {
    throw LayoutError(fmt::format("load table has {} entries, network has {} buses", loads.size(),
                                  buses_.size()));
  }
  std::vector<Bus> buses = buses_;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    buses[i].p_load = loads[i].p;
    buses[i].q_load = loads[i].q;
  }
  return Network(base_mva_, std::move(buses), branches_, generators_);
}

bool Network::operator==(const Network& o) const {
  return base_mva_ == o.base_mva_ && buses_ == o.buses_ && branches_ == o.branches_ &&
         generators_ == o.generators_;
}

}  // namespace pfr
