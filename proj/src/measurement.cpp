#include "pfr/measurement.hpp"

#include <algorithm>
#include <array>
#include <set>

#include <fmt/format.h>

#include "pfr/errors.hpp"

namespace pfr {

StateVector::StateVector(Eigen::VectorXd vm, Eigen::VectorXd va, std::size_t slack)
    : vm_(std::move(vm)), va_(std::move(va)), slack_(slack) {
  if (vm_.size() == 0 || vm_.size() != va_.size()) {
    throw LayoutError(fmt::format("state needs matching magnitude/angle vectors (got {} and {})",
                                  vm_.size(), va_.size()));
  }
  if (slack_ >= num_buses()) throw LayoutError("slack index out of range");
  for (Eigen::Index i = 0; i < vm_.size(); ++i) {
    if (!(vm_[i] > 0.0) || !std::isfinite(vm_[i]) || !std::isfinite(va_[i])) {
      throw LayoutError(fmt::format("bus position {}: magnitude must be positive and finite", i));
    }
  }
  const double ref = va_[static_cast<Eigen::Index>(slack_)];
  if (ref != 0.0) va_.array() -= ref;
}

StateVector StateVector::flat(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  return StateVector(Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n), net.slack());
}

StateVector StateVector::from_flat(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   std::size_t num_buses, std::size_t slack) {
  const auto n = static_cast<Eigen::Index>(num_buses);
  if (x.size() != 2 * n - 1) {
    throw LayoutError(fmt::format("flat state has {} entries, expected {}", x.size(), 2 * n - 1));
  }
  Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < num_buses; ++i) {
    if (auto c = angle_column(i, num_buses, slack)) {
      va[static_cast<Eigen::Index>(i)] = x[static_cast<Eigen::Index>(*c)];
    }
  }
  return StateVector(x.head(n), std::move(va), slack);
}

Eigen::VectorXd StateVector::flatten() const {
  const auto n = vm_.size();
  Eigen::VectorXd x(2 * n - 1);
  x.head(n) = vm_;
  for (std::size_t i = 0; i < num_buses(); ++i) {
    if (auto c = va_column(i)) x[static_cast<Eigen::Index>(*c)] = va_[static_cast<Eigen::Index>(i)];
  }
  return x;
}

std::optional<std::size_t> StateVector::va_column(std::size_t bus) const {
  return angle_column(bus, num_buses(), slack_);
}

namespace {
constexpr std::array<const char*, 8> kQuantityNames = {"Vm",  "Va",  "Pinj", "Qinj",
                                                       "Pfr", "Qfr", "Pto",  "Qto"};
}

const char* to_string(Quantity q) { return kQuantityNames[static_cast<std::size_t>(q)]; }

Quantity quantity_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kQuantityNames.size(); ++i) {
    if (s == kQuantityNames[i]) return static_cast<Quantity>(i);
  }
  throw LayoutError(fmt::format("unknown measurement quantity '{}'", s));
}

std::string describe(const MeasurementKind& k, const Network& net) {
  if (is_bus_quantity(k.quantity)) {
    return fmt::format("{}(bus {})", to_string(k.quantity), net.bus(k.element).id);
  }
  const Branch& br = net.branch(k.element);
  return fmt::format("{}(branch {}: {}-{})", to_string(k.quantity), k.element + 1, br.from, br.to);
}

Layout canonical_layout(const Network& net, bool include_angles) {
  Layout out;
  const std::size_t nb = net.num_buses();
  const std::size_t ne = net.num_branches();
  out.reserve(4 * nb + 4 * ne);
  for (Quantity q : {Quantity::Vm, Quantity::Va, Quantity::Pinj, Quantity::Qinj}) {
    if (q == Quantity::Va && !include_angles) continue;
    for (std::size_t i = 0; i < nb; ++i) out.push_back({q, i});
  }
  for (Quantity q : {Quantity::Pfr, Quantity::Qfr, Quantity::Pto, Quantity::Qto}) {
    for (std::size_t e = 0; e < ne; ++e) out.push_back({q, e});
  }
  return out;
}

void validate_layout(std::span<const MeasurementKind> kinds, const Network& net) {
  std::set<MeasurementKind> seen;
  for (const auto& k : kinds) {
    const std::size_t limit = is_bus_quantity(k.quantity) ? net.num_buses() : net.num_branches();
    if (k.element >= limit) {
      throw LayoutError(fmt::format("{} refers to element {} but the network has {}",
                                    to_string(k.quantity), k.element, limit));
    }
    if (!seen.insert(k).second) {
      throw LayoutError(fmt::format("duplicate measurement {}", describe(k, net)));
    }
  }
}

std::optional<double> MeasurementSet::find(const MeasurementKind& k) const {
  auto it = std::find(kinds.begin(), kinds.end(), k);
  if (it == kinds.end()) return std::nullopt;
  return values[std::distance(kinds.begin(), it)];
}

}  // namespace pfr
