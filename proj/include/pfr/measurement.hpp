#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pfr/network.hpp"

namespace pfr {

/// Voltage state of the estimator: a magnitude per bus and an angle per
/// non-slack bus. The slack angle is fixed at zero; va() still has one entry
/// per bus so callers can index by bus position.
class StateVector {
 public:
  /// `va` has one entry per bus and is re-referenced so va[slack] == 0.
  StateVector(Eigen::VectorXd vm, Eigen::VectorXd va, std::size_t slack);

  static StateVector flat(const Network& net);
  /// Inverse of flatten(): [vm(0..N-1), va(non-slack buses in order)].
  static StateVector from_flat(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t num_buses,
                               std::size_t slack);

  Eigen::VectorXd flatten() const;

  const Eigen::VectorXd& vm() const { return vm_; }
  const Eigen::VectorXd& va() const { return va_; }
  std::size_t slack_index() const { return slack_; }
  std::size_t num_buses() const { return static_cast<std::size_t>(vm_.size()); }
  std::size_t dim() const { return 2 * num_buses() - 1; }

  /// Column of vm_i / va_i in the flattened ordering. va_column(slack) is empty.
  std::size_t vm_column(std::size_t bus) const { return bus; }
  std::optional<std::size_t> va_column(std::size_t bus) const;

 private:
  Eigen::VectorXd vm_;
  Eigen::VectorXd va_;
  std::size_t slack_;
};

/// Flattened column of a bus angle, or nullopt for the reference bus.
inline std::optional<std::size_t> angle_column(std::size_t bus, std::size_t num_buses,
                                               std::size_t slack) {
  if (bus == slack) return std::nullopt;
  return num_buses + (bus < slack ? bus : bus - 1);
}

enum class Quantity : std::uint8_t { Vm, Va, Pinj, Qinj, Pfr, Qfr, Pto, Qto };

const char* to_string(Quantity q);
Quantity quantity_from_string(std::string_view s);

inline bool is_bus_quantity(Quantity q) {
  return q == Quantity::Vm || q == Quantity::Va || q == Quantity::Pinj || q == Quantity::Qinj;
}
inline bool is_voltage_quantity(Quantity q) { return q == Quantity::Vm || q == Quantity::Va; }

/// One scalar quantity of the measurement model: a bus quantity at bus
/// position `element`, or a branch-end flow of branch position `element`.
struct MeasurementKind {
  Quantity quantity = Quantity::Vm;
  std::size_t element = 0;

  auto operator<=>(const MeasurementKind&) const = default;
};

std::string describe(const MeasurementKind& k, const Network& net);

/// Ordered kinds shared by every record of a dataset and by its weight vector.
using Layout = std::vector<MeasurementKind>;

/// Vm, Va (optional), Pinj, Qinj for every bus, then Pfr, Qfr, Pto, Qto for
/// every branch, each group in element order.
Layout canonical_layout(const Network& net, bool include_angles = true);

/// Throws LayoutError on duplicates or out-of-range elements.
void validate_layout(std::span<const MeasurementKind> kinds, const Network& net);

struct MeasurementSet {
  Layout kinds;
  Eigen::VectorXd values;

  std::size_t size() const { return kinds.size(); }
  std::optional<double> find(const MeasurementKind& k) const;
};

}  // namespace pfr
