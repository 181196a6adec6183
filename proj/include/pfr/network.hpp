#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pfr {

using Complex = std::complex<double>;

enum class BusType { Slack, PV, PQ };

const char* to_string(BusType t);

/// One bus. Power quantities are per-unit on the network base.
struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double v_min = 0.9;
  double v_max = 1.1;
  double p_load = 0.0;
  double q_load = 0.0;
  double g_shunt = 0.0;
  double b_shunt = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Series impedance, total charging susceptance, off-nominal tap and phase shift.
/// s_max == 0 means the flow is unlimited; theta_max bounds |va_from - va_to|.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charge = 0.0;
  double tap = 1.0;
  double shift = 0.0;
  double s_max = 0.0;
  double theta_max = std::numbers::pi / 3.0;

  bool operator==(const Branch&) const = default;
};

/// Generator limits in per-unit; cost is c2 p^2 + c1 p + c0 with p in per-unit.
/// p_set / q_set / v_set carry the nominal dispatch from the case file.
struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
  double p_set = 0.0;
  double q_set = 0.0;
  double v_set = 1.0;

  bool operator==(const Generator&) const = default;
};

/// Two-port admittances of the pi-model: I_f = Y_ff V_f + Y_ft V_t, I_t = Y_tf V_f + Y_tt V_t.
struct TwoPort {
  Complex y_series;
  Complex ff;
  Complex ft;
  Complex tf;
  Complex tt;
};

TwoPort branch_two_port(const Branch& br);

/// Per-bus demand override used to derive scenario networks.
struct BusLoad {
  double p = 0.0;
  double q = 0.0;

  bool operator==(const BusLoad&) const = default;
};

using LoadTable = std::vector<BusLoad>;

/// Immutable, validated electrical model. Buses are addressed by position
/// (0..num_buses-1); ids are only used at the file boundary.
class Network {
 public:
  Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
          std::vector<Generator> generators);

  double base_mva() const { return base_mva_; }
  std::size_t num_buses() const { return buses_.size(); }
  std::size_t num_branches() const { return branches_.size(); }
  std::size_t num_generators() const { return generators_.size(); }

  std::span<const Bus> buses() const { return buses_; }
  std::span<const Branch> branches() const { return branches_; }
  std::span<const Generator> generators() const { return generators_; }
  const Bus& bus(std::size_t i) const { return buses_[i]; }
  const Branch& branch(std::size_t e) const { return branches_[e]; }
  const Generator& generator(std::size_t g) const { return generators_[g]; }
  const TwoPort& two_port(std::size_t e) const { return two_ports_[e]; }

  std::size_t slack() const { return slack_; }
  std::size_t bus_index(int id) const;
  bool has_bus(int id) const { return index_.contains(id); }

  /// Bus positions of branch e's terminals.
  std::size_t from_index(std::size_t e) const { return from_[e]; }
  std::size_t to_index(std::size_t e) const { return to_[e]; }

  std::span<const std::size_t> generators_at(std::size_t bus) const { return gens_at_[bus]; }
  bool is_generator_bus(std::size_t bus) const { return !gens_at_[bus].empty(); }

  /// Estimator state dimension: every magnitude plus non-slack angles.
  std::size_t state_dim() const { return 2 * buses_.size() - 1; }

  LoadTable loads() const;
  /// Copy of this network with bus demands replaced.
  Network with_loads(const LoadTable& loads) const;

  bool operator==(const Network& o) const;

 private:
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  std::vector<TwoPort> two_ports_;
  std::unordered_map<int, std::size_t> index_;
  std::vector<std::size_t> from_;
  std::vector<std::size_t> to_;
  std::vector<std::vector<std::size_t>> gens_at_;
  std::size_t slack_ = 0;
};

}  // namespace pfr
