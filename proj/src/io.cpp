#include "pfr/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pfr/case_io.hpp"
#include "pfr/errors.hpp"

namespace pfr {

namespace fs = std::filesystem;
using nlohmann::json;
using Eigen::Index;

namespace {

constexpr const char* kWeightsFormat = "pfrestore.weights";
constexpr const char* kSolutionFormat = "pfrestore.solution";
constexpr const char* kManifestFormat = "pfrestore.dataset";
constexpr const char* kRecordFormat = "pfrestore.record";

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", what, e.what()));
  }
}

void check_header(const json& j, const char* format, std::string_view what) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw FormatError(fmt::format("{}: expected a '{}' document", what, format));
  }
  const int version = j.value("version", 0);
  if (version != kFileVersion) {
    throw FormatError(fmt::format("{}: unsupported version {}", what, version));
  }
}

void check_hash(const json& j, const Network& net, std::string_view what) {
  const std::string hash = j.value("network_hash", "");
  if (hash != network_hash_hex(net)) {
    throw FormatError(fmt::format("{}: network hash {} does not match the loaded case ({})", what,
                                  hash.empty() ? "<missing>" : hash, network_hash_hex(net)));
  }
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::VectorXd vector_from(const json& j, std::size_t expected, std::string_view what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != expected) {
    throw FormatError(fmt::format("{}: {} values, expected {}", what, v.size(), expected));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json layout_json(const Network& net, const Layout& layout) {
  json arr = json::array();
  for (const MeasurementKind& k : layout) {
    json e = {{"quantity", to_string(k.quantity)}};
    if (is_bus_quantity(k.quantity)) {
      e["bus"] = net.bus(k.element).id;
    } else {
      e["branch"] = k.element + 1;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

Layout layout_from(const Network& net, const json& arr) {
  if (!arr.is_array()) throw FormatError("layout must be an array");
  Layout layout;
  for (const json& e : arr) {
    const Quantity q = quantity_from_string(e.at("quantity").get<std::string>());
    if (is_bus_quantity(q)) {
      const int id = e.at("bus").get<int>();
      if (!net.has_bus(id)) throw FormatError(fmt::format("layout names unknown bus {}", id));
      layout.push_back({q, net.bus_index(id)});
    } else {
      const auto b = e.at("branch").get<std::size_t>();
      if (b < 1 || b > net.num_branches()) {
        throw FormatError(fmt::format("layout names unknown branch {}", b));
      }
      layout.push_back({q, b - 1});
    }
  }
  validate_layout(layout, net);
  return layout;
}

template <typename Fn>
auto guarded(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", what, e.what()));
  } catch (const LayoutError& e) {
    throw FormatError(fmt::format("{}: {}", what, e.what()));
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw FormatError(fmt::format("write to {} failed", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw FormatError(fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string layout_to_json(const Network& net, const Layout& layout) {
  return layout_json(net, layout).dump();
}

Layout layout_from_json(const Network& net, std::string_view text) {
  return guarded("layout", [&] { return layout_from(net, parse_json(text, "layout")); });
}

void save_weights(const fs::path& path, const Network& net, const Layout& layout,
                  const WeightVector& w) {
  if (layout.size() != w.size()) {
    throw LayoutError(fmt::format("{} weights for {} layout entries", w.size(), layout.size()));
  }
  const json j = {{"format", kWeightsFormat},
                  {"version", kFileVersion},
                  {"network_hash", network_hash_hex(net)},
                  {"floor", w.floor()},
                  {"layout", layout_json(net, layout)},
                  {"values", vector_json(w.values())}};
  write_file_atomic(path, j.dump(1) + "\n");
}

WeightFile load_weights(const fs::path& path, const Network& net) {
  const std::string what = path.string();
  const json j = parse_json(read_file(path), what);
  return guarded(what, [&] {
    check_header(j, kWeightsFormat, what);
    check_hash(j, net, what);
    Layout layout = layout_from(net, j.at("layout"));
    Eigen::VectorXd values = vector_from(j.at("values"), layout.size(), what);
    const double floor = j.value("floor", kDefaultWeightFloor);
    return WeightFile{std::move(layout), WeightVector(std::move(values), floor)};
  });
}

std::string trace_to_csv(const TrainTrace& trace) {
  std::string out = "iteration,loss,grad_norm,failures\n";
  for (const TraceEntry& e : trace.entries) {
    out += fmt::format("{},{:.17g},{:.17g},{}\n", e.iteration, e.loss, e.grad_norm, e.failures);
  }
  return out;
}

std::string solution_to_json(const Network& net, const SolutionFile& sol) {
  const std::size_t nb = net.num_buses();
  json buses = json::array();
  for (std::size_t i = 0; i < nb; ++i) {
    const auto ii = static_cast<Index>(i);
    json b = {{"id", net.bus(i).id},
              {"vm", sol.vm[ii]},
              {"p_inj", sol.p_inj[ii]},
              {"q_inj", sol.q_inj[ii]}};
    if (sol.va) b["va"] = (*sol.va)[ii];
    if (sol.loads) {
      b["p_load"] = (*sol.loads)[i].p;
      b["q_load"] = (*sol.loads)[i].q;
    }
    buses.push_back(std::move(b));
  }
  json branches = json::array();
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const BranchFlow& f = sol.flows[e];
    branches.push_back({{"index", e + 1},
                        {"from", net.branch(e).from},
                        {"to", net.branch(e).to},
                        {"p_fr", f.p_fr},
                        {"q_fr", f.q_fr},
                        {"p_to", f.p_to},
                        {"q_to", f.q_to}});
  }
  json j = {{"format", kSolutionFormat},
            {"version", kFileVersion},
            {"formulation", sol.formulation},
            {"network_hash", sol.network_hash.empty() ? network_hash_hex(net) : sol.network_hash},
            {"base_mva", net.base_mva()},
            {"units", {{"power", "pu"}, {"angle", "rad"}}},
            {"buses", std::move(buses)},
            {"branches", std::move(branches)}};
  if (sol.p_g && sol.q_g) {
    json gens = json::array();
    for (std::size_t g = 0; g < net.num_generators(); ++g) {
      gens.push_back({{"index", g + 1},
                      {"bus", net.generator(g).bus},
                      {"p_g", (*sol.p_g)[static_cast<Index>(g)]},
                      {"q_g", (*sol.q_g)[static_cast<Index>(g)]}});
    }
    j["generators"] = std::move(gens);
  }
  return j.dump(1) + "\n";
}

SolutionFile solution_from_json(const Network& net, std::string_view text) {
  const json j = parse_json(text, "solution");
  return guarded("solution", [&] {
    check_header(j, kSolutionFormat, "solution");
    check_hash(j, net, "solution");
    const json& units = j.at("units");
    if (units.value("power", "") != "pu" || units.value("angle", "") != "rad") {
      throw FormatError("solution: units must be power \"pu\" and angle \"rad\"");
    }
    SolutionFile sol;
    sol.formulation = j.at("formulation").get<std::string>();
    sol.network_hash = j.at("network_hash").get<std::string>();
    sol.base_mva = j.value("base_mva", net.base_mva());
    if (std::abs(sol.base_mva - net.base_mva()) > 1e-9 * net.base_mva()) {
      throw FormatError(fmt::format("solution: base {} MVA differs from the case's {} MVA",
                                    sol.base_mva, net.base_mva()));
    }

    const std::size_t nb = net.num_buses();
    const json& buses = j.at("buses");
    if (buses.size() != nb) {
      throw FormatError(fmt::format("solution: {} buses, case has {}", buses.size(), nb));
    }
    sol.vm.resize(static_cast<Index>(nb));
    sol.p_inj.resize(static_cast<Index>(nb));
    sol.q_inj.resize(static_cast<Index>(nb));
    Eigen::VectorXd va(static_cast<Index>(nb));
    LoadTable loads(nb);
    std::vector<bool> seen(nb, false);
    std::size_t with_va = 0;
    std::size_t with_load = 0;
    for (const json& b : buses) {
      const int id = b.at("id").get<int>();
      if (!net.has_bus(id)) throw FormatError(fmt::format("solution: unknown bus {}", id));
      const std::size_t i = net.bus_index(id);
      if (seen[i]) throw FormatError(fmt::format("solution: bus {} listed twice", id));
      seen[i] = true;
      const auto ii = static_cast<Index>(i);
      sol.vm[ii] = b.at("vm").get<double>();
      sol.p_inj[ii] = b.at("p_inj").get<double>();
      sol.q_inj[ii] = b.at("q_inj").get<double>();
      if (b.contains("va")) {
        va[ii] = b["va"].get<double>();
        ++with_va;
      }
      if (b.contains("p_load") || b.contains("q_load")) {
        loads[i] = {b.at("p_load").get<double>(), b.at("q_load").get<double>()};
        ++with_load;
      }
    }
    if (with_va != 0 && with_va != nb) throw FormatError("solution: va given for only some buses");
    if (with_load != 0 && with_load != nb) {
      throw FormatError("solution: loads given for only some buses");
    }
    if (with_va) sol.va = (va.array() - va[static_cast<Index>(net.slack())]).matrix();
    if (with_load) sol.loads = std::move(loads);

    const json& branches = j.at("branches");
    if (branches.size() != net.num_branches()) {
      throw FormatError(fmt::format("solution: {} branches, case has {}", branches.size(),
                                    net.num_branches()));
    }
    sol.flows.assign(net.num_branches(), {});
    std::vector<bool> seen_br(net.num_branches(), false);
    for (const json& b : branches) {
      const auto idx = b.at("index").get<std::size_t>();
      if (idx < 1 || idx > net.num_branches() || seen_br[idx - 1]) {
        throw FormatError(fmt::format("solution: invalid or repeated branch index {}", idx));
      }
      seen_br[idx - 1] = true;
      sol.flows[idx - 1] = {b.at("p_fr").get<double>(), b.at("q_fr").get<double>(),
                            b.at("p_to").get<double>(), b.at("q_to").get<double>()};
    }

    if (j.contains("generators")) {
      const json& gens = j["generators"];
      const std::size_t ng = net.num_generators();
      if (gens.size() != ng) {
        throw FormatError(fmt::format("solution: {} generators, case has {}", gens.size(), ng));
      }
      Eigen::VectorXd pg(static_cast<Index>(ng));
      Eigen::VectorXd qg(static_cast<Index>(ng));
      std::vector<bool> seen_g(ng, false);
      for (const json& g : gens) {
        const auto idx = g.at("index").get<std::size_t>();
        if (idx < 1 || idx > ng || seen_g[idx - 1]) {
          throw FormatError(fmt::format("solution: invalid or repeated generator index {}", idx));
        }
        seen_g[idx - 1] = true;
        pg[static_cast<Index>(idx - 1)] = g.at("p_g").get<double>();
        qg[static_cast<Index>(idx - 1)] = g.at("q_g").get<double>();
      }
      sol.p_g = std::move(pg);
      sol.q_g = std::move(qg);
    }
    const bool finite = sol.vm.allFinite() && sol.p_inj.allFinite() && sol.q_inj.allFinite() &&
                        (!sol.va || sol.va->allFinite());
    if (!finite) throw FormatError("solution: non-finite values");
    return sol;
  });
}

SolutionFile load_solution(const fs::path& path, const Network& net) {
  try {
    return solution_from_json(net, read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

SolutionFile make_solution(const Network& net, const MeasurementSet& z, std::string formulation) {
  const std::size_t nb = net.num_buses();
  SolutionFile sol;
  sol.formulation = std::move(formulation);
  sol.network_hash = network_hash_hex(net);
  sol.base_mva = net.base_mva();
  sol.vm = Eigen::VectorXd::Zero(static_cast<Index>(nb));
  sol.p_inj = Eigen::VectorXd::Zero(static_cast<Index>(nb));
  sol.q_inj = Eigen::VectorXd::Zero(static_cast<Index>(nb));
  sol.flows.assign(net.num_branches(), {});
  Eigen::VectorXd va = Eigen::VectorXd::Zero(static_cast<Index>(nb));
  bool has_va = false;
  for (std::size_t r = 0; r < z.size(); ++r) {
    const MeasurementKind& k = z.kinds[r];
    const double v = z.values[static_cast<Index>(r)];
    const auto el = static_cast<Index>(k.element);
    switch (k.quantity) {
      case Quantity::Vm: sol.vm[el] = v; break;
      case Quantity::Va: va[el] = v; has_va = true; break;
      case Quantity::Pinj: sol.p_inj[el] = v; break;
      case Quantity::Qinj: sol.q_inj[el] = v; break;
      case Quantity::Pfr: sol.flows[k.element].p_fr = v; break;
      case Quantity::Qfr: sol.flows[k.element].q_fr = v; break;
      case Quantity::Pto: sol.flows[k.element].p_to = v; break;
      case Quantity::Qto: sol.flows[k.element].q_to = v; break;
    }
  }
  if (has_va) sol.va = va;
  return sol;
}

SolutionFile make_solution(const Network& net, const OperatingPoint& op, std::string formulation) {
  SolutionFile sol;
  sol.formulation = std::move(formulation);
  sol.network_hash = network_hash_hex(net);
  sol.base_mva = net.base_mva();
  sol.vm = op.state.vm();
  sol.va = op.state.va();
  sol.p_inj = op.p_inj;
  sol.q_inj = op.q_inj;
  sol.flows = op.flows;
  sol.p_g = op.p_gen;
  sol.q_g = op.q_gen;
  return sol;
}

MeasurementSet solution_measurements(const Network& net, const SolutionFile& sol) {
  MeasurementSet z;
  z.kinds = canonical_layout(net, sol.va.has_value());
  z.values.resize(static_cast<Index>(z.kinds.size()));
  for (std::size_t r = 0; r < z.kinds.size(); ++r) {
    const MeasurementKind& k = z.kinds[r];
    const auto el = static_cast<Index>(k.element);
    double v = 0.0;
    switch (k.quantity) {
      case Quantity::Vm: v = sol.vm[el]; break;
      case Quantity::Va: v = (*sol.va)[el]; break;
      case Quantity::Pinj: v = sol.p_inj[el]; break;
      case Quantity::Qinj: v = sol.q_inj[el]; break;
      case Quantity::Pfr: v = sol.flows[k.element].p_fr; break;
      case Quantity::Qfr: v = sol.flows[k.element].q_fr; break;
      case Quantity::Pto: v = sol.flows[k.element].p_to; break;
      case Quantity::Qto: v = sol.flows[k.element].q_to; break;
    }
    z.values[static_cast<Index>(r)] = v;
  }
  return z;
}

StateVector solution_state(const Network& net, const SolutionFile& sol) {
  if (!sol.va) {
    throw FormatError(fmt::format("{} solution carries no voltage angles", sol.formulation));
  }
  return StateVector(sol.vm, *sol.va, net.slack());
}

void save_dataset(const fs::path& dir, const Network& net, const DatasetManifest& manifest,
                  std::span<const ScenarioRecord> records) {
  validate_dataset(net, records);
  if (!records.empty() && records.front().z.kinds != manifest.layout) {
    throw LayoutError("dataset records do not use the manifest layout");
  }
  fs::create_directories(dir / "records");
  json files = json::array();
  for (std::size_t s = 0; s < records.size(); ++s) {
    const ScenarioRecord& rec = records[s];
    json p = json::array();
    json q = json::array();
    for (const BusLoad& l : rec.loads) {
      p.push_back(l.p);
      q.push_back(l.q);
    }
    const json j = {{"format", kRecordFormat},
                    {"version", kFileVersion},
                    {"source_tag", rec.source_tag},
                    {"loads", {{"p", std::move(p)}, {"q", std::move(q)}}},
                    {"x_ac", {{"vm", vector_json(rec.x_ac.vm())}, {"va", vector_json(rec.x_ac.va())}}},
                    {"z", vector_json(rec.z.values)}};
    const std::string name = fmt::format("records/{:06d}.json", s);
    write_file_atomic(dir / name, j.dump() + "\n");
    files.push_back(name);
  }
  const json m = {{"format", kManifestFormat},
                  {"version", kFileVersion},
                  {"network_hash", manifest.network_hash.empty() ? network_hash_hex(net)
                                                                 : manifest.network_hash},
                  {"source", manifest.source},
                  {"seed", manifest.seed},
                  {"sigma", manifest.sigma},
                  {"scenario_count", manifest.scenario_count},
                  {"layout", layout_json(net, manifest.layout)},
                  {"split", {{"train", manifest.train}, {"test", manifest.test}}},
                  {"records", std::move(files)}};
  write_file_atomic(dir / "manifest.json", m.dump(1) + "\n");
}

LoadedDataset load_dataset(const fs::path& dir, const Network& net) {
  const fs::path mpath = dir / "manifest.json";
  const std::string what = mpath.string();
  const json m = parse_json(read_file(mpath), what);
  LoadedDataset out = guarded(what, [&] {
    check_header(m, kManifestFormat, what);
    check_hash(m, net, what);
    LoadedDataset ds;
    DatasetManifest& man = ds.manifest;
    man.network_hash = m.at("network_hash").get<std::string>();
    man.source = m.value("source", "");
    man.seed = m.value("seed", std::uint64_t{0});
    man.sigma = m.value("sigma", 0.1);
    man.scenario_count = m.value("scenario_count", std::size_t{0});
    man.layout = layout_from(net, m.at("layout"));
    man.train = m.at("split").at("train").get<std::vector<std::size_t>>();
    man.test = m.at("split").at("test").get<std::vector<std::size_t>>();
    const std::size_t nb = net.num_buses();
    for (const json& name : m.at("records")) {
      const fs::path rpath = dir / name.get<std::string>();
      const json r = parse_json(read_file(rpath), rpath.string());
      check_header(r, kRecordFormat, rpath.string());
      const Eigen::VectorXd p = vector_from(r.at("loads").at("p"), nb, rpath.string());
      const Eigen::VectorXd q = vector_from(r.at("loads").at("q"), nb, rpath.string());
      LoadTable loads(nb);
      for (std::size_t i = 0; i < nb; ++i) {
        loads[i] = {p[static_cast<Index>(i)], q[static_cast<Index>(i)]};
      }
      StateVector x(vector_from(r.at("x_ac").at("vm"), nb, rpath.string()),
                    vector_from(r.at("x_ac").at("va"), nb, rpath.string()), net.slack());
      MeasurementSet z{man.layout, vector_from(r.at("z"), man.layout.size(), rpath.string())};
      ds.records.push_back(
          {std::move(loads), std::move(x), std::move(z), r.value("source_tag", man.source)});
    }
    return ds;
  });
  const std::size_t n = out.records.size();
  for (std::size_t i : out.manifest.train) {
    if (i >= n) throw FormatError(fmt::format("{}: split index {} out of range", what, i));
  }
  for (std::size_t i : out.manifest.test) {
    if (i >= n) throw FormatError(fmt::format("{}: split index {} out of range", what, i));
  }
  return out;
}

}  // namespace pfr
