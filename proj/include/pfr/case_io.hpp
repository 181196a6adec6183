#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pfr/network.hpp"

namespace pfr {

/// Parses the MATPOWER-style subset: `mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
/// `mpc.branch` and (optionally) `mpc.gencost` with polynomial rows of degree
/// at most two. Other `mpc.*` assignments are skipped and reported through
/// `warnings`. Quantities are converted to per-unit on baseMVA and angles to
/// radians. Throws CaseError.
Network parse_case(std::string_view text, std::vector<std::string>* warnings = nullptr);

Network load_case_file(const std::filesystem::path& path,
                       std::vector<std::string>* warnings = nullptr);

/// Canonical text form; parse_case(write_case(n)) reproduces n.
std::string write_case(const Network& net, std::string_view name = "mpc_case");

/// FNV-1a over the canonical text. Identifies a network in interchange files.
std::uint64_t network_hash(const Network& net);
std::string network_hash_hex(const Network& net);

}  // namespace pfr
