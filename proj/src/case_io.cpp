#include "pfr/case_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "pfr/errors.hpp"

namespace pfr {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kDefaultAngleLimit = std::numbers::pi / 3.0;

struct Matrix {
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;  // source line of each row
};

class CaseReader {
 public:
  explicit CaseReader(std::string_view text, std::vector<std::string>* warnings)
      : text_(text), warnings_(warnings) {}

  void run() {
    while (skip_blank()) {
      const int stmt_line = line_;
      if (starts_with("function")) {
        skip_to_eol();
        continue;
      }
      if (!starts_with("mpc.")) {
        throw CaseError(CaseErrorKind::Syntax,
                        fmt::format("expected an 'mpc.<field> = ...' assignment, found '{}'",
                                    peek_word()),
                        stmt_line);
      }
      pos_ += 4;
      const std::string field = read_identifier();
      skip_inline_space();
      if (!consume('=')) {
        throw CaseError(CaseErrorKind::Syntax,
                        fmt::format("expected '=' after mpc.{}", field), line_);
      }
      skip_inline_space();
      if (field == "baseMVA") {
        base_mva_ = read_scalar();
      } else if (field == "bus" || field == "gen" || field == "branch" || field == "gencost") {
        Matrix m = read_matrix(field);
        if (field == "bus") bus_ = std::move(m);
        else if (field == "gen") gen_ = std::move(m);
        else if (field == "branch") branch_ = std::move(m);
        else gencost_ = std::move(m);
      } else {
        if (field != "version") warn(fmt::format("ignoring mpc.{} (line {})", field, stmt_line));
        skip_value();
      }
      skip_inline_space();
      consume(';');
    }
  }

  Network build() const;

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char cur() const { return text_[pos_]; }

  bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }

  void advance() {
    if (cur() == '\n') ++line_;
    ++pos_;
  }

  void skip_to_eol() {
    while (!at_end() && cur() != '\n') ++pos_;
  }

  void skip_inline_space() {
    while (!at_end()) {
      if (cur() == ' ' || cur() == '\t' || cur() == '\r') ++pos_;
      else if (cur() == '%') skip_to_eol();
      else if (cur() == '.' && starts_with("...")) skip_to_eol();
      else break;
    }
  }

  // Skips whitespace, newlines, comments and stray semicolons. False at end.
  bool skip_blank() {
    while (!at_end()) {
      if (cur() == '%') skip_to_eol();
      else if (std::isspace(static_cast<unsigned char>(cur())) || cur() == ';') advance();
      else return true;
    }
    return false;
  }

  bool consume(char c) {
    if (!at_end() && cur() == c) {
      advance();
      return true;
    }
    return false;
  }

  std::string peek_word() const {
    std::size_t end = pos_;
    while (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end]))) ++end;
    return std::string(text_.substr(pos_, end - pos_));
  }

  std::string read_identifier() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_')) ++pos_;
    if (start == pos_) throw CaseError(CaseErrorKind::Syntax, "expected a field name", line_);
    return std::string(text_.substr(start, pos_ - start));
  }

  std::optional<double> read_number() {
    std::size_t end = pos_;
    while (end < text_.size()) {
      const char c = text_[end];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' ||
          c == 'e' || c == 'E') {
        ++end;
      } else {
        break;
      }
    }
    const std::string_view tok = text_.substr(pos_, end - pos_);
    if (tok.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw CaseError(CaseErrorKind::Syntax, fmt::format("malformed number '{}'", tok), line_);
    }
    pos_ = end;
    if (!std::isfinite(value)) {
      throw CaseError(CaseErrorKind::InvalidValue, fmt::format("non-finite number '{}'", tok),
                      line_);
    }
    return value;
  }

  double read_scalar() {
    auto v = read_number();
    if (!v) throw CaseError(CaseErrorKind::Syntax, "expected a number", line_);
    return *v;
  }

  Matrix read_matrix(const std::string& field) {
    if (!consume('[')) {
      throw CaseError(CaseErrorKind::Syntax, fmt::format("expected '[' to open mpc.{}", field),
                      line_);
    }
    Matrix m;
    std::vector<double> row;
    int row_line = line_;
    auto flush = [&] {
      if (row.empty()) return;
      if (!m.rows.empty() && row.size() != m.rows.front().size()) {
        throw CaseError(CaseErrorKind::Syntax,
                        fmt::format("mpc.{} row has {} columns, expected {}", field, row.size(),
                                    m.rows.front().size()),
                        row_line);
      }
      m.rows.push_back(std::move(row));
      m.lines.push_back(row_line);
      row.clear();
    };
    while (true) {
      if (at_end()) {
        throw CaseError(CaseErrorKind::Syntax, fmt::format("unterminated mpc.{} matrix", field),
                        line_);
      }
      const char c = cur();
      if (c == ']') {
        advance();
        flush();
        break;
      }
      if (c == ';' || c == '\n') {
        flush();
        advance();
        row_line = line_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
        advance();
      } else if (c == '%') {
        skip_to_eol();
      } else {
        if (row.empty()) row_line = line_;
        auto v = read_number();
        if (!v) {
          throw CaseError(CaseErrorKind::Syntax,
                          fmt::format("unexpected '{}' in mpc.{} matrix", c, field), line_);
        }
        row.push_back(*v);
      }
    }
    return m;
  }

  // Skips a scalar, quoted string, [...] or {...} value of an ignored field.
  void skip_value() {
    if (at_end()) return;
    if (cur() == '[' || cur() == '{') {
      const char close = cur() == '[' ? ']' : '}';
      const int open_line = line_;
      int depth = 0;
      bool in_quote = false;
      while (!at_end()) {
        const char c = cur();
        if (c == '\'') in_quote = !in_quote;
        if (!in_quote) {
          if (c == '%') {
            skip_to_eol();
            continue;
          }
          if (c == '[' || c == '{') ++depth;
          if (c == ']' || c == '}') --depth;
        }
        advance();
        if (depth == 0 && c == close) return;
      }
      throw CaseError(CaseErrorKind::Syntax, "unterminated bracketed value", open_line);
    }
    while (!at_end() && cur() != ';' && cur() != '\n') advance();
  }

  void warn(std::string msg) const {
    if (warnings_) warnings_->push_back(std::move(msg));
  }

  std::string_view text_;
  std::vector<std::string>* warnings_;
  std::size_t pos_ = 0;
  int line_ = 1;

 public:
  std::optional<double> base_mva_;
  std::optional<Matrix> bus_, gen_, branch_, gencost_;
};

void require_columns(const Matrix& m, std::size_t cols, const char* field) {
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (m.rows[r].size() < cols) {
      throw CaseError(CaseErrorKind::Syntax,
                      fmt::format("mpc.{} needs at least {} columns", field, cols), m.lines[r]);
    }
  }
}

int as_int(double v, int line, const char* what) {
  if (v != std::round(v)) {
    throw CaseError(CaseErrorKind::InvalidValue, fmt::format("{} must be an integer", what), line);
  }
  return static_cast<int>(v);
}

double angle_limit(double angmin_deg, double angmax_deg) {
  const double lo = std::abs(angmin_deg);
  const double hi = std::abs(angmax_deg);
  const bool lo_set = lo > 0.0 && lo < 360.0;
  const bool hi_set = hi > 0.0 && hi < 360.0;
  if (lo_set && hi_set) return std::min(lo, hi) * kDegToRad;
  if (lo_set) return lo * kDegToRad;
  if (hi_set) return hi * kDegToRad;
  return kDefaultAngleLimit;
}

Network CaseReader::build() const {
  if (!base_mva_) throw CaseError(CaseErrorKind::Syntax, "missing mpc.baseMVA");
  if (!bus_) throw CaseError(CaseErrorKind::Syntax, "missing mpc.bus");
  if (!gen_) throw CaseError(CaseErrorKind::Syntax, "missing mpc.gen");
  if (!branch_) throw CaseError(CaseErrorKind::Syntax, "missing mpc.branch");
  const double base = *base_mva_;
  if (!(base > 0.0)) throw CaseError(CaseErrorKind::InvalidValue, "baseMVA must be positive");

  require_columns(*bus_, 13, "bus");
  require_columns(*gen_, 10, "gen");
  require_columns(*branch_, 11, "branch");

  std::vector<Bus> buses;
  std::vector<int> file_types;
  for (std::size_t r = 0; r < bus_->rows.size(); ++r) {
    const auto& row = bus_->rows[r];
    const int line = bus_->lines[r];
    Bus b;
    b.id = as_int(row[0], line, "bus id");
    const int type = as_int(row[1], line, "bus type");
    if (type < 1 || type > 4) {
      throw CaseError(CaseErrorKind::InvalidValue, fmt::format("bus type {} is invalid", type),
                      line);
    }
    if (type == 4) {
      throw CaseError(CaseErrorKind::Unsupported, "isolated buses (type 4) are not supported",
                      line);
    }
    file_types.push_back(type);
    b.p_load = row[2] / base;
    b.q_load = row[3] / base;
    b.g_shunt = row[4] / base;
    b.b_shunt = row[5] / base;
    b.v_max = row[11];
    b.v_min = row[12];
    buses.push_back(b);
  }

  std::vector<Generator> gens;
  std::vector<std::size_t> gen_rows;  // row of each in-service generator
  for (std::size_t r = 0; r < gen_->rows.size(); ++r) {
    const auto& row = gen_->rows[r];
    if (row[7] <= 0.0) {
      warn(fmt::format("skipping out-of-service generator on line {}", gen_->lines[r]));
      continue;
    }
    Generator g;
    g.bus = as_int(row[0], gen_->lines[r], "generator bus");
    g.p_set = row[1] / base;
    g.q_set = row[2] / base;
    g.q_max = row[3] / base;
    g.q_min = row[4] / base;
    g.v_set = row[5];
    g.p_max = row[8] / base;
    g.p_min = row[9] / base;
    gens.push_back(g);
    gen_rows.push_back(r);
  }

  if (gencost_) {
    const std::size_t total_gens = gen_->rows.size();
    if (gencost_->rows.size() != total_gens && gencost_->rows.size() != 2 * total_gens) {
      throw CaseError(CaseErrorKind::InvalidValue,
                      fmt::format("mpc.gencost has {} rows for {} generators",
                                  gencost_->rows.size(), total_gens));
    }
    if (gencost_->rows.size() == 2 * total_gens) {
      warn("ignoring reactive-power cost rows in mpc.gencost");
    }
    for (std::size_t k = 0; k < gens.size(); ++k) {
      const std::size_t r = gen_rows[k];
      const auto& row = gencost_->rows[r];
      const int line = gencost_->lines[r];
      if (row.size() < 4) {
        throw CaseError(CaseErrorKind::Syntax, "mpc.gencost rows need at least 4 columns", line);
      }
      const int model = as_int(row[0], line, "cost model");
      if (model != 2) {
        throw CaseError(CaseErrorKind::Unsupported,
                        "only polynomial (model 2) generator costs are supported", line);
      }
      const int n = as_int(row[3], line, "cost coefficient count");
      if (n < 0 || row.size() < static_cast<std::size_t>(4 + n)) {
        throw CaseError(CaseErrorKind::Syntax, "mpc.gencost row is shorter than its count", line);
      }
      // coefficients are listed highest order first
      std::vector<double> c(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(n - 1 - j)] = row[4 + j];
      for (std::size_t j = 3; j < c.size(); ++j) {
        if (c[j] != 0.0) {
          throw CaseError(CaseErrorKind::Unsupported,
                          "polynomial costs above degree two are not supported", line);
        }
      }
      Generator& g = gens[k];
      g.c0 = c.size() > 0 ? c[0] : 0.0;
      g.c1 = c.size() > 1 ? c[1] * base : 0.0;
      g.c2 = c.size() > 2 ? c[2] * base * base : 0.0;
    }
  } else {
    warn("no mpc.gencost; generator costs default to zero");
  }

  std::vector<Branch> branches;
  for (std::size_t r = 0; r < branch_->rows.size(); ++r) {
    const auto& row = branch_->rows[r];
    const int line = branch_->lines[r];
    if (row[10] <= 0.0) {
      warn(fmt::format("skipping out-of-service branch on line {}", line));
      continue;
    }
    Branch br;
    br.from = as_int(row[0], line, "branch endpoint");
    br.to = as_int(row[1], line, "branch endpoint");
    br.r = row[2];
    br.x = row[3];
    br.b_charge = row[4];
    br.s_max = row[5] / base;
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.shift = row[9] * kDegToRad;
    br.theta_max = row.size() >= 13 ? angle_limit(row[11], row[12]) : kDefaultAngleLimit;
    if (br.s_max < 0.0) {
      throw CaseError(CaseErrorKind::InvalidValue, "negative branch rating", line);
    }
    branches.push_back(br);
  }

  // Reference bus comes from the file; generator buses become PV.
  std::vector<bool> has_gen(buses.size(), false);
  std::unordered_map<int, std::size_t> pos;
  for (std::size_t i = 0; i < buses.size(); ++i) pos.emplace(buses[i].id, i);
  for (const auto& g : gens) {
    if (auto it = pos.find(g.bus); it != pos.end()) has_gen[it->second] = true;
  }
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (file_types[i] == 3) buses[i].type = BusType::Slack;
    else buses[i].type = has_gen[i] ? BusType::PV : BusType::PQ;
  }

  return Network(base, std::move(buses), std::move(branches), std::move(gens));
}

}  // namespace

Network parse_case(std::string_view text, std::vector<std::string>* warnings) {
  CaseReader reader(text, warnings);
  reader.run();
  return reader.build();
}

Network load_case_file(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", fmt::format("cannot open case file {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str(), warnings);
}

std::string write_case(const Network& net, std::string_view name) {
  const double base = net.base_mva();
  std::string out;
  auto emit = [&out](std::string_view s) { out.append(s); };
  emit(fmt::format("function mpc = {}\n", name));
  emit("mpc.version = '2';\n");
  emit(fmt::format("mpc.baseMVA = {:.17g};\n\n", base));

  emit("%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\nmpc.bus = [\n");
  for (const Bus& b : net.buses()) {
    const int type = b.type == BusType::Slack ? 3 : b.type == BusType::PV ? 2 : 1;
    emit(fmt::format("\t{}\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t1\t1\t0\t0\t1\t{:.17g}\t{:.17g};\n",
                     b.id, type, b.p_load * base, b.q_load * base, b.g_shunt * base,
                     b.b_shunt * base, b.v_max, b.v_min));
  }
  emit("];\n\n");

  emit("%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\nmpc.gen = [\n");
  for (const Generator& g : net.generators()) {
    emit(fmt::format("\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t1\t{:.17g}\t{:.17g};\n",
                     g.bus, g.p_set * base, g.q_set * base, g.q_max * base, g.q_min * base,
                     g.v_set, base, g.p_max * base, g.p_min * base));
  }
  emit("];\n\n");

  emit("%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\nmpc.branch = [\n");
  for (const Branch& br : net.branches()) {
    const double limit_deg = br.theta_max / kDegToRad;
    emit(fmt::format(
        "\t{}\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t0\t0\t{:.17g}\t{:.17g}\t1\t{:.17g}\t{:.17g};\n",
        br.from, br.to, br.r, br.x, br.b_charge, br.s_max * base, br.tap, br.shift / kDegToRad,
        -limit_deg, limit_deg));
  }
  emit("];\n\n");

  emit("%% 2 startup shutdown n c2 c1 c0\nmpc.gencost = [\n");
  for (const Generator& g : net.generators()) {
    emit(fmt::format("\t2\t0\t0\t3\t{:.17g}\t{:.17g}\t{:.17g};\n", g.c2 / (base * base),
                     g.c1 / base, g.c0));
  }
  emit("];\n");
  return out;
}

std::uint64_t network_hash(const Network& net) {
  const std::string text = write_case(net);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string network_hash_hex(const Network& net) {
  return fmt::format("{:016x}", network_hash(net));
}

}  // namespace pfr
