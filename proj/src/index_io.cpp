// Index container:
//
//   offset 0   8 bytes   magic "LPANNIDX"
//   offset 8   u32 LE    format major version (1)
//   offset 12  u32 LE    format minor version
//   offset 16  u64 LE    header length H
//   offset 24  H bytes   JSON header, UTF-8
//   then zero padding to a multiple of 8, then the data section.
//
// The header's "blocks" array lists every binary block as {type, count, offset}, with
// type "f64" (IEEE-754 binary64) or "u64", little-endian, offset in bytes from the start
// of the data section (always 8-aligned). Structure nodes refer to blocks by index.
// Full description in docs/index_format.md.

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "lpann/error.hpp"
#include "lpann/recursive_ann.hpp"

namespace lpann {

namespace {

using json = nlohmann::json;

constexpr std::array<char, 8> kMagic = {'L', 'P', 'A', 'N', 'N', 'I', 'D', 'X'};
constexpr std::uint32_t kMajor = 1;
constexpr std::uint32_t kMinor = 0;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

class BlockWriter {
 public:
  std::size_t f64(std::span<const double> values) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(values.size() * 8);
    for (double v : values) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
    return add("f64", values.size(), std::move(bytes));
  }

  template <class Int>
  std::size_t u64(std::span<const Int> values) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(values.size() * 8);
    for (Int v : values) put_u64(bytes, static_cast<std::uint64_t>(v));
    return add("u64", values.size(), std::move(bytes));
  }

  json table() const { return table_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

 private:
  std::size_t add(const char* type, std::size_t count, std::vector<std::uint8_t> bytes) {
    const std::size_t index = table_.size();
    table_.push_back({{"type", type}, {"count", count}, {"offset", data_.size()}});
    data_.insert(data_.end(), bytes.begin(), bytes.end());
    return index;
  }

  json table_ = json::array();
  std::vector<std::uint8_t> data_;
};

class BlockReader {
 public:
  BlockReader(const json& table, std::vector<std::uint8_t> data) : table_(table), data_(std::move(data)) {}

  std::vector<double> f64(const json& ref) const {
    auto [p, count] = locate(ref, "f64");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<double>(get_u64(p + 8 * i));
    return out;
  }

  template <class Int = std::uint64_t>
  std::vector<Int> u64(const json& ref) const {
    auto [p, count] = locate(ref, "u64");
    std::vector<Int> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t v = get_u64(p + 8 * i);
      if (v > std::numeric_limits<Int>::max()) throw parse_error("integer block value out of range");
      out[i] = static_cast<Int>(v);
    }
    return out;
  }

 private:
  std::pair<const std::uint8_t*, std::size_t> locate(const json& ref, const char* type) const {
    const std::size_t index = ref.get<std::size_t>();
    if (index >= table_.size()) throw parse_error("block index " + std::to_string(index) + " out of range");
    const json& b = table_[index];
    if (b.at("type").get<std::string>() != type) throw parse_error("block " + std::to_string(index) + " has wrong type");
    const std::size_t count = b.at("count").get<std::size_t>();
    const std::size_t offset = b.at("offset").get<std::size_t>();
    if (offset > data_.size() || count > (data_.size() - offset) / 8)
      throw parse_error("block " + std::to_string(index) + " extends past end of file");
    return {data_.data() + offset, count};
  }

  json table_;
  std::vector<std::uint8_t> data_;
};

json write_node(const LevelScheme& node, BlockWriter& blocks);

json write_copy(const SchemeCopy& copy, BlockWriter& blocks) {
  json out;
  out["l2"] = json::array();
  for (const auto& s : copy.l2) {
    const auto& parts = s.parts();
    const auto& pr = parts.params;
    out["l2"].push_back({{"k", pr.k},
                         {"tables", pr.tables},
                         {"max_probe", pr.max_probe},
                         {"w", pr.w},
                         {"r", pr.r},
                         {"delta_fail", pr.delta_fail},
                         {"seed", pr.seed},
                         {"projections", blocks.f64(parts.projections)},
                         {"offsets", blocks.f64(parts.offsets)},
                         {"keys", blocks.u64(std::span<const std::uint64_t>(parts.keys))}});
  }
  out["coarse"] = json::array();
  for (const auto& s : copy.coarse) {
    const auto& parts = s.parts();
    const auto& pr = parts.params;
    std::vector<std::uint64_t> reps, offsets{0};
    for (const auto& g : parts.representatives) {
      reps.insert(reps.end(), g.begin(), g.end());
      offsets.push_back(reps.size());
    }
    out["coarse"].push_back({{"p", pr.p},
                             {"r", pr.r},
                             {"side", pr.side},
                             {"c0", pr.c0},
                             {"grids", pr.grids},
                             {"seed", pr.seed},
                             {"shifts", blocks.f64(parts.shifts)},
                             {"representatives", blocks.u64(std::span<const std::uint64_t>(reps))},
                             {"representative_offsets", blocks.u64(std::span<const std::uint64_t>(offsets))}});
  }
  out["ladder"] = json::array();
  for (const auto& level : copy.ladder) {
    const SparseCover& cover = level.cover;
    std::vector<std::uint64_t> members, offsets{0}, centers;
    for (const auto& c : cover.clusters) {
      members.insert(members.end(), c.members.begin(), c.members.end());
      offsets.push_back(members.size());
      centers.push_back(c.center);
    }
    json children = json::array();
    for (const auto& lc : level.clusters) children.push_back(lc.child ? write_node(*lc.child, blocks) : json(nullptr));
    const MazurMapSpec& map = level.clusters.empty() ? MazurMapSpec{} : level.clusters.front().map;
    out["ladder"].push_back({{"index", level.index},
                             {"base_approx", level.base_approx},
                             {"new_approx", level.new_approx},
                             {"beta_eff", level.beta_eff},
                             {"map", {{"p", map.p}, {"q", map.q}, {"c0", map.c0}}},
                             {"cover",
                              {{"beta", cover.beta},
                               {"radius", cover.radius},
                               {"diameter_bound", cover.diameter_bound},
                               {"members", blocks.u64(std::span<const std::uint64_t>(members))},
                               {"member_offsets", blocks.u64(std::span<const std::uint64_t>(offsets))},
                               {"centers", blocks.u64(std::span<const std::uint64_t>(centers))},
                               {"covering_ref", blocks.u64(std::span<const std::size_t>(cover.covering_ref))}}},
                             {"children", std::move(children)}});
  }
  return out;
}

json write_node(const LevelScheme& node, BlockWriter& blocks) {
  json out;
  out["t"] = node.norm();
  out["r"] = node.radius();
  out["approx"] = node.approximation();
  out["dim"] = node.points().dim();
  out["points"] = blocks.f64(node.points().coords());
  out["copies"] = json::array();
  for (const auto& copy : node.copies()) out["copies"].push_back(write_copy(copy, blocks));
  return out;
}

std::vector<Index> to_ids(const std::vector<std::uint64_t>& v) {
  std::vector<Index> out;
  out.reserve(v.size());
  for (auto x : v) {
    if (x > std::numeric_limits<Index>::max()) throw parse_error("point id out of range");
    out.push_back(static_cast<Index>(x));
  }
  return out;
}

std::vector<std::vector<Index>> split(const std::vector<Index>& flat, const std::vector<std::uint64_t>& offsets) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != flat.size()) throw parse_error("inconsistent offsets block");
  std::vector<std::vector<Index>> out;
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
    if (offsets[i] > offsets[i + 1]) throw parse_error("offsets block not monotone");
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                     flat.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
  }
  return out;
}

std::unique_ptr<LevelScheme> read_node(const json& j, const BlockReader& blocks) {
  const std::size_t dim = j.at("dim").get<std::size_t>();
  auto points = std::make_shared<const PointSet>(dim, blocks.f64(j.at("points")));
  const std::size_t n = points->size();
  std::vector<SchemeCopy> copies;
  for (const json& jc : j.at("copies")) {
    SchemeCopy copy;
    for (const json& js : jc.at("l2")) {
      L2Scheme::Parts parts;
      parts.params.k = js.at("k");
      parts.params.tables = js.at("tables");
      parts.params.max_probe = js.at("max_probe");
      parts.params.w = js.at("w");
      parts.params.r = js.at("r");
      parts.params.delta_fail = js.at("delta_fail");
      parts.params.seed = js.at("seed");
      parts.projections = blocks.f64(js.at("projections"));
      parts.offsets = blocks.f64(js.at("offsets"));
      parts.keys = blocks.u64(js.at("keys"));
      copy.l2.push_back(L2Scheme::from_parts(points, std::move(parts)));
    }
    for (const json& js : jc.at("coarse")) {
      CoarseScheme::Parts parts;
      parts.params.p = js.at("p");
      parts.params.r = js.at("r");
      parts.params.side = js.at("side");
      parts.params.c0 = js.at("c0");
      parts.params.grids = js.at("grids");
      parts.params.seed = js.at("seed");
      parts.shifts = blocks.f64(js.at("shifts"));
      parts.representatives = split(to_ids(blocks.u64(js.at("representatives"))), blocks.u64(js.at("representative_offsets")));
      copy.coarse.push_back(CoarseScheme::from_parts(points, std::move(parts)));
    }
    for (const json& jl : jc.at("ladder")) {
      LadderLevel level;
      level.index = jl.at("index");
      level.base_approx = jl.at("base_approx");
      level.new_approx = jl.at("new_approx");
      level.beta_eff = jl.at("beta_eff");
      const json& jcov = jl.at("cover");
      level.cover.beta = jcov.at("beta");
      level.cover.radius = jcov.at("radius");
      level.cover.diameter_bound = jcov.at("diameter_bound");
      auto members = split(to_ids(blocks.u64(jcov.at("members"))), blocks.u64(jcov.at("member_offsets")));
      auto centers = to_ids(blocks.u64(jcov.at("centers")));
      if (centers.size() != members.size()) throw parse_error("cover centers and clusters disagree");
      for (std::size_t c = 0; c < members.size(); ++c) {
        for (Index m : members[c])
          if (m >= n) throw parse_error("cover member out of range");
        level.cover.clusters.push_back({std::move(members[c]), centers[c]});
      }
      level.cover.covering_ref = blocks.u64<std::size_t>(jcov.at("covering_ref"));
      if (level.cover.covering_ref.size() != n) throw parse_error("covering_ref size mismatch");
      for (auto ref : level.cover.covering_ref)
        if (ref >= level.cover.clusters.size()) throw parse_error("covering_ref out of range");
      const json& jmap = jl.at("map");
      const MazurMapSpec map = make_mazur_spec(jmap.at("p"), jmap.at("q"), jmap.at("c0"));
      const json& children = jl.at("children");
      if (children.size() != level.cover.clusters.size()) throw parse_error("ladder children and clusters disagree");
      for (const json& jchild : children) {
        LadderCluster lc;
        lc.map = map;
        if (!jchild.is_null()) lc.child = read_node(jchild, blocks);
        level.clusters.push_back(std::move(lc));
      }
      copy.ladder.push_back(std::move(level));
    }
    copies.push_back(std::move(copy));
  }
  return std::make_unique<LevelScheme>(
      LevelScheme::assemble(std::move(points), j.at("t"), j.at("r"), j.at("approx"), std::move(copies)));
}

json config_json(const SchemeConfig& c) {
  return {{"p", c.p},
          {"r", c.r},
          {"delta", c.delta},
          {"seed", c.seed},
          {"clamp_to_log_dim", c.clamp_to_log_dim},
          {"primitive_copies", c.amplification.primitive_copies},
          {"level_copies", c.amplification.level_copies}};
}

}  // namespace

void LpScheme::save(std::ostream& out) const {
  BlockWriter blocks;
  json header;
  header["format"] = "lpann-index";
  header["version"] = {kMajor, kMinor};
  header["p"] = config_.p;
  header["r"] = config_.r;
  header["d"] = dim();
  header["n"] = original_size_;
  header["config"] = config_json(config_);
  header["plan"] = {{"working_p", plan_.working_p},
                    {"holder_factor", plan_.holder_factor},
                    {"beta", plan_.beta},
                    {"level_copies", plan_.level_copies}};
  header["levels"] = json::array();
  for (const auto& lb : bound_.levels)
    header["levels"].push_back({{"t", lb.t}, {"c0_hat", lb.c0_hat}, {"k", lb.k}, {"beta_eff", lb.beta_eff}, {"c_t", lb.c_t}});
  header["c_p"] = bound_.c_p;
  header["original_ids"] = blocks.u64(std::span<const Index>(original_ids_));
  header["root"] = write_node(*root_, blocks);
  header["blocks"] = blocks.table();

  const std::string text = header.dump();
  std::vector<std::uint8_t> prefix(kMagic.begin(), kMagic.end());
  for (std::uint32_t v : {kMajor, kMinor})
    for (int i = 0; i < 4; ++i) prefix.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  put_u64(prefix, text.size());
  out.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::size_t pad = (8 - (prefix.size() + text.size()) % 8) % 8;
  const char zeros[8] = {};
  out.write(zeros, static_cast<std::streamsize>(pad));
  out.write(reinterpret_cast<const char*>(blocks.data().data()), static_cast<std::streamsize>(blocks.data().size()));
  if (!out) throw io_error("failed writing index");
}

LpScheme LpScheme::load(std::istream& in) {
  std::array<std::uint8_t, 24> prefix{};
  if (!in.read(reinterpret_cast<char*>(prefix.data()), prefix.size())) throw parse_error("index file truncated");
  if (!std::equal(kMagic.begin(), kMagic.end(), prefix.begin())) throw parse_error("not an lpann index (bad magic)");
  std::uint32_t major = 0;
  for (int i = 0; i < 4; ++i) major |= static_cast<std::uint32_t>(prefix[8 + i]) << (8 * i);
  if (major != kMajor) throw parse_error("unsupported index format version " + std::to_string(major));
  const std::uint64_t header_len = get_u64(prefix.data() + 16);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw parse_error("index header truncated");
  const std::size_t pad = (8 - (prefix.size() + header_len) % 8) % 8;
  in.ignore(static_cast<std::streamsize>(pad));
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  try {
    const json header = json::parse(text);
    BlockReader blocks(header.at("blocks"), std::move(data));
    const json& jc = header.at("config");
    LpScheme s;
    s.config_.p = jc.at("p");
    s.config_.r = jc.at("r");
    s.config_.delta = jc.at("delta");
    s.config_.seed = jc.at("seed");
    s.config_.clamp_to_log_dim = jc.at("clamp_to_log_dim");
    s.config_.amplification.primitive_copies = jc.at("primitive_copies");
    s.config_.amplification.level_copies = jc.at("level_copies");
    const std::size_t d = header.at("d");
    s.plan_ = plan_norm(s.config_, d);
    s.bound_ = approximation_bound(s.config_, d);
    s.original_size_ = header.at("n");
    s.original_ids_ = to_ids(blocks.u64(header.at("original_ids")));
    s.root_ = read_node(header.at("root"), blocks);
    if (s.root_->points().dim() != d || s.original_ids_.size() != s.root_->points().size())
      throw parse_error("index root does not match header");
    s.index_exact();
    return s;
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed index header: ") + e.what());
  }
}

}  // namespace lpann
