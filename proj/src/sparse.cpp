// Copyright 2026 The rtnerf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rtnerf/sparse.hpp"

#include <array>
#include <cstring>

namespace rtnerf {

const char* variant_name(Variant v) { return v == Variant::Coo ? "coo" : "bitmap"; }

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), &v, sizeof(T));
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, const char* field) : bytes_(std::move(bytes)), field_(field) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw std::invalid_argument(std::string("truncated dump payload: ") + field_);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void finish() const {
    if (pos_ != bytes_.size()) throw std::invalid_argument(std::string("trailing bytes in dump payload: ") + field_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
  const char* field_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> payload_bytes(const nlohmann::json& payload, const char* key) {
  if (!payload.contains(key) || !payload[key].is_string()) {
    throw std::invalid_argument(std::string("dump payload missing ") + key);
  }
  return base64_decode(payload[key].get<std::string>());
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out.push_back(kAlphabet[(triple >> 18) & 63]);
    out.push_back(kAlphabet[(triple >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? kAlphabet[(triple >> 6) & 63] : '=');
    out.push_back(i + 2 < bytes.size() ? kAlphabet[triple & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length is not a multiple of 4");
  auto value = [](char c) -> int {
    if (c == '=') return -1;
    const char* p = std::strchr(kAlphabet, c);
    if (p == nullptr || c == '\0') throw std::invalid_argument("invalid base64 character");
    return static_cast<int>(p - kAlphabet);
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const int v0 = value(text[i]), v1 = value(text[i + 1]), v2 = value(text[i + 2]), v3 = value(text[i + 3]);
    if (v0 < 0 || v1 < 0) throw std::invalid_argument("misplaced base64 padding");
    const bool last = i + 4 == text.size();
    if ((v2 < 0 || v3 < 0) && !last) throw std::invalid_argument("misplaced base64 padding");
    if (v2 < 0 && v3 >= 0) throw std::invalid_argument("misplaced base64 padding");
    const std::uint32_t triple = (std::uint32_t(v0) << 18) | (std::uint32_t(v1) << 12) |
                                 (std::uint32_t(v2 < 0 ? 0 : v2) << 6) | std::uint32_t(v3 < 0 ? 0 : v3);
    out.push_back(static_cast<std::uint8_t>(triple >> 16));
    if (v2 >= 0) out.push_back(static_cast<std::uint8_t>(triple >> 8));
    if (v3 >= 0) out.push_back(static_cast<std::uint8_t>(triple));
  }
  return out;
}

// Payload layouts (little-endian):
//   bitmap: row_ptr u32[rows+1]; bits packed row-major, LSB first,
//           ceil(rows*cols/8) bytes; values f32[nnz]
//   coo:    entries (u16 x, u16 y, f32 v)[nnz]; tree (u8 axis, u16 threshold)[nodes];
//           leaf_offsets u32[leaves+1]; leaf_entries u32[nnz]
nlohmann::json dump_encoding(const HybridEncoding<float>& e) {
  nlohmann::json j;
  j["variant"] = variant_name(e.variant);
  j["rows"] = e.rows;
  j["cols"] = e.cols;
  j["sparsity"] = e.sparsity;
  j["nnz"] = e.nnz;
  j["encoded_bytes"] = e.encoded_bytes;
  j["tree_height"] = e.tree_height();
  nlohmann::json payload;
  if (e.variant == Variant::Bitmap) {
    const auto& b = e.bitmap();
    ByteWriter ptr;
    for (auto p : b.row_ptr) ptr.put<std::uint32_t>(p);
    const std::size_t elems = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
    std::vector<std::uint8_t> bits((elems + 7) / 8, 0);
    for (int x = 0; x < b.rows; ++x)
      for (int y = 0; y < b.cols; ++y)
        if (b.bit(x, y)) {
          const std::size_t k = static_cast<std::size_t>(x) * b.cols + y;
          bits[k / 8] = static_cast<std::uint8_t>(bits[k / 8] | (1u << (k % 8)));
        }
    ByteWriter vals;
    for (float v : b.values) vals.put<float>(v);
    payload["row_ptr"] = base64_encode(ptr.take());
    payload["bitmap"] = base64_encode(bits);
    payload["values"] = base64_encode(vals.take());
  } else {
    const auto& c = e.coo();
    ByteWriter entries, tree, offsets, members;
    for (const auto& en : c.entries) {
      entries.put<std::uint16_t>(static_cast<std::uint16_t>(en.x));
      entries.put<std::uint16_t>(static_cast<std::uint16_t>(en.y));
      entries.put<float>(en.value);
    }
    for (const auto& n : c.nodes) {
      tree.put<std::uint8_t>(n.axis);
      tree.put<std::uint16_t>(static_cast<std::uint16_t>(n.threshold));
    }
    for (auto o : c.leaf_offsets) offsets.put<std::uint32_t>(o);
    for (auto m : c.leaf_entries) members.put<std::uint32_t>(m);
    payload["entries"] = base64_encode(entries.take());
    payload["tree"] = base64_encode(tree.take());
    payload["leaf_offsets"] = base64_encode(offsets.take());
    payload["leaf_entries"] = base64_encode(members.take());
    j["bucket_capacity"] = c.bucket_capacity;
  }
  j["payload"] = std::move(payload);
  return j;
}

HybridEncoding<float> load_encoding_dump(const nlohmann::json& j, const SizeModel& m) {
  HybridEncoding<float> e;
  const std::string variant = j.at("variant").get<std::string>();
  if (variant != "bitmap" && variant != "coo") throw std::invalid_argument("unknown variant: " + variant);
  e.variant = variant == "coo" ? Variant::Coo : Variant::Bitmap;
  e.rows = j.at("rows").get<int>();
  e.cols = j.at("cols").get<int>();
  if (e.rows < 1 || e.cols < 1) throw std::invalid_argument("dump dimensions must be positive");
  e.nnz = j.at("nnz").get<std::size_t>();
  e.sparsity = j.at("sparsity").get<double>();
  const auto& payload = j.at("payload");
  const auto elems = static_cast<std::size_t>(e.rows) * static_cast<std::size_t>(e.cols);
  if (e.variant == Variant::Bitmap) {
    BitmapEncoding<float> b;
    b.rows = e.rows;
    b.cols = e.cols;
    b.words_per_row = (b.cols + 63) / 64;
    ByteReader ptr(payload_bytes(payload, "row_ptr"), "row_ptr");
    for (int x = 0; x <= b.rows; ++x) b.row_ptr.push_back(ptr.get<std::uint32_t>());
    ptr.finish();
    const auto bits = payload_bytes(payload, "bitmap");
    if (bits.size() != (elems + 7) / 8) throw std::invalid_argument("bitmap payload has the wrong length");
    b.bitmap.assign(static_cast<std::size_t>(b.rows) * b.words_per_row, 0);
    for (std::size_t k = 0; k < elems; ++k) {
      if ((bits[k / 8] >> (k % 8)) & 1u) {
        const int x = static_cast<int>(k / b.cols), y = static_cast<int>(k % b.cols);
        b.bitmap[static_cast<std::size_t>(x) * b.words_per_row + y / 64] |= std::uint64_t{1} << (y % 64);
      }
    }
    ByteReader vals(payload_bytes(payload, "values"), "values");
    for (std::size_t k = 0; k < e.nnz; ++k) b.values.push_back(vals.get<float>());
    vals.finish();
    std::size_t running = 0;
    for (int x = 0; x < b.rows; ++x) {
      if (b.row_ptr[static_cast<std::size_t>(x)] != running) throw std::invalid_argument("row_ptr disagrees with bitmap");
      running += b.row_popcount(x);
    }
    if (running != e.nnz || b.row_ptr.back() != e.nnz) throw std::invalid_argument("row_ptr disagrees with nnz");
    e.payload = std::move(b);
  } else {
    CooEncoding<float> c;
    c.rows = e.rows;
    c.cols = e.cols;
    c.height = j.at("tree_height").get<int>();
    c.bucket_capacity = j.value("bucket_capacity", kDefaultBucketCapacity);
    if (c.height < 0 || c.height > 30) throw std::invalid_argument("tree height out of range");
    ByteReader entries(payload_bytes(payload, "entries"), "entries");
    for (std::size_t k = 0; k < e.nnz; ++k) {
      const int x = entries.get<std::uint16_t>();
      const int y = entries.get<std::uint16_t>();
      c.entries.push_back({x, y, entries.get<float>()});
    }
    entries.finish();
    ByteReader tree(payload_bytes(payload, "tree"), "tree");
    for (std::size_t k = 0; k + 1 < c.num_leaves(); ++k) {
      const auto axis = tree.get<std::uint8_t>();
      c.nodes.push_back({axis, tree.get<std::uint16_t>()});
    }
    tree.finish();
    ByteReader offsets(payload_bytes(payload, "leaf_offsets"), "leaf_offsets");
    for (std::size_t k = 0; k <= c.num_leaves(); ++k) c.leaf_offsets.push_back(offsets.get<std::uint32_t>());
    offsets.finish();
    ByteReader members(payload_bytes(payload, "leaf_entries"), "leaf_entries");
    for (std::size_t k = 0; k < e.nnz; ++k) {
      const auto idx = members.get<std::uint32_t>();
      if (idx >= e.nnz) throw std::invalid_argument("leaf entry index out of range");
      c.leaf_entries.push_back(idx);
    }
    members.finish();
    if (c.leaf_offsets.front() != 0 || c.leaf_offsets.back() != e.nnz ||
        !std::is_sorted(c.leaf_offsets.begin(), c.leaf_offsets.end())) {
      throw std::invalid_argument("leaf offsets are inconsistent");
    }
    e.payload = std::move(c);
  }
  e.encoded_bytes = encoded_size(e, m);
  return e;
}

SparsityCensus sparsity_census(const VmDecomposition& d) {
  SparsityCensus census;
  for (const auto& view : factor_views(d)) {
    FactorSparsity f;
    f.label = view.label();
    f.rows = static_cast<int>(view.values.rows());
    f.cols = static_cast<int>(view.values.cols());
    f.total = static_cast<std::size_t>(view.values.size());
    f.zeros = static_cast<std::size_t>((view.values.array() == 0.0f).count());
    f.sparsity = f.total == 0 ? 0.0 : static_cast<double>(f.zeros) / static_cast<double>(f.total);
    f.variant = is_high_sparsity(f.zeros, f.total) ? Variant::Coo : Variant::Bitmap;
    (f.variant == Variant::Coo ? census.high_count : census.low_count) += 1;
    census.factors.push_back(std::move(f));
  }
  return census;
}

nlohmann::json to_json(const SparsityCensus& c) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : c.factors) {
    factors.push_back({{"label", f.label},
                       {"rows", f.rows},
                       {"cols", f.cols},
                       {"zeros", f.zeros},
                       {"total", f.total},
                       {"sparsity", f.sparsity},
                       {"variant", variant_name(f.variant)}});
  }
  return {{"factors", factors},
          {"low_count", c.low_count},
          {"high_count", c.high_count},
          {"low_share", c.low_share()}};
}

std::uint64_t CodecStats::bitmap_queries() const {
  std::uint64_t n = 0;
  for (const auto& [cycles, count] : bitmap_cycles) n += count;
  return n;
}

std::uint64_t CodecStats::coo_queries() const {
  std::uint64_t n = 0;
  for (const auto& [cycles, count] : coo_cycles) n += count;
  return n;
}

void CodecStats::merge(const CodecStats& other) {
  enabled = enabled || other.enabled;
  for (const auto& [c, n] : other.bitmap_cycles) bitmap_cycles[c] += n;
  for (const auto& [c, n] : other.coo_cycles) coo_cycles[c] += n;
}

namespace {

nlohmann::json histogram_json(const std::map<int, std::uint64_t>& h) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [c, n] : h) j[std::to_string(c)] = n;
  return j;
}

std::map<int, std::uint64_t> histogram_from_json(const nlohmann::json& j, const char* key) {
  if (!j.is_object()) throw std::invalid_argument(std::string(key) + " must be an object");
  std::map<int, std::uint64_t> h;
  for (const auto& [k, v] : j.items()) {
    std::size_t used = 0;
    const int cycles = std::stoi(k, &used);
    if (used != k.size() || cycles < 1) throw std::invalid_argument(std::string("bad cycle bucket in ") + key);
    h[cycles] = v.get<std::uint64_t>();
  }
  return h;
}

}  // namespace

nlohmann::json to_json(const CodecStats& s) {
  return {{"enabled", s.enabled},
          {"bitmap_cycles", histogram_json(s.bitmap_cycles)},
          {"coo_cycles", histogram_json(s.coo_cycles)},
          {"bitmap_queries", s.bitmap_queries()},
          {"coo_queries", s.coo_queries()},
          {"footprint_bytes", s.footprint_bytes},
          {"dense_footprint_bytes", s.dense_footprint_bytes},
          {"high_sparsity_fraction", s.high_sparsity_fraction}};
}

CodecStats codec_stats_from_json(const nlohmann::json& j) {
  CodecStats s;
  s.enabled = j.at("enabled").get<bool>();
  s.bitmap_cycles = histogram_from_json(j.at("bitmap_cycles"), "bitmap_cycles");
  s.coo_cycles = histogram_from_json(j.at("coo_cycles"), "coo_cycles");
  s.footprint_bytes = j.at("footprint_bytes").get<std::uint64_t>();
  s.dense_footprint_bytes = j.at("dense_footprint_bytes").get<std::uint64_t>();
  s.high_sparsity_fraction = j.at("high_sparsity_fraction").get<double>();
  return s;
}

EncodedFactorReader::EncodedFactorReader(const VmDecomposition& d, const EncodeOptions& opt) {
  stats_.enabled = true;
  std::size_t high = 0;
  for (const auto& view : factor_views(d)) {
    encodings_.push_back(encode(view.values, opt));
    const auto& e = encodings_.back();
    stats_.footprint_bytes += e.encoded_bytes;
    stats_.dense_footprint_bytes += static_cast<std::uint64_t>(view.values.size()) * opt.size_model.value_width;
    high += e.variant == Variant::Coo;
  }
  stats_.high_sparsity_fraction =
      encodings_.empty() ? 0.0 : static_cast<double>(high) / static_cast<double>(encodings_.size());
}

float EncodedFactorReader::read(std::size_t factor, int row, int col) const {
  const auto& e = encodings_[factor];
  const auto r = query(e, row, col);
  (e.variant == Variant::Coo ? stats_.coo_cycles : stats_.bitmap_cycles)[r.cycles] += 1;
  return r.value;
}

}  // namespace rtnerf
