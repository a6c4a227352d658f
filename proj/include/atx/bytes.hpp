#pragma once
// Byte-string utilities and the canonical encoding used for every signed or
// hashed structure in the protocol.  The rules are fixed so that independent
// implementations produce bit-identical payloads:
//   - integers are 8-byte big-endian
//   - byte-strings carry a 4-byte big-endian length prefix
//   - optional fields carry a 1-byte presence flag (0x00 absent, 0x01 present)
//   - sets are encoded as an 8-byte count followed by the element encodings
//     sorted ascending (bytewise) by element encoding
#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

namespace atx {

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;

inline std::string toHex(const uint8_t* data, size_t len) {
  static const char* k = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (size_t i = 0; i < len; ++i) {
    out.push_back(k[data[i] >> 4]);
    out.push_back(k[data[i] & 0xf]);
  }
  return out;
}

inline std::string toHex(const Bytes& b) { return toHex(b.data(), b.size()); }
inline std::string toHex(const Digest& d) { return toHex(d.data(), d.size()); }

inline std::optional<Bytes> fromHex(const std::string& s) {
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2) {
    int hi = nib(s[i]), lo = nib(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<uint8_t>(hi << 4 | lo));
  }
  return out;
}

// Canonical encoder.  Append-only; the finished buffer is obtained with
// take() or bytes().
class Enc {
 public:
  Enc& u8(uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  Enc& u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    return *this;
  }
  Enc& bytes(const uint8_t* data, size_t len) {
    for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<uint8_t>(len >> (8 * i)));
    buf_.insert(buf_.end(), data, data + len);
    return *this;
  }
  Enc& bytes(const Bytes& b) { return bytes(b.data(), b.size()); }
  Enc& str(const std::string& s) {
    return bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  Enc& digest(const Digest& d) { return bytes(d.data(), d.size()); }
  Enc& opt(const std::optional<Bytes>& b) {
    if (b) {
      u8(1);
      bytes(*b);
    } else {
      u8(0);
    }
    return *this;
  }
  // Set-of-encodings: sorts ascending and prefixes the count.
  Enc& set(std::vector<Bytes> elems) {
    std::sort(elems.begin(), elems.end());
    u64(elems.size());
    for (const auto& e : elems) bytes(e);
    return *this;
  }
  Enc& raw(const Bytes& b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
    return *this;
  }
  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Matching decoder.  Every accessor returns false on truncation; callers
// treat any failure as a malformed message.
class Dec {
 public:
  explicit Dec(const Bytes& b) : buf_(b) {}
  bool u8(uint8_t& v) {
    if (pos_ + 1 > buf_.size()) return false;
    v = buf_[pos_++];
    return true;
  }
  bool u64(uint64_t& v) {
    if (pos_ + 8 > buf_.size()) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | buf_[pos_++];
    return true;
  }
  bool bytes(Bytes& out) {
    if (pos_ + 4 > buf_.size()) return false;
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = len << 8 | buf_[pos_++];
    if (pos_ + len > buf_.size()) return false;
    out.assign(buf_.begin() + pos_, buf_.begin() + pos_ + len);
    pos_ += len;
    return true;
  }
  bool str(std::string& out) {
    Bytes b;
    if (!bytes(b)) return false;
    out.assign(b.begin(), b.end());
    return true;
  }
  bool digest(Digest& d) {
    Bytes b;
    if (!bytes(b) || b.size() != d.size()) return false;
    std::copy(b.begin(), b.end(), d.begin());
    return true;
  }
  bool opt(std::optional<Bytes>& out) {
    uint8_t flag;
    if (!u8(flag)) return false;
    if (flag == 0) {
      out.reset();
      return true;
    }
    if (flag != 1) return false;
    Bytes b;
    if (!bytes(b)) return false;
    out = std::move(b);
    return true;
  }
  bool setOf(std::vector<Bytes>& out) {
    uint64_t n;
    if (!u64(n)) return false;
    if (n > 1u << 20) return false;  // sanity cap against garbage headers
    out.clear();
    out.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
      Bytes b;
      if (!bytes(b)) return false;
      out.push_back(std::move(b));
    }
    return true;
  }
  bool done() const { return pos_ == buf_.size(); }
  size_t pos() const { return pos_; }

 private:
  const Bytes& buf_;
  size_t pos_ = 0;
};

}  // namespace atx
