#include <cstring>

#include "doctest.h"
#include "sevc/bitstream.hpp"
#include "sevc/nn/layers.hpp"
#include "sevc/rans_c.h"

using namespace sevc;
using namespace sevc::bitstream;

namespace {

// Random valid CDF row: positive integer frequencies summing to 65536.
void random_row(nn::Rng& rng, uint16_t* row) {
  std::vector<double> w(kNumSymbols);
  const double sharp = rng.uniform(0, 6);
  for (double& v : w) v = std::exp(sharp * rng.normal());
  double total = 0;
  for (double v : w) total += v;
  std::vector<uint32_t> f(kNumSymbols);
  uint32_t sum = 0;
  for (int k = 0; k < kNumSymbols; ++k) {
    f[k] = 1 + static_cast<uint32_t>(w[k] / total * (kCdfTotal - kNumSymbols));
    sum += f[k];
  }
  f[rng.next() % kNumSymbols] += kCdfTotal - sum;
  uint32_t c = 0;
  for (int k = 0; k < kNumSymbols; ++k) {
    row[k] = static_cast<uint16_t>(c);
    c += f[k];
  }
}

int draw(nn::Rng& rng, const uint16_t* row) {
  const uint32_t u = static_cast<uint32_t>(rng.next() % kCdfTotal);
  return static_cast<int>(std::upper_bound(row, row + kNumSymbols, u) - row) - 1 + kSymbolMin;
}

// Rows are drawn from a fixed pool so long streams stay cheap to build.
const std::vector<uint16_t>& row_pool() {
  static const std::vector<uint16_t> pool = [] {
    nn::Rng rng(2024);
    std::vector<uint16_t> p(256 * kNumSymbols);
    for (int i = 0; i < 256; ++i) random_row(rng, p.data() + i * kNumSymbols);
    return p;
  }();
  return pool;
}

SymbolStream random_stream(nn::Rng& rng, size_t n) {
  SymbolStream s;
  s.cdfs.blob.resize(n * kNumSymbols);
  for (size_t i = 0; i < n; ++i) {
    const uint16_t* src = row_pool().data() + (rng.next() % 256) * kNumSymbols;
    std::copy(src, src + kNumSymbols, s.cdfs.blob.data() + i * kNumSymbols);
    s.symbols.push_back(draw(rng, s.cdfs.row(i)));
  }
  return s;
}

CdfTable binary_cdfs(size_t n) {
  CdfTable t;
  t.blob.resize(n * kNumSymbols);
  for (size_t i = 0; i < n; ++i) {
    uint16_t* r = t.blob.data() + i * kNumSymbols;
    const uint32_t half = (kCdfTotal - (kNumSymbols - 2)) / 2;
    uint32_t c = 0;
    for (int k = 0; k < kNumSymbols; ++k) {
      r[k] = static_cast<uint16_t>(c);
      c += (k == 256 || k == 257) ? half : 1;
    }
  }
  return t;
}

}  // namespace

TEST_CASE("empty stream flushes the initial state") {
  auto bytes = rans_encode(SymbolStream{});
  CHECK(bytes == std::vector<uint8_t>{0x00, 0x00, 0x01, 0x00});
  CHECK(rans_decode(bytes, 0, CdfTable{}).empty());
}

TEST_CASE("1000 random streams roundtrip exactly") {
  nn::Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const size_t n = 1 + rng.next() % 4096;
    SymbolStream s = random_stream(rng, n);
    auto bytes = rans_encode(s);
    REQUIRE(rans_decode(bytes, n, s.cdfs) == s.symbols);
    CHECK(rans_encode(s) == bytes);
  }
}

TEST_CASE("uniform binary source costs one bit per symbol") {
  nn::Rng rng(4);
  std::vector<int> sym(1024);
  for (int& s : sym) s = static_cast<int>(rng.next() & 1);
  auto bytes = rans_encode(sym, binary_cdfs(sym.size()));
  CHECK(std::abs(static_cast<int>(bytes.size()) - 128) <= 8);
  CHECK(rans_decode(bytes, sym.size(), binary_cdfs(sym.size())) == sym);
}

TEST_CASE("invalid input is rejected before coding") {
  CdfTable bad = binary_cdfs(2);
  bad.blob[5] = bad.blob[4];
  CHECK_THROWS_AS(rans_encode(std::vector<int>{0, 1}, bad), CdfError);
  CdfTable ok = binary_cdfs(2);
  CHECK_THROWS_AS(rans_encode(std::vector<int>{0, 256}, ok), CdfError);
  CHECK_THROWS_AS(rans_encode(std::vector<int>{0}, ok), CdfError);
  ok.blob[0] = 1;
  CHECK_THROWS_AS(rans_encode(std::vector<int>{0, 1}, ok), CdfError);
}

TEST_CASE("corrupt chunks raise a clean error") {
  nn::Rng rng(12);
  SymbolStream s = random_stream(rng, 500);
  auto bytes = rans_encode(s);
  std::vector<uint8_t> cut(bytes.begin(), bytes.end() - 2);
  try {
    rans_decode(cut, 500, s.cdfs);
    FAIL("expected corrupt stream");
  } catch (const CorruptStream& e) {
    CHECK(std::string(e.what()) == "corrupt stream");
  }
  auto extra = bytes;
  extra.push_back(0);
  extra.push_back(0);
  CHECK_THROWS_AS(rans_decode(extra, 500, s.cdfs), CorruptStream);
  CHECK_THROWS_AS(rans_decode(std::vector<uint8_t>{1, 2, 3}, 0, CdfTable{}), CorruptStream);
  int caught = 0;
  for (int t = 0; t < 200; ++t) {
    auto m = bytes;
    m[rng.next() % m.size()] ^= static_cast<uint8_t>(1 + rng.next() % 255);
    try {
      auto d = rans_decode(m, 500, s.cdfs);
      CHECK(d.size() == 500);
    } catch (const CorruptStream&) {
      ++caught;
    }
  }
  CHECK(caught > 150);
}

TEST_CASE("C flat-buffer API matches the C++ coder") {
  nn::Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const size_t n = rng.next() % 600;
    SymbolStream s = random_stream(rng, n);
    std::vector<int16_t> sym(s.symbols.begin(), s.symbols.end());
    std::vector<uint8_t> out(sevc_rans_encode_bound(n));
    size_t len = 0;
    REQUIRE(sevc_rans_encode(sym.data(), n, s.cdfs.blob.data(), s.cdfs.blob.size(), out.data(), out.size(),
                             &len) == SEVC_RANS_OK);
    out.resize(len);
    CHECK(out == rans_encode(s));
    std::vector<int16_t> back(n);
    REQUIRE(sevc_rans_decode(out.data(), len, n, s.cdfs.blob.data(), s.cdfs.blob.size(), back.data()) ==
            SEVC_RANS_OK);
    CHECK(back == sym);
  }
}

TEST_CASE("C API error codes and no partial writes") {
  CdfTable t = binary_cdfs(4);
  std::vector<int16_t> sym = {0, 1, 1, 0};
  std::vector<uint8_t> out(64, 0xAB);
  size_t len = 99;
  CHECK(sevc_rans_encode(sym.data(), 4, t.blob.data(), t.blob.size() - 1, out.data(), out.size(), &len) ==
        SEVC_RANS_ERR_LENGTH);
  CHECK(len == 0);
  CHECK(sevc_rans_encode(sym.data(), 4, t.blob.data(), t.blob.size(), out.data(), 3, &len) ==
        SEVC_RANS_ERR_CAPACITY);
  for (uint8_t b : out) CHECK(b == 0xAB);
  sym[2] = 300;
  CHECK(sevc_rans_encode(sym.data(), 4, t.blob.data(), t.blob.size(), out.data(), out.size(), &len) ==
        SEVC_RANS_ERR_SYMBOL);
  sym[2] = 1;
  CdfTable bad = t;
  bad.blob[3] = bad.blob[2];
  CHECK(sevc_rans_encode(sym.data(), 4, bad.blob.data(), bad.blob.size(), out.data(), out.size(), &len) ==
        SEVC_RANS_ERR_CDF);
  CHECK(sevc_rans_encode(nullptr, 4, t.blob.data(), t.blob.size(), out.data(), out.size(), &len) ==
        SEVC_RANS_ERR_NULL);
  auto* alias = reinterpret_cast<uint8_t*>(sym.data());
  CHECK(sevc_rans_encode(sym.data(), 4, t.blob.data(), t.blob.size(), alias, 8, &len) == SEVC_RANS_ERR_ALIAS);
  for (uint8_t b : out) CHECK(b == 0xAB);

  REQUIRE(sevc_rans_encode(sym.data(), 4, t.blob.data(), t.blob.size(), out.data(), out.size(), &len) ==
          SEVC_RANS_OK);
  std::vector<int16_t> back(4, 7);
  CHECK(sevc_rans_decode(out.data(), len - 2, 4, t.blob.data(), t.blob.size(), back.data()) ==
        SEVC_RANS_ERR_CORRUPT);
  CHECK(back == std::vector<int16_t>(4, 7));
  size_t elen = 0;
  REQUIRE(sevc_rans_encode(nullptr, 0, nullptr, 0, out.data(), out.size(), &elen) == SEVC_RANS_OK);
  CHECK(elen == 4);
}

namespace {

Container random_container(nn::Rng& rng) {
  Container c;
  c.header.width = 64 * (1 + rng.next() % 4);
  c.header.height = 64 * (1 + rng.next() % 4);
  c.header.frame_count = 1 + rng.next() % 12;
  c.header.intra_period = static_cast<int32_t>(rng.next() % 3) - 1;
  c.header.lambda_index = static_cast<uint8_t>(rng.next() % 4);
  c.header.model_hash = rng.next();
  for (uint32_t i = 0; i < c.header.frame_count; ++i) {
    FrameRecord r;
    r.type = i == 0 || rng.next() % 5 == 0 ? FrameType::kIntra : FrameType::kPredicted;
    const int subs = r.type == FrameType::kIntra ? 1 : 3;
    for (int s = 0; s < subs; ++s) {
      std::vector<uint8_t> b(rng.next() % 200);
      for (auto& v : b) v = static_cast<uint8_t>(rng.next());
      r.substreams.push_back(std::move(b));
    }
    c.frames.push_back(std::move(r));
  }
  return c;
}

}  // namespace

// Reference CRC-32 (reflected polynomial 0xEDB88320), one bit at a time.
uint32_t crc32_bitwise(const std::vector<uint8_t>& bytes) {
  uint32_t crc = 0xffffffffu;
  for (uint8_t b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

TEST_CASE("container roundtrip, layout and errors") {
  nn::Rng rng(77);
  for (int t = 0; t < 300; ++t) {
    Container c = random_container(rng);
    auto bytes = write_container(c);
    size_t expect = kHeaderBytes + kChecksumBytes;
    for (const auto& r : c.frames) expect += record_bytes(r);
    CHECK(bytes.size() == expect);
    CHECK(read_container(bytes) == c);
  }

  Container one;
  one.header = {64, 64, 1, -1, 2, 0x0102030405060708ull};
  one.frames.push_back({FrameType::kIntra, {{9, 8, 7}}});
  auto b = write_container(one);
  const std::vector<uint8_t> head = {'S', 'E', 'V', 'C', 1, 64, 0, 0, 0, 64, 0, 0, 0, 1, 0, 0, 0,
                                     0xff, 0xff, 0xff, 0xff, 2, 8, 7, 6, 5, 4, 3, 2, 1,
                                     0, 3, 0, 0, 0, 9, 8, 7};
  REQUIRE(b.size() == head.size() + kChecksumBytes);
  CHECK(std::equal(head.begin(), head.end(), b.begin()));
  const uint32_t crc = crc32_bitwise(head);
  CHECK(b[head.size()] == (crc & 0xff));
  CHECK(b[head.size() + 3] == (crc >> 24));

  Container none;
  none.header.frame_count = 0;
  CHECK_THROWS_AS(write_container(none), ContainerError);
  auto zero = b;
  zero[13] = 0;
  CHECK_THROWS_AS(read_container(std::vector<uint8_t>(zero.begin(), zero.begin() + kHeaderBytes)), ContainerError);

  auto magic = b;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(read_container(magic), "bad magic", ContainerError);
  auto ver = b;
  ver[4] = 2;
  CHECK_THROWS_WITH_AS(read_container(ver), "unsupported container version 2", ContainerError);

  Container two = one;
  two.header.frame_count = 2;
  two.frames.push_back({FrameType::kPredicted, {{1}, {2, 3}, {4, 5, 6}}});
  auto tb = write_container(two);
  auto cut_crc = tb;
  cut_crc.pop_back();
  CHECK_THROWS_WITH_AS(read_container(cut_crc), "truncated checksum", ContainerError);
  tb.resize(tb.size() - kChecksumBytes - 1);
  CHECK_THROWS_WITH_AS(read_container(tb), "truncated record at frame 1", ContainerError);
  auto extra = write_container(two);
  extra.push_back(0);
  CHECK_THROWS_AS(read_container(extra), ContainerError);
  auto payload = write_container(two);
  payload[payload.size() - kChecksumBytes - 2] ^= 0x10;
  CHECK_THROWS_WITH_AS(read_container(payload), "corrupt stream", CorruptStream);

  for (int t = 0; t < 500; ++t) {
    auto m = write_container(random_container(rng));
    const size_t cut = rng.next() % m.size();
    if (rng.next() % 2) {
      m.resize(cut);
    } else {
      m[cut] ^= static_cast<uint8_t>(1 + rng.next() % 255);
    }
    try {
      read_container(m);
    } catch (const ContainerError&) {
    } catch (const CorruptStream&) {
    }
  }

  // Every single-byte corruption of a valid container is refused.
  auto valid = write_container(random_container(rng));
  for (size_t pos = 0; pos < valid.size(); ++pos) {
    auto m = valid;
    m[pos] ^= static_cast<uint8_t>(1 + rng.next() % 255);
    bool refused = false;
    try {
      read_container(m);
    } catch (const std::runtime_error&) {
      refused = true;
    }
    CHECK(refused);
  }
}
