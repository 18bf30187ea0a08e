#include "kll/codec.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

namespace kll {

namespace {

constexpr std::string_view k_magic = "KLLv1";

std::string hex16(double value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(std::bit_cast<uint64_t>(value)));
  return std::string(buffer);
}

class line_reader {
 public:
  explicit line_reader(std::istream& is) : is_(is) {}

  // Next line, stripped of a trailing \r; throws on end of input.
  std::string next(const char* expectation) {
    std::string line;
    if (!std::getline(is_, line)) {
      throw codec_error(line_number_ + 1, std::string("unexpected end of input, expected ") + expectation);
    }
    ++line_number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  bool at_end() {
    // anything but trailing whitespace counts as content
    char ch;
    while (is_.get(ch)) {
      if (!std::isspace(static_cast<unsigned char>(ch))) return false;
      if (ch == '\n') ++line_number_;
    }
    return true;
  }

  size_t line_number() const { return line_number_; }

 private:
  std::istream& is_;
  size_t line_number_ = 0;
};

// Consumes "key=" from the front of view; the value runs to the next space.
std::string_view take_field(std::string_view& view, std::string_view key, size_t line) {
  if (view.substr(0, key.size()) != key || view.size() <= key.size() || view[key.size()] != '=') {
    throw codec_error(line, "expected field '" + std::string(key) + "='");
  }
  view.remove_prefix(key.size() + 1);
  const size_t space = view.find(' ');
  std::string_view value = view.substr(0, space);
  view.remove_prefix(space == std::string_view::npos ? view.size() : space + 1);
  return value;
}

uint64_t parse_u64(std::string_view text, size_t line, const char* what) {
  if (text.empty() || text.size() > 20) throw codec_error(line, std::string("malformed ") + what);
  uint64_t value = 0;
  for (const char ch : text) {
    if (ch < '0' || ch > '9') throw codec_error(line, std::string("malformed ") + what);
    const uint64_t digit = static_cast<uint64_t>(ch - '0');
    if (value > (std::numeric_limits<uint64_t>::max() - digit) / 10) {
      throw codec_error(line, std::string("out-of-range ") + what);
    }
    value = value * 10 + digit;
  }
  return value;
}

uint32_t parse_u32(std::string_view text, size_t line, const char* what) {
  const uint64_t value = parse_u64(text, line, what);
  if (value > std::numeric_limits<uint32_t>::max()) {
    throw codec_error(line, std::string("out-of-range ") + what);
  }
  return static_cast<uint32_t>(value);
}

double parse_item(std::string_view text, size_t line) {
  if (text.size() != 16) throw codec_error(line, "item must be 16 hex digits");
  uint64_t bits = 0;
  for (const char ch : text) {
    uint64_t digit;
    if (ch >= '0' && ch <= '9') digit = static_cast<uint64_t>(ch - '0');
    else if (ch >= 'a' && ch <= 'f') digit = static_cast<uint64_t>(ch - 'a' + 10);
    else if (ch >= 'A' && ch <= 'F') digit = static_cast<uint64_t>(ch - 'A' + 10);
    else throw codec_error(line, "item must be 16 hex digits");
    bits = (bits << 4) | digit;
  }
  const double value = std::bit_cast<double>(bits);
  if (std::isnan(value)) throw codec_error(line, "item is NaN, which breaks the total order");
  return value;
}

}  // namespace

void serialize(const sketch<double>& sk, std::ostream& os) {
  const params& p = sk.config();
  os << k_magic << '\n';
  os << "params k=" << p.k << " c=" << p.c_num << '/' << p.c_den << " mode="
     << (p.mode == compactor_mode::fixed_top ? "fixedtop" : "exp") << " s=" << p.s << '\n';
  os << "n=" << sk.n() << '\n';
  const auto& smp = sk.sampler_state();
  os << "sampler h=" << smp.height() << " v=" << smp.stored_weight() << " item="
     << (smp.holds_item() ? hex16(*smp.stored_item()) : std::string("none")) << '\n';
  for (size_t i = 0; i < sk.level_count(); ++i) {
    const auto& buffer = sk.level(i);
    os << "level h=" << sk.level_height(i) << " count=" << buffer.size() << '\n';
    for (const double item : buffer) os << hex16(item) << '\n';
  }
  os << "END\n";
}

std::string serialize(const sketch<double>& sk) {
  std::ostringstream os;
  serialize(sk, os);
  return os.str();
}

sketch<double> deserialize(std::istream& is, uint64_t seed) {
  line_reader reader(is);

  if (reader.next("magic") != k_magic) throw codec_error(reader.line_number(), "bad magic");

  std::string line = reader.next("params");
  std::string_view view = line;
  const auto k_text = take_field(view, "params k", reader.line_number());
  const auto c_text = take_field(view, "c", reader.line_number());
  const auto mode_text = take_field(view, "mode", reader.line_number());
  const auto s_text = take_field(view, "s", reader.line_number());
  if (!view.empty()) throw codec_error(reader.line_number(), "trailing data in params");
  const size_t slash = c_text.find('/');
  if (slash == std::string_view::npos) throw codec_error(reader.line_number(), "c must be <num>/<den>");
  compactor_mode mode;
  if (mode_text == "exp") mode = compactor_mode::exponential;
  else if (mode_text == "fixedtop") mode = compactor_mode::fixed_top;
  else throw codec_error(reader.line_number(), "mode must be exp or fixedtop");
  params p;
  try {
    p = params(parse_u32(k_text, reader.line_number(), "k"),
               parse_u64(c_text.substr(0, slash), reader.line_number(), "c numerator"),
               parse_u64(c_text.substr(slash + 1), reader.line_number(), "c denominator"), mode,
               parse_u32(s_text, reader.line_number(), "s"));
  } catch (const std::invalid_argument& e) {
    throw codec_error(reader.line_number(), e.what());
  }

  line = reader.next("n");
  view = line;
  const uint64_t n = parse_u64(take_field(view, "n", reader.line_number()), reader.line_number(), "n");
  if (!view.empty()) throw codec_error(reader.line_number(), "trailing data after n");

  line = reader.next("sampler");
  view = line;
  const uint32_t smp_height =
      parse_u32(take_field(view, "sampler h", reader.line_number()), reader.line_number(), "sampler height");
  const uint64_t smp_weight =
      parse_u64(take_field(view, "v", reader.line_number()), reader.line_number(), "sampler weight");
  const auto item_text = take_field(view, "item", reader.line_number());
  if (!view.empty()) throw codec_error(reader.line_number(), "trailing data in sampler");
  std::optional<double> smp_item;
  if (item_text != "none") smp_item = parse_item(item_text, reader.line_number());

  std::vector<std::vector<double>> level_buffers;
  for (;;) {
    line = reader.next("level or END");
    if (line == "END") break;
    view = line;
    const uint32_t h =
        parse_u32(take_field(view, "level h", reader.line_number()), reader.line_number(), "level height");
    const uint64_t count =
        parse_u64(take_field(view, "count", reader.line_number()), reader.line_number(), "level count");
    if (!view.empty()) throw codec_error(reader.line_number(), "trailing data in level header");
    const uint32_t expected = smp_height + static_cast<uint32_t>(level_buffers.size()) + 1;
    if (h != expected) {
      throw codec_error(reader.line_number(),
                        "level heights must be contiguous, expected h=" + std::to_string(expected));
    }
    std::vector<double> buffer;
    buffer.reserve(std::min<uint64_t>(count, 1u << 16));  // count is untrusted
    for (uint64_t i = 0; i < count; ++i) {
      buffer.push_back(parse_item(reader.next("item"), reader.line_number()));
    }
    level_buffers.push_back(std::move(buffer));
  }
  if (!reader.at_end()) throw codec_error(reader.line_number() + 1, "trailing data after END");

  try {
    return sketch<double>::from_parts(p, seed, n, smp_height, smp_weight, smp_item,
                                      std::move(level_buffers));
  } catch (const std::invalid_argument& e) {
    throw codec_error(reader.line_number(), e.what());
  }
}

sketch<double> deserialize(const std::string& text, uint64_t seed) {
  std::istringstream is(text);
  return deserialize(is, seed);
}

}  // namespace kll
