#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "kll/sketch.hpp"

namespace kll {

// Parse failure with the 1-based line it occurred on.
class codec_error : public std::runtime_error {
 public:
  codec_error(size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

// Line-oriented text format, version-tagged:
//
//   KLLv1
//   params k=<uint> c=<num>/<den> mode=<exp|fixedtop> s=<uint>
//   n=<uint64>
//   sampler h=<uint> v=<uint64> item=<hex16|none>
//   level h=<uint> count=<uint>
//   <one item per line, 16 hex digits of the IEEE-754 bit pattern>
//   ...
//   END
//
// Items round-trip bit-exactly; c is an exact rational. The generator state
// is not serialized, so deserialize takes a fresh seed (only needed for
// further updates or merges). Anything after END is a parse error.
std::string serialize(const sketch<double>& sk);
void serialize(const sketch<double>& sk, std::ostream& os);

sketch<double> deserialize(std::istream& is, uint64_t seed);
sketch<double> deserialize(const std::string& text, uint64_t seed);

}  // namespace kll
