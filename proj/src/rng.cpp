#include "vqseg/rng.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "vqseg/errors.hpp"

namespace vqseg {

double Rng::normal(double mean, double sigma) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + sigma * spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return mean + sigma * r * std::cos(a);
}

std::string Rng::save() const {
  // Spare is stored as its bit pattern; textual doubles would not round-trip.
  uint64_t bits = 0;
  std::memcpy(&bits, &spare_, sizeof(bits));
  std::ostringstream os;
  os << engine_ << ' ' << has_spare_ << ' ' << bits;
  return os.str();
}

void Rng::restore(const std::string& blob) {
  std::istringstream is(blob);
  uint64_t bits = 0;
  is >> engine_ >> has_spare_ >> bits;
  if (is.fail()) throw ParseError("corrupt rng state");
  std::memcpy(&spare_, &bits, sizeof(bits));
}

}  // namespace vqseg
