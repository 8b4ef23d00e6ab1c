#include "mmdgen/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mmdgen {

double Rng::uniform() {
  // (bits + 0.5) / 2^53 never hits 0 or 1.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::string Rng::state() const {
  std::ostringstream out;
  out.precision(17);
  out << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::hexfloat << spare_;
  return out.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream in(state);
  std::mt19937_64 engine;
  int spare_flag = 0;
  std::string spare_text;
  in >> engine >> spare_flag >> spare_text;
  if (in.fail()) throw std::invalid_argument("malformed rng state");
  engine_ = engine;
  has_spare_ = spare_flag != 0;
  spare_ = std::strtod(spare_text.c_str(), nullptr);
}

Eigen::MatrixXd latent_batch(Rng& rng, Eigen::Index n, Eigen::Index count) {
  if (n < 1 || count < 1) throw std::invalid_argument("latent_batch needs n >= 1 and count >= 1");
  Eigen::MatrixXd z(n, count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.normal();
  return z;
}

}  // namespace mmdgen
