#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace mmdgen {

// Seeded source of uniform and standard normal variates.
//
// Uniforms take the top 53 bits of a 64-bit Mersenne Twister draw, so the
// stream depends only on the seed. Normals use the Box-Muller transform and
// are produced in pairs; the second value of a pair is served by the next
// call. mt19937_64 output is fixed by the standard, the transcendental
// functions are not, so normals are bit-reproducible per platform only.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform();

  double normal();

  // Opaque serialized state (engine plus cached normal).
  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Rng& other) const {
    return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
           (!has_spare_ || spare_ == other.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// n x count block of i.i.d. standard normals, filled column by column.
Eigen::MatrixXd latent_batch(Rng& rng, Eigen::Index n, Eigen::Index count);

}  // namespace mmdgen
