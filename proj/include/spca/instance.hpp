#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spca/common.hpp"
#include "spca/prior.hpp"
#include "spca/rng.hpp"

namespace spca {

// One finite-N realization of  y = x0^T x0 / sqrt(N) + w  with w symmetric
// and every entry (diagonal included) N(0, delta).
struct instance {
  Eigen::Index n = 0;
  double delta = 0.0;
  Eigen::MatrixXd x0;  // r x N, columns are the signal vectors
  Eigen::MatrixXd y;   // N x N, exactly symmetric
  std::uint64_t seed = 0;
};

// r x N draw from the prior; column j is decided by mask draw j, values by
// their own stream so families stay comparable under a fixed seed
inline Eigen::MatrixXd sample_signal(const prior_spec& prior, Eigen::Index n, std::uint64_t seed) {
  validate(prior);
  if (n < 1) throw domain_error("sample_signal: n must be >= 1");
  const int r = prior.rank;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(r, n);
  const counter_rng mask{seed, stream_signal_mask};
  const counter_rng val{seed, stream_signal_value};
  for (Eigen::Index j = 0; j < n; ++j) {
    if (mask.u01(static_cast<std::uint64_t>(j)) >= prior.rho) continue;
    switch (prior.family) {
      case prior_family::gauss_bernoulli:
        for (int k = 0; k < r; ++k)
          x(k, j) = val.normal(static_cast<std::uint64_t>(j) * r + k);
        break;
      case prior_family::bernoulli_spike:
        x(0, j) = 1.0;
        break;
      case prior_family::rademacher_bernoulli:
        x(0, j) = val.u01(static_cast<std::uint64_t>(j)) < 0.5 ? 1.0 : -1.0;
        break;
    }
  }
  return x;
}

// builds the upper triangle once and mirrors it, so y is symmetric bit for bit
inline Eigen::MatrixXd generate_observation(const Eigen::MatrixXd& x0, double delta,
                                            std::uint64_t seed) {
  if (!(delta > 0.0)) throw domain_error("generate_observation: delta must be > 0");
  const Eigen::Index n = x0.cols();
  if (n < 1) throw domain_error("generate_observation: empty signal");
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double sd = std::sqrt(delta);
  const counter_rng noise{seed, stream_noise};
  Eigen::MatrixXd y(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const std::uint64_t idx = static_cast<std::uint64_t>(i) * n + j;
      const double v = x0.col(i).dot(x0.col(j)) * inv_sqrt_n + sd * noise.normal(idx);
      y(i, j) = v;
      y(j, i) = v;
    }
  }
  return y;
}

inline instance make_instance(const prior_spec& prior, Eigen::Index n, double delta,
                              std::uint64_t seed) {
  instance ins;
  ins.n = n;
  ins.delta = delta;
  ins.seed = seed;
  ins.x0 = sample_signal(prior, n, seed);
  ins.y = generate_observation(ins.x0, delta, seed);
  return ins;
}

// ---------------------------------------------------------------------------
// binary snapshot
//
// 32-byte header, little endian:
//   bytes  0-3   magic "SPCA"
//   bytes  4-7   u32 format version (currently 1)
//   bytes  8-15  u64 N
//   bytes 16-19  u32 r
//   bytes 20-27  f64 delta
//   bytes 28-31  zero padding
// followed by x0 row major (r*N doubles), then the upper triangle of y row by
// row (N(N+1)/2 doubles).  The mirrored half is rebuilt on load.

inline constexpr std::uint32_t instance_format_version = 1;

inline void dump_instance(const instance& ins, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("dump_instance: cannot open '" + path + "' for writing");

  char header[32] = {};
  std::memcpy(header, "SPCA", 4);
  const std::uint32_t version = instance_format_version;
  const std::uint64_t n64 = static_cast<std::uint64_t>(ins.n);
  const std::uint32_t r32 = static_cast<std::uint32_t>(ins.x0.rows());
  std::memcpy(header + 4, &version, 4);
  std::memcpy(header + 8, &n64, 8);
  std::memcpy(header + 16, &r32, 4);
  std::memcpy(header + 20, &ins.delta, 8);
  f.write(header, sizeof(header));

  const Eigen::Index n = ins.n;
  const Eigen::Index r = ins.x0.rows();
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < r; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = ins.x0(k, j);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double) * row.size()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    row.resize(static_cast<std::size_t>(n - i));
    for (Eigen::Index j = i; j < n; ++j) row[static_cast<std::size_t>(j - i)] = ins.y(i, j);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double) * row.size()));
  }
  if (!f) throw io_error("dump_instance: write failed on '" + path + "'");
}

inline instance load_instance(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("load_instance: cannot open '" + path + "'");

  char header[32];
  f.read(header, sizeof(header));
  if (!f || std::memcmp(header, "SPCA", 4) != 0)
    throw io_error("load_instance: '" + path + "' is not an instance snapshot");
  std::uint32_t version = 0, r32 = 0;
  std::uint64_t n64 = 0;
  std::memcpy(&version, header + 4, 4);
  std::memcpy(&n64, header + 8, 8);
  std::memcpy(&r32, header + 16, 4);
  instance ins;
  std::memcpy(&ins.delta, header + 20, 8);
  if (version != instance_format_version)
    throw io_error("load_instance: unsupported format version");
  if (n64 == 0 || r32 == 0 || n64 > (1ull << 32))
    throw io_error("load_instance: corrupt header");

  const Eigen::Index n = static_cast<Eigen::Index>(n64);
  const Eigen::Index r = static_cast<Eigen::Index>(r32);
  ins.n = n;
  ins.x0.resize(r, n);
  ins.y.resize(n, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < r; ++k) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(sizeof(double) * row.size()));
    for (Eigen::Index j = 0; j < n; ++j) ins.x0(k, j) = row[static_cast<std::size_t>(j)];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    row.resize(static_cast<std::size_t>(n - i));
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(sizeof(double) * row.size()));
    for (Eigen::Index j = i; j < n; ++j) {
      ins.y(i, j) = row[static_cast<std::size_t>(j - i)];
      ins.y(j, i) = ins.y(i, j);
    }
  }
  if (!f) throw io_error("load_instance: '" + path + "' truncated");
  return ins;
}

}  // namespace spca
