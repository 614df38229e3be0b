#include "qnl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace qnl {
namespace {

constexpr char kMagic[8] = {'Q', 'N', 'L', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(CheckpointKind kind) {
    buf_.append(kMagic, sizeof kMagic);
    u8(kCheckpointVersion);
    u8(static_cast<std::uint8_t>(kind));
  }

  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(std::uint8_t(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void c128(Complex v) {
    f64(v.real());
    f64(v.imag());
  }
  void grid(const Grid1D& g) {
    i32(g.size());
    f64(g.span());
  }

  std::string finish() {
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(buf_.data()),
                           static_cast<uInt>(buf_.size()));
    u32(static_cast<std::uint32_t>(crc));
    return std::move(buf_);
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, CheckpointKind expected) : b_(bytes) {
    const CheckpointKind kind = checkpoint_kind(bytes);
    if (kind != expected)
      throw IoError("checkpoint holds record kind " +
                    std::to_string(int(kind)) + ", expected " +
                    std::to_string(int(expected)));
    pos_ = sizeof kMagic + 2;
    end_ = b_.size() - 4;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(b_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  Complex c128() {
    const double re = f64();
    return {re, f64()};
  }
  Grid1D grid() {
    const int n = i32();
    const double span = f64();
    try {
      return Grid1D(n, span);
    } catch (const ValidationError& e) {
      throw IoError(std::string("checkpoint grid is invalid: ") + e.what());
    }
  }
  /// Guards allocations against corrupted counts.
  void need(std::size_t bytes) const {
    if (bytes > end_ - pos_) throw IoError("checkpoint is truncated");
  }
  void done() const {
    if (pos_ != end_) throw IoError("checkpoint has trailing bytes");
  }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

void write_file(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CheckpointKind checkpoint_kind(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 2 + 4 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError("not a checkpoint file");
  const auto version = static_cast<std::uint8_t>(bytes[sizeof kMagic]);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= std::uint32_t(static_cast<std::uint8_t>(bytes[body + i])) << (8 * i);
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                         static_cast<uInt>(body));
  if (static_cast<std::uint32_t>(crc) != stored)
    throw IoError("checkpoint checksum mismatch");
  const auto kind = static_cast<std::uint8_t>(bytes[sizeof kMagic + 1]);
  if (kind < 1 || kind > 3)
    throw IoError("unknown checkpoint record kind " + std::to_string(kind));
  return static_cast<CheckpointKind>(kind);
}

std::string encode_checkpoint(const WaveFunction2D& psi) {
  Writer w(CheckpointKind::wave_function);
  w.grid(psi.grid.axis1);
  w.grid(psi.grid.axis2);
  w.f64(psi.time);
  for (Eigen::Index i = 0; i < psi.amplitudes.rows(); ++i)
    for (Eigen::Index j = 0; j < psi.amplitudes.cols(); ++j)
      w.c128(psi.amplitudes(i, j));
  return w.finish();
}

WaveFunction2D decode_wave_function(const std::string& bytes) {
  Reader r(bytes, CheckpointKind::wave_function);
  const Grid1D a1 = r.grid();
  const Grid1D a2 = r.grid();
  WaveFunction2D psi{Grid2D(a1, a2)};
  psi.time = r.f64();
  r.need(std::size_t(psi.grid.size()) * 16);
  for (Eigen::Index i = 0; i < psi.amplitudes.rows(); ++i)
    for (Eigen::Index j = 0; j < psi.amplitudes.cols(); ++j)
      psi.amplitudes(i, j) = r.c128();
  r.done();
  return psi;
}

std::string encode_checkpoint(const TdqmcEnsemble& ens) {
  ens.validate();
  Writer w(CheckpointKind::ensemble);
  w.grid(ens.grid);
  w.u32(std::uint32_t(ens.electron_count()));
  w.u32(std::uint32_t(ens.walker_count()));
  w.u64(ens.master_seed);
  w.f64(ens.time);
  w.u8(ens.mode == TimeMode::real ? 1 : 0);
  for (const auto& e : ens.electrons) {
    w.f64(e.sigma);
    for (int k = 0; k < e.walkers.size(); ++k) {
      w.f64(e.walkers(k));
      w.f64(e.velocity(k));
      w.i32(e.edge_flags[k]);
      w.u64(e.rng[k].master_seed());
      w.u64(e.rng[k].stream_id());
      w.u64(e.rng[k].draws());
    }
    for (Eigen::Index k = 0; k < e.waves.cols(); ++k)
      for (Eigen::Index m = 0; m < e.waves.rows(); ++m) w.c128(e.waves(m, k));
  }
  return w.finish();
}

TdqmcEnsemble decode_ensemble(const std::string& bytes) {
  Reader r(bytes, CheckpointKind::ensemble);
  TdqmcEnsemble ens{r.grid(), {}, 0, 0.0, TimeMode::imaginary};
  const std::uint32_t ne = r.u32();
  const std::uint32_t m = r.u32();
  ens.master_seed = r.u64();
  ens.time = r.f64();
  ens.mode = r.u8() == 1 ? TimeMode::real : TimeMode::imaginary;
  const std::size_t per_walker = 8 + 8 + 4 + 24 + std::size_t(ens.grid.size()) * 16;
  r.need(std::size_t(ne) * (8 + std::size_t(m) * per_walker));
  for (std::uint32_t i = 0; i < ne; ++i) {
    ElectronEnsemble e;
    e.sigma = r.f64();
    e.walkers.resize(m);
    e.velocity.resize(m);
    e.edge_flags.resize(m);
    e.rng.reserve(m);
    for (std::uint32_t k = 0; k < m; ++k) {
      e.walkers(k) = r.f64();
      e.velocity(k) = r.f64();
      e.edge_flags[k] = r.i32();
      const std::uint64_t seed = r.u64();
      const std::uint64_t stream = r.u64();
      e.rng.push_back(RngStream::restore(seed, stream, r.u64()));
    }
    e.waves.resize(ens.grid.size(), m);
    for (std::uint32_t k = 0; k < m; ++k)
      for (int p = 0; p < ens.grid.size(); ++p) e.waves(p, k) = r.c128();
    ens.electrons.push_back(std::move(e));
  }
  r.done();
  try {
    ens.validate();
  } catch (const std::exception& e) {
    throw IoError(std::string("checkpoint ensemble is inconsistent: ") + e.what());
  }
  return ens;
}

std::string encode_checkpoint(const DensityMatrix1D& d) {
  Writer w(CheckpointKind::density_matrix);
  w.grid(d.grid);
  w.f64(d.time);
  for (Eigen::Index i = 0; i < d.rho.rows(); ++i)
    for (Eigen::Index j = 0; j < d.rho.cols(); ++j) w.c128(d.rho(i, j));
  return w.finish();
}

DensityMatrix1D decode_density_matrix(const std::string& bytes) {
  Reader r(bytes, CheckpointKind::density_matrix);
  DensityMatrix1D d{r.grid(), {}, 0.0};
  d.time = r.f64();
  const int n = d.grid.size();
  r.need(std::size_t(n) * n * 16);
  d.rho.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d.rho(i, j) = r.c128();
  r.done();
  return d;
}

void checkpoint_save(const WaveFunction2D& psi, const std::filesystem::path& p) {
  write_file(encode_checkpoint(psi), p);
}
void checkpoint_save(const TdqmcEnsemble& ens, const std::filesystem::path& p) {
  write_file(encode_checkpoint(ens), p);
}
void checkpoint_save(const DensityMatrix1D& d, const std::filesystem::path& p) {
  write_file(encode_checkpoint(d), p);
}

WaveFunction2D load_wave_function(const std::filesystem::path& p) {
  return decode_wave_function(read_file(p));
}
TdqmcEnsemble load_ensemble(const std::filesystem::path& p) {
  return decode_ensemble(read_file(p));
}
DensityMatrix1D load_density_matrix(const std::filesystem::path& p) {
  return decode_density_matrix(read_file(p));
}

}  // namespace qnl
