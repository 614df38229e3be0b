// Binary checkpoints: little-endian, magic + format version + record kind,
// payload, CRC-32 trailer over everything before it.
#ifndef QNL_CHECKPOINT_HPP
#define QNL_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "qnl/entanglement.hpp"
#include "qnl/spectral2d.hpp"
#include "qnl/tdqmc.hpp"

namespace qnl {

inline constexpr std::uint8_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint8_t {
  wave_function = 1,
  ensemble = 2,
  density_matrix = 3,
};

/// Encoded bytes; saving writes exactly these.
std::string encode_checkpoint(const WaveFunction2D& psi);
std::string encode_checkpoint(const TdqmcEnsemble& ensemble);
std::string encode_checkpoint(const DensityMatrix1D& rho);

/// Decoders verify magic, version, kind, length and checksum before building
/// any state; failures raise IoError.
WaveFunction2D decode_wave_function(const std::string& bytes);
TdqmcEnsemble decode_ensemble(const std::string& bytes);
DensityMatrix1D decode_density_matrix(const std::string& bytes);

/// Kind of a stored checkpoint, after full verification.
CheckpointKind checkpoint_kind(const std::string& bytes);

void checkpoint_save(const WaveFunction2D& psi, const std::filesystem::path& path);
void checkpoint_save(const TdqmcEnsemble& ensemble,
                     const std::filesystem::path& path);
void checkpoint_save(const DensityMatrix1D& rho, const std::filesystem::path& path);

WaveFunction2D load_wave_function(const std::filesystem::path& path);
TdqmcEnsemble load_ensemble(const std::filesystem::path& path);
DensityMatrix1D load_density_matrix(const std::filesystem::path& path);

}  // namespace qnl

#endif  // QNL_CHECKPOINT_HPP
