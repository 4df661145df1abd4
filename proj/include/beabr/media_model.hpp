#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace beabr {

using Bytes = std::int64_t;

/// Kilobits per second -> bytes per second.
constexpr double kbps_to_bytes_per_s(double kbps) { return kbps * 1000.0 / 8.0; }

/// Ordered, strictly increasing list of encoding bitrates in kbps.
class BitrateLadder {
 public:
  explicit BitrateLadder(std::vector<double> levels_kbps);

  static BitrateLadder sd();
  static BitrateLadder uhd();

  std::size_t size() const { return levels_.size(); }
  double operator[](std::size_t i) const { return levels_[i]; }
  double min() const { return levels_.front(); }
  double max() const { return levels_.back(); }
  std::span<const double> levels() const { return levels_; }

  /// Index of an exact ladder level; throws InvalidArgument otherwise.
  std::size_t index_of(double kbps) const;

  bool operator==(const BitrateLadder&) const = default;

 private:
  std::vector<double> levels_;
};

inline constexpr double kChunkDurationShort = 2.133;
inline constexpr double kChunkDurationLong = 2.667;

enum class QualityScale { kLinear, kLogarithmic };

/// Maps bitrates to perceived quality. Logarithmic mode measures quality as
/// ln(R / r_min) so the lowest ladder level scores zero.
struct QualityMode {
  QualityScale scale = QualityScale::kLinear;
  double r_min_kbps = 0.0;

  static QualityMode linear() { return {}; }
  static QualityMode logarithmic(const BitrateLadder& ladder) {
    return {QualityScale::kLogarithmic, ladder.min()};
  }
};

/// q(bitrate) without ladder membership checks. Hot paths use this.
double quality_unchecked(double kbps, const QualityMode& mode);

/// q(bitrate); throws InvalidArgument when `kbps` is not a ladder level or the
/// logarithmic reference is not the ladder minimum.
double quality(double kbps, const QualityMode& mode, const BitrateLadder& ladder);

/// Encoded video: K chunks of equal duration, each available at every ladder
/// level. Immutable after construction.
class VideoManifest {
 public:
  /// Validates every invariant; throws InvalidArgument naming the offending
  /// chunk/level.
  VideoManifest(double chunk_duration_s, BitrateLadder ladder,
                std::vector<std::vector<Bytes>> sizes);

  std::size_t chunk_count() const { return sizes_.size(); }
  double chunk_duration() const { return chunk_duration_; }
  double duration() const { return chunk_duration_ * static_cast<double>(sizes_.size()); }
  const BitrateLadder& ladder() const { return ladder_; }
  Bytes size(std::size_t chunk, std::size_t level) const { return sizes_[chunk][level]; }
  const std::vector<std::vector<Bytes>>& sizes() const { return sizes_; }

  /// Mean chunk size at the top ladder level.
  double mean_top_chunk_bytes() const;

  bool operator==(const VideoManifest&) const = default;

 private:
  double chunk_duration_;
  BitrateLadder ladder_;
  std::vector<std::vector<Bytes>> sizes_;
};

/// Reads a manifest document (`chunk_duration_s`, `bitrates_kbps`,
/// `sizes_bytes`). Throws ParseError or InvalidArgument.
VideoManifest load_manifest(const std::filesystem::path& path);
VideoManifest parse_manifest(const std::string& text);

std::string manifest_to_json(const VideoManifest& manifest);
void save_manifest(const VideoManifest& manifest, const std::filesystem::path& path);

/// Deterministic fixture generator: size = bitrate * L * (1 + jitter), jitter
/// uniform in [-jitter_amplitude, +jitter_amplitude], repaired to be
/// non-decreasing across levels.
VideoManifest synth_manifest(const BitrateLadder& ladder, std::size_t chunk_count,
                             double chunk_duration_s, std::uint64_t seed,
                             double jitter_amplitude = 0.15);

}  // namespace beabr
