#include "beabr/media_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "beabr/error.hpp"

namespace beabr {

BitrateLadder::BitrateLadder(std::vector<double> levels_kbps) : levels_(std::move(levels_kbps)) {
  if (levels_.empty()) throw InvalidArgument("bitrate ladder is empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i] > 0.0) || !std::isfinite(levels_[i])) {
      throw InvalidArgument("bitrate level " + std::to_string(i) + " must be positive");
    }
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw InvalidArgument("bitrate ladder must be strictly increasing at level " +
                            std::to_string(i));
    }
  }
}

BitrateLadder BitrateLadder::sd() { return BitrateLadder({350, 600, 1000, 2000, 3000}); }

BitrateLadder BitrateLadder::uhd() {
  return BitrateLadder(
      {200, 400, 800, 1200, 2200, 3300, 5000, 6500, 8600, 10000, 12000, 16000, 20000});
}

std::size_t BitrateLadder::index_of(double kbps) const {
  auto it = std::find(levels_.begin(), levels_.end(), kbps);
  if (it == levels_.end()) {
    std::ostringstream os;
    os << "bitrate " << kbps << " kbps is not a ladder level";
    throw InvalidArgument(os.str());
  }
  return static_cast<std::size_t>(it - levels_.begin());
}

double quality_unchecked(double kbps, const QualityMode& mode) {
  if (mode.scale == QualityScale::kLinear) return kbps;
  return std::log(kbps / mode.r_min_kbps);
}

double quality(double kbps, const QualityMode& mode, const BitrateLadder& ladder) {
  ladder.index_of(kbps);
  if (mode.scale == QualityScale::kLogarithmic) {
    if (!(mode.r_min_kbps > 0.0)) throw InvalidArgument("logarithmic quality needs r_min > 0");
    if (mode.r_min_kbps != ladder.min()) {
      throw InvalidArgument("logarithmic r_min must equal the lowest ladder level");
    }
  }
  return quality_unchecked(kbps, mode);
}

VideoManifest::VideoManifest(double chunk_duration_s, BitrateLadder ladder,
                             std::vector<std::vector<Bytes>> sizes)
    : chunk_duration_(chunk_duration_s), ladder_(std::move(ladder)), sizes_(std::move(sizes)) {
  if (!(chunk_duration_ > 0.0) || !std::isfinite(chunk_duration_)) {
    throw InvalidArgument("chunk_duration_s must be positive");
  }
  if (sizes_.empty()) throw InvalidArgument("manifest has no chunks");
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    const auto& row = sizes_[k];
    if (row.size() != ladder_.size()) {
      throw InvalidArgument("chunk " + std::to_string(k) + " has " + std::to_string(row.size()) +
                            " sizes, expected " + std::to_string(ladder_.size()));
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] <= 0) {
        throw InvalidArgument("chunk " + std::to_string(k) + " level " + std::to_string(j) +
                              " has non-positive size");
      }
      if (j > 0 && row[j] < row[j - 1]) {
        throw InvalidArgument("chunk " + std::to_string(k) + " level " + std::to_string(j) +
                              " is smaller than level " + std::to_string(j - 1));
      }
    }
  }
}

double VideoManifest::mean_top_chunk_bytes() const {
  double total = 0.0;
  for (const auto& row : sizes_) total += static_cast<double>(row.back());
  return total / static_cast<double>(sizes_.size());
}

VideoManifest parse_manifest(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    double duration = doc.at("chunk_duration_s").get<double>();
    auto bitrates = doc.at("bitrates_kbps").get<std::vector<double>>();
    auto sizes = doc.at("sizes_bytes").get<std::vector<std::vector<Bytes>>>();
    return VideoManifest(duration, BitrateLadder(std::move(bitrates)), std::move(sizes));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest field error: ") + e.what());
  }
}

VideoManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string manifest_to_json(const VideoManifest& manifest) {
  nlohmann::json doc;
  doc["chunk_duration_s"] = manifest.chunk_duration();
  doc["bitrates_kbps"] = std::vector<double>(manifest.ladder().levels().begin(),
                                             manifest.ladder().levels().end());
  doc["sizes_bytes"] = manifest.sizes();
  return doc.dump();
}

void save_manifest(const VideoManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest) << '\n';
}

VideoManifest synth_manifest(const BitrateLadder& ladder, std::size_t chunk_count,
                             double chunk_duration_s, std::uint64_t seed,
                             double jitter_amplitude) {
  if (chunk_count == 0) throw InvalidArgument("chunk_count must be positive");
  if (!(chunk_duration_s > 0.0)) throw InvalidArgument("chunk_duration_s must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-jitter_amplitude, jitter_amplitude);
  std::vector<std::vector<Bytes>> sizes(chunk_count, std::vector<Bytes>(ladder.size()));
  for (auto& row : sizes) {
    for (std::size_t j = 0; j < ladder.size(); ++j) {
      double nominal = kbps_to_bytes_per_s(ladder[j]) * chunk_duration_s;
      double factor = jitter_amplitude > 0.0 ? 1.0 + jitter(rng) : 1.0;
      row[j] = std::max<Bytes>(1, std::llround(nominal * factor));
      if (j > 0) row[j] = std::max(row[j], row[j - 1]);
    }
  }
  return VideoManifest(chunk_duration_s, ladder, std::move(sizes));
}

}  // namespace beabr
