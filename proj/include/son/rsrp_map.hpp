#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "son/geometry.hpp"

namespace son {

struct TiltAngle {
  double azimuth_deg = 0.0;    // offset from the site boresight
  double elevation_deg = 0.0;  // electrical downtilt

  friend bool operator==(const TiltAngle&, const TiltAngle&) = default;
};

// Discrete set of selectable antenna tilts, indexed 0..M-1.
class TiltDictionary {
 public:
  explicit TiltDictionary(std::vector<TiltAngle> angles);

  // 11 entries: downtilt 0..20 degrees in 2 degree steps, boresight azimuth.
  static TiltDictionary standard();

  std::size_t size() const { return angles_.size(); }
  const TiltAngle& operator[](std::size_t m) const { return angles_.at(m); }
  const std::vector<TiltAngle>& angles() const { return angles_; }

 private:
  std::vector<TiltAngle> angles_;
};

// Parametric antenna gain lobe, 3GPP-style parabolic pattern in both planes.
struct TiltGainModel {
  double horizontal_beamwidth_deg = 90.0;
  double vertical_beamwidth_deg = 10.0;
  double max_attenuation_db = 25.0;
  double vertical_sidelobe_db = 20.0;

  // Gain in dB (<= 0) for a user seen at `azimuth_off_deg` from boresight
  // and `elevation_deg` below the horizon, with the beam tilted to `tilt`.
  double gain_db(double azimuth_off_deg, double elevation_deg, const TiltAngle& tilt) const;
};

struct MapGenConfig {
  Area area;
  double grid_spacing_m = 5.0;
  double tx_power_dbm = 15.0;  // per resource element, also the value cap
  double pathloss_exponent = 3.5;
  double reference_loss_db = 38.0;  // loss at 1 m
  double bs_height_m = 25.0;
  TiltGainModel gain;
  // Boresight azimuth per BS (degrees, counter-clockwise from +x). Empty:
  // every site points at the area center.
  std::vector<double> bs_azimuth_deg;
  double shadowing_sigma_db = 0.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

// RSRP lookup table of shape (anchors x tilts x BSs), dBm, row-major with the
// BS index innermost. Immutable after construction.
class RsrpTensor {
 public:
  RsrpTensor(std::vector<Point> anchors, std::size_t num_tilts, std::vector<Point> bs_positions,
             std::vector<double> values);

  std::size_t num_anchors() const { return anchors_.size(); }
  std::size_t num_tilts() const { return num_tilts_; }
  std::size_t num_cells() const { return bs_positions_.size(); }

  const std::vector<Point>& anchors() const { return anchors_; }
  const std::vector<Point>& bs_positions() const { return bs_positions_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t anchor, std::size_t tilt, std::size_t bs) const {
    return values_[(anchor * num_tilts_ + tilt) * bs_positions_.size() + bs];
  }

  // Nearest anchor to `p`; equidistant anchors resolve to the lower index.
  // Points outside the anchor hull clamp to the nearest anchor.
  std::size_t nearest_anchor(Point p) const;

  friend bool operator==(const RsrpTensor& a, const RsrpTensor& b) {
    return a.anchors_ == b.anchors_ && a.num_tilts_ == b.num_tilts_ &&
           a.bs_positions_ == b.bs_positions_ && a.values_ == b.values_;
  }

 private:
  void build_index();

  std::vector<Point> anchors_;
  std::size_t num_tilts_;
  std::vector<Point> bs_positions_;
  std::vector<double> values_;

  // Bucket grid over the anchor bounding box.
  double min_x_ = 0.0, min_y_ = 0.0, bucket_ = 1.0;
  std::size_t nx_ = 1, ny_ = 1;
  std::vector<std::uint32_t> bucket_start_;
  std::vector<std::uint32_t> bucket_items_;
};

RsrpTensor generate_map(const MapGenConfig& cfg, const TiltDictionary& tilts,
                        const std::vector<Point>& bs_positions);

// Received power from every BS at the anchor nearest to `user`, each BS at its
// own tilt index.
std::vector<double> query_rsrp(const RsrpTensor& tensor, Point user, std::span<const int> tilt_idx);
void query_rsrp(const RsrpTensor& tensor, std::size_t anchor, std::span<const int> tilt_idx,
                std::span<double> out);

void save_map(const RsrpTensor& tensor, const std::filesystem::path& path);
RsrpTensor load_map(const std::filesystem::path& path);

}  // namespace son
