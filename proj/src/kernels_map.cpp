#include <algorithm>
#include <cmath>

#include "son/kernels.hpp"

namespace son::kernels {

double rsrp_element(const MapGenConfig& cfg, const TiltAngle& tilt, const SiteGeometry& site, Point anchor) {
  const double dx = anchor.x - site.position.x;
  const double dy = anchor.y - site.position.y;
  const double d2 = std::sqrt(dx * dx + dy * dy);
  const double d3 = std::max(std::sqrt(d2 * d2 + cfg.bs_height_m * cfg.bs_height_m), 1.0);
  const double azimuth = (d2 > 0.0 ? std::atan2(dy, dx) * 180.0 / M_PI : site.azimuth_deg) - site.azimuth_deg;
  const double elevation = std::atan2(cfg.bs_height_m, d2) * 180.0 / M_PI;
  const double pathloss = cfg.reference_loss_db + 10.0 * cfg.pathloss_exponent * std::log10(d3);
  return cfg.tx_power_dbm - pathloss + cfg.gain.gain_db(azimuth, elevation, tilt);
}

namespace {

inline void fill_anchor(const MapGenConfig& cfg, const TiltDictionary& tilts, Point anchor,
                        std::span<const SiteGeometry> sites, const double* shadow, double* row) {
  const std::size_t n_sites = sites.size();
  for (std::size_t m = 0; m < tilts.size(); ++m) {
    for (std::size_t n = 0; n < n_sites; ++n) {
      const double v = rsrp_element(cfg, tilts[m], sites[n], anchor) + shadow[n];
      row[m * n_sites + n] = std::min(v, cfg.tx_power_dbm);
    }
  }
}

}  // namespace

void rsrp_fill_serial(const MapGenConfig& cfg, const TiltDictionary& tilts, std::span<const Point> anchors,
                      std::span<const SiteGeometry> sites, std::span<const double> shadowing,
                      std::span<double> out) {
  const std::size_t stride = tilts.size() * sites.size();
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    fill_anchor(cfg, tilts, anchors[a], sites, shadowing.data() + a * sites.size(), out.data() + a * stride);
  }
}

void rsrp_fill_parallel(const MapGenConfig& cfg, const TiltDictionary& tilts, std::span<const Point> anchors,
                        std::span<const SiteGeometry> sites, std::span<const double> shadowing,
                        std::span<double> out) {
  const std::size_t stride = tilts.size() * sites.size();
  const long count = static_cast<long>(anchors.size());
#pragma omp parallel for schedule(static)
  for (long a = 0; a < count; ++a) {
    const auto i = static_cast<std::size_t>(a);
    fill_anchor(cfg, tilts, anchors[i], sites, shadowing.data() + i * sites.size(), out.data() + i * stride);
  }
}

}  // namespace son::kernels
