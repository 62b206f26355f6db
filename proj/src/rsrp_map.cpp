#include "son/rsrp_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>

#include "binary_io.hpp"
#include "son/error.hpp"
#include "son/kernels.hpp"
#include "son/random.hpp"

namespace son {

namespace {

constexpr char kMapMagic[8] = {'S', 'O', 'N', 'R', 'S', 'R', 'P', '\0'};
constexpr std::uint32_t kMapVersion = 1;

}  // namespace

TiltDictionary::TiltDictionary(std::vector<TiltAngle> angles) : angles_(std::move(angles)) {
  if (angles_.empty()) throw ConfigError("tilt dictionary needs at least one entry");
  std::set<std::pair<double, double>> seen;
  for (const auto& a : angles_) {
    if (!std::isfinite(a.azimuth_deg) || !std::isfinite(a.elevation_deg)) {
      throw ConfigError("tilt dictionary entries must be finite");
    }
    if (!seen.emplace(a.azimuth_deg, a.elevation_deg).second) {
      throw ConfigError("tilt dictionary entries must be unique");
    }
  }
}

TiltDictionary TiltDictionary::standard() {
  std::vector<TiltAngle> angles;
  for (int m = 0; m < 11; ++m) angles.push_back({0.0, 2.0 * m});
  return TiltDictionary(std::move(angles));
}

double TiltGainModel::gain_db(double azimuth_off_deg, double elevation_deg,
                              const TiltAngle& tilt) const {
  double phi = std::remainder(azimuth_off_deg - tilt.azimuth_deg, 360.0);
  const double h = -std::min(12.0 * (phi / horizontal_beamwidth_deg) * (phi / horizontal_beamwidth_deg),
                             max_attenuation_db);
  const double dv = (elevation_deg - tilt.elevation_deg) / vertical_beamwidth_deg;
  const double v = -std::min(12.0 * dv * dv, vertical_sidelobe_db);
  return -std::min(-(h + v), max_attenuation_db);
}

void MapGenConfig::validate() const {
  if (!(area.width > 0.0) || !(area.height > 0.0)) throw ConfigError("map area must be positive");
  if (!(grid_spacing_m > 0.0)) throw ConfigError("grid_spacing_m must be > 0");
  if (!(pathloss_exponent >= 2.0)) throw ConfigError("pathloss_exponent must be >= 2");
  if (!(bs_height_m >= 0.0)) throw ConfigError("bs_height_m must be >= 0");
  if (!(shadowing_sigma_db >= 0.0)) throw ConfigError("shadowing_sigma_db must be >= 0");
  if (!(gain.horizontal_beamwidth_deg > 0.0) || !(gain.vertical_beamwidth_deg > 0.0)) {
    throw ConfigError("antenna beamwidths must be > 0");
  }
  if (gain.max_attenuation_db < 0.0 || gain.vertical_sidelobe_db < 0.0) {
    throw ConfigError("antenna attenuation limits must be >= 0");
  }
}

RsrpTensor::RsrpTensor(std::vector<Point> anchors, std::size_t num_tilts,
                       std::vector<Point> bs_positions, std::vector<double> values)
    : anchors_(std::move(anchors)),
      num_tilts_(num_tilts),
      bs_positions_(std::move(bs_positions)),
      values_(std::move(values)) {
  if (anchors_.empty() || num_tilts_ == 0 || bs_positions_.empty()) {
    throw SchemaError("RSRP tensor dimensions must be positive");
  }
  if (values_.size() != anchors_.size() * num_tilts_ * bs_positions_.size()) {
    throw SchemaError("RSRP tensor holds " + std::to_string(values_.size()) + " values, shape needs " +
                      std::to_string(anchors_.size() * num_tilts_ * bs_positions_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw SchemaError("RSRP tensor contains a non-finite value");
  }
  build_index();
}

void RsrpTensor::build_index() {
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = max_x;
  min_x_ = std::numeric_limits<double>::infinity();
  min_y_ = min_x_;
  for (const auto& a : anchors_) {
    min_x_ = std::min(min_x_, a.x);
    min_y_ = std::min(min_y_, a.y);
    max_x = std::max(max_x, a.x);
    max_y = std::max(max_y, a.y);
  }
  const double w = std::max(max_x - min_x_, 1e-9);
  const double h = std::max(max_y - min_y_, 1e-9);
  // About two anchors per bucket.
  bucket_ = std::max(std::sqrt(2.0 * w * h / static_cast<double>(anchors_.size())), 1e-6);
  nx_ = static_cast<std::size_t>(w / bucket_) + 1;
  ny_ = static_cast<std::size_t>(h / bucket_) + 1;

  std::vector<std::uint32_t> counts(nx_ * ny_ + 1, 0);
  auto bucket_of = [&](const Point& p) {
    const auto ix = std::min(nx_ - 1, static_cast<std::size_t>((p.x - min_x_) / bucket_));
    const auto iy = std::min(ny_ - 1, static_cast<std::size_t>((p.y - min_y_) / bucket_));
    return iy * nx_ + ix;
  };
  for (const auto& a : anchors_) ++counts[bucket_of(a) + 1];
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  bucket_start_ = counts;
  bucket_items_.assign(anchors_.size(), 0);
  std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
  for (std::uint32_t i = 0; i < anchors_.size(); ++i) {
    bucket_items_[fill[bucket_of(anchors_[i])]++] = i;
  }
}

std::size_t RsrpTensor::nearest_anchor(Point p) const {
  const double fx = (p.x - min_x_) / bucket_;
  const double fy = (p.y - min_y_) / bucket_;
  const auto cx = static_cast<long>(std::clamp(std::floor(fx), 0.0, static_cast<double>(nx_ - 1)));
  const auto cy = static_cast<long>(std::clamp(std::floor(fy), 0.0, static_cast<double>(ny_ - 1)));

  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best = anchors_.size();
  const long max_ring = static_cast<long>(std::max(nx_, ny_));
  for (long ring = 0; ring <= max_ring; ++ring) {
    for (long iy = cy - ring; iy <= cy + ring; ++iy) {
      if (iy < 0 || iy >= static_cast<long>(ny_)) continue;
      for (long ix = cx - ring; ix <= cx + ring; ++ix) {
        if (ix < 0 || ix >= static_cast<long>(nx_)) continue;
        if (std::max(std::labs(ix - cx), std::labs(iy - cy)) != ring) continue;
        const std::size_t b = static_cast<std::size_t>(iy) * nx_ + static_cast<std::size_t>(ix);
        for (std::uint32_t k = bucket_start_[b]; k < bucket_start_[b + 1]; ++k) {
          const std::uint32_t i = bucket_items_[k];
          const double d = distance_sq(p, anchors_[i]);
          if (d < best_d || (d == best_d && i < best)) {
            best_d = d;
            best = i;
          }
        }
      }
    }
    // Lower bound on the distance to any anchor in a bucket not yet scanned:
    // the nearest side of the scanned square that still has buckets beyond it.
    double bound = std::numeric_limits<double>::infinity();
    if (cx - ring > 0) bound = std::min(bound, p.x - (min_x_ + static_cast<double>(cx - ring) * bucket_));
    if (cx + ring + 1 < static_cast<long>(nx_)) {
      bound = std::min(bound, min_x_ + static_cast<double>(cx + ring + 1) * bucket_ - p.x);
    }
    if (cy - ring > 0) bound = std::min(bound, p.y - (min_y_ + static_cast<double>(cy - ring) * bucket_));
    if (cy + ring + 1 < static_cast<long>(ny_)) {
      bound = std::min(bound, min_y_ + static_cast<double>(cy + ring + 1) * bucket_ - p.y);
    }
    if (bound == std::numeric_limits<double>::infinity()) break;
    if (best < anchors_.size() && bound > 0.0 && bound * bound > best_d) break;
  }
  return best;
}

RsrpTensor generate_map(const MapGenConfig& cfg, const TiltDictionary& tilts,
                        const std::vector<Point>& bs_positions) {
  cfg.validate();
  if (bs_positions.empty()) throw ConfigError("at least one BS position is required");
  for (std::size_t n = 0; n < bs_positions.size(); ++n) {
    if (!cfg.area.contains(bs_positions[n])) {
      throw ConfigError("BS " + std::to_string(n) + " at (" + std::to_string(bs_positions[n].x) + ", " +
                        std::to_string(bs_positions[n].y) + ") lies outside the map area");
    }
  }
  if (!cfg.bs_azimuth_deg.empty() && cfg.bs_azimuth_deg.size() != bs_positions.size()) {
    throw ConfigError("bs_azimuth_deg must list one azimuth per BS");
  }

  const auto nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.area.width / cfg.grid_spacing_m + 1e-9)));
  const auto ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.area.height / cfg.grid_spacing_m + 1e-9)));
  std::vector<Point> anchors;
  anchors.reserve(nx * ny);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      anchors.push_back({(static_cast<double>(ix) + 0.5) * cfg.grid_spacing_m,
                         (static_cast<double>(iy) + 0.5) * cfg.grid_spacing_m});
    }
  }

  std::vector<SiteGeometry> sites;
  const Point c = cfg.area.center();
  for (std::size_t n = 0; n < bs_positions.size(); ++n) {
    double az;
    if (!cfg.bs_azimuth_deg.empty()) {
      az = cfg.bs_azimuth_deg[n];
    } else if (distance_sq(bs_positions[n], c) < 1e-12) {
      az = 0.0;
    } else {
      az = std::atan2(c.y - bs_positions[n].y, c.x - bs_positions[n].x) * 180.0 / M_PI;
    }
    sites.push_back({bs_positions[n], az});
  }

  // Shadowing is frozen into the table; drawn serially so the parallel fill
  // stays bit-identical to the serial one.
  const std::size_t n_bs = bs_positions.size();
  std::vector<double> shadowing(anchors.size() * n_bs, 0.0);
  if (cfg.shadowing_sigma_db > 0.0) {
    Rng rng = make_rng(cfg.rng_seed, "map");
    for (double& s : shadowing) s = cfg.shadowing_sigma_db * gaussian(rng);
  }

  std::vector<double> values(anchors.size() * tilts.size() * n_bs);
  kernels::rsrp_fill_parallel(cfg, tilts, anchors, sites, shadowing, values);
  return RsrpTensor(std::move(anchors), tilts.size(), bs_positions, std::move(values));
}

void query_rsrp(const RsrpTensor& tensor, std::size_t anchor, std::span<const int> tilt_idx,
                std::span<double> out) {
  const std::size_t n_bs = tensor.num_cells();
  if (tilt_idx.size() != n_bs || out.size() != n_bs) {
    throw DimensionError("query_rsrp expects one tilt index per BS");
  }
  for (std::size_t n = 0; n < n_bs; ++n) {
    const int m = tilt_idx[n];
    if (m < 0 || static_cast<std::size_t>(m) >= tensor.num_tilts()) {
      throw ConfigError("tilt index " + std::to_string(m) + " outside 0.." +
                        std::to_string(tensor.num_tilts() - 1));
    }
    out[n] = tensor.at(anchor, static_cast<std::size_t>(m), n);
  }
}

std::vector<double> query_rsrp(const RsrpTensor& tensor, Point user, std::span<const int> tilt_idx) {
  std::vector<double> out(tensor.num_cells());
  query_rsrp(tensor, tensor.nearest_anchor(user), tilt_idx, out);
  return out;
}

void save_map(const RsrpTensor& tensor, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes(kMapMagic, sizeof kMapMagic);
  w.u32(kMapVersion);
  w.u64(tensor.num_anchors());
  w.u64(tensor.num_tilts());
  w.u64(tensor.num_cells());
  for (const auto& a : tensor.anchors()) {
    w.f64(a.x);
    w.f64(a.y);
  }
  for (const auto& b : tensor.bs_positions()) {
    w.f64(b.x);
    w.f64(b.y);
  }
  w.f64s(tensor.values());
  w.write_file(path);
}

RsrpTensor load_map(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (!std::equal(magic, magic + 8, kMapMagic)) throw ParseError("not an RSRP map file (bad magic)", 0);
  const auto version = r.u32("version");
  if (version != kMapVersion) {
    throw SchemaError("unsupported RSRP map version " + std::to_string(version));
  }
  const auto A = r.u64("anchor count");
  const auto M = r.u64("tilt count");
  const auto N = r.u64("BS count");
  if (A == 0 || M == 0 || N == 0) throw SchemaError("RSRP map header declares an empty dimension");
  if (A > (1ULL << 32) || M > (1ULL << 16) || N > (1ULL << 16)) {
    throw SchemaError("RSRP map header dimensions are implausibly large");
  }
  std::vector<Point> anchors(A);
  for (auto& a : anchors) {
    a.x = r.f64("anchor x");
    a.y = r.f64("anchor y");
  }
  std::vector<Point> bs(N);
  for (auto& b : bs) {
    b.x = r.f64("BS x");
    b.y = r.f64("BS y");
  }
  const std::uint64_t plane = A * M * sizeof(double);
  const std::uint64_t expected = plane * N;
  if (r.remaining() != expected) {
    if (r.remaining() % plane == 0) {
      throw SchemaError("RSRP map header declares N=" + std::to_string(N) + " BS planes but the body holds " +
                        std::to_string(r.remaining() / plane));
    }
    if (r.remaining() < expected) {
      throw ParseError("truncated RSRP map body: expected " + std::to_string(expected) + " value bytes, found " +
                           std::to_string(r.remaining()),
                       r.offset() + r.remaining());
    }
    throw ParseError("trailing bytes after RSRP map body", r.offset() + expected);
  }
  auto values = r.f64s(A * M * N, "RSRP values");
  return RsrpTensor(std::move(anchors), M, std::move(bs), std::move(values));
}

}  // namespace son
