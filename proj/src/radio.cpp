#include "son/radio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "son/error.hpp"

namespace son {

CqiTable::CqiTable(std::vector<CqiLevel> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ConfigError("CQI table must have at least one level");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const auto& l = levels_[i];
    if (!std::isfinite(l.sinr_threshold_db) || !std::isfinite(l.rate_mbps_per_prb) || l.rate_mbps_per_prb < 0.0) {
      throw ConfigError("CQI level " + std::to_string(i) + " is not a finite non-negative rate");
    }
    if (i > 0) {
      if (!(l.sinr_threshold_db > levels_[i - 1].sinr_threshold_db)) {
        throw ConfigError("CQI thresholds must be strictly increasing");
      }
      if (l.rate_mbps_per_prb < levels_[i - 1].rate_mbps_per_prb) {
        throw ConfigError("CQI rates must be non-decreasing");
      }
    }
  }
}

CqiTable CqiTable::standard() {
  static constexpr double kEfficiency[15] = {0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
                                             2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
  std::vector<CqiLevel> levels;
  for (int i = 0; i < 15; ++i) levels.push_back({-6.0 + 2.0 * i, kEfficiency[i]});
  return CqiTable(std::move(levels));
}

CqiTable CqiTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CQI table '" + path.string() + "'");
  std::vector<CqiLevel> levels;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.find("sinr_threshold_db") != std::string::npos) continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    CqiLevel l;
    std::string extra;
    if (!(row >> l.sinr_threshold_db >> l.rate_mbps_per_prb) || (row >> extra)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'threshold,rate'");
    }
    levels.push_back(l);
  }
  return CqiTable(std::move(levels));
}

void RadioConfig::validate() const {
  if (!(cbr_mbps > 0.0)) throw ConfigError("cbr_mbps must be > 0");
  if (max_user_prb <= 0 || max_user_prb > cell_prb_budget) {
    throw ConfigError("need 0 < max_user_prb <= cell_prb_budget");
  }
  if (!(hysteresis_db >= 0.0)) throw ConfigError("hysteresis_db must be >= 0");
  if (!std::isfinite(noise_dbm)) throw ConfigError("noise_dbm must be finite");
  if (!(edge_user_threshold_kbps >= 0.0)) throw ConfigError("edge_user_threshold_kbps must be >= 0");
}

CioMatrix CioMatrix::zeros(std::size_t n) {
  CioMatrix m;
  m.n_ = n;
  m.values_.assign(n * n, 0.0);
  return m;
}

CioMatrix::CioMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
  if (values_.size() != n * n) throw DimensionError("CIO matrix must be n x n");
  for (std::size_t i = 0; i < n; ++i) {
    if (values_[i * n + i] != 0.0) throw ConfigError("CIO matrix diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values_[i * n + j];
      if (!(std::fabs(v) <= kCioMaxDb)) {
        throw ConfigError("CIO entry (" + std::to_string(i) + "," + std::to_string(j) + ") outside [-12, 12] dB");
      }
      if (v != -values_[j * n + i]) throw ConfigError("CIO matrix must be antisymmetric");
    }
  }
}

CioMatrix CioMatrix::from_upper(std::size_t n, std::span<const double> upper) {
  if (upper.size() != n * (n - 1) / 2) throw DimensionError("CIO upper triangle needs n(n-1)/2 entries");
  std::vector<double> v(n * n, 0.0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      v[i * n + j] = upper[idx];
      v[j * n + i] = -upper[idx];
      ++idx;
    }
  }
  return CioMatrix(n, std::move(v));
}

AssociationMatrix::AssociationMatrix(std::size_t num_cells, std::vector<int> serving)
    : num_cells_(num_cells), serving_(std::move(serving)) {
  for (int s : serving_) {
    if (s < 0 || static_cast<std::size_t>(s) >= num_cells_) {
      throw DimensionError("association refers to cell " + std::to_string(s) + " of " + std::to_string(num_cells_));
    }
  }
}

AssociationMatrix AssociationMatrix::from_indicator(std::size_t num_cells, std::size_t num_users,
                                                    std::span<const int> indicator) {
  if (indicator.size() != num_cells * num_users) throw DimensionError("association indicator must be N x K");
  std::vector<int> serving(num_users, -1);
  for (std::size_t k = 0; k < num_users; ++k) {
    int sum = 0;
    for (std::size_t n = 0; n < num_cells; ++n) {
      const int v = indicator[n * num_users + k];
      if (v != 0 && v != 1) throw ConfigError("association indicator entries must be 0 or 1");
      if (v == 1) serving[k] = static_cast<int>(n);
      sum += v;
    }
    if (sum != 1) throw ConfigError("user " + std::to_string(k) + " must be served by exactly one cell");
  }
  return AssociationMatrix(num_cells, std::move(serving));
}

std::vector<std::size_t> AssociationMatrix::users_per_cell() const {
  std::vector<std::size_t> c(num_cells_, 0);
  for (int s : serving_) ++c[static_cast<std::size_t>(s)];
  return c;
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

double sinr_db(std::span<const double> rsrp_dbm, std::size_t serving, double noise_dbm) {
  double interference = dbm_to_mw(noise_dbm);
  for (std::size_t n = 0; n < rsrp_dbm.size(); ++n) {
    if (n != serving) interference += dbm_to_mw(rsrp_dbm[n]);
  }
  return rsrp_dbm[serving] - mw_to_dbm(interference);
}

double rate_from_sinr(double sinr, const CqiTable& table) {
  const auto& levels = table.levels();
  // First level whose threshold exceeds sinr; the one before it applies.
  const auto it = std::upper_bound(levels.begin(), levels.end(), sinr,
                                   [](double s, const CqiLevel& l) { return s < l.sinr_threshold_db; });
  if (it == levels.begin()) return 0.0;
  return std::prev(it)->rate_mbps_per_prb;
}

double user_load_prb(double rate, const RadioConfig& cfg) {
  const double limit = static_cast<double>(cfg.max_user_prb);
  if (!(rate > 0.0)) return limit;
  return std::min(cfg.cbr_mbps / rate, limit);
}

AssociationMatrix a3_handover(const RsrpMatrix& rsrp, const AssociationMatrix& current, const CioMatrix& cio,
                              double hysteresis_db, std::vector<int>* handovers_out) {
  const std::size_t n_cells = rsrp.num_cells;
  if (current.num_users() != rsrp.num_users || current.num_cells() != n_cells || cio.size() != n_cells) {
    throw DimensionError("a3_handover: RSRP, association and CIO dimensions disagree");
  }
  if (handovers_out) handovers_out->assign(n_cells, 0);
  std::vector<int> serving = current.serving_cells();
  for (std::size_t k = 0; k < rsrp.num_users; ++k) {
    const auto n = static_cast<std::size_t>(serving[k]);
    const double p_serving = rsrp(k, n);
    int target = -1;
    double best_margin = 0.0;
    for (std::size_t m = 0; m < n_cells; ++m) {
      if (m == n) continue;
      const double margin = (rsrp(k, m) - p_serving) - (cio(m, n) + hysteresis_db);
      if (margin > 0.0 && (target < 0 || margin > best_margin)) {
        target = static_cast<int>(m);
        best_margin = margin;
      }
    }
    if (target >= 0) {
      serving[k] = target;
      if (handovers_out) ++(*handovers_out)[n];
    }
  }
  return AssociationMatrix(n_cells, std::move(serving));
}

AssociationMatrix a3_handover(const NetworkSnapshot& snapshot, const CioMatrix& cio, double hysteresis_db) {
  return a3_handover(snapshot.user_rsrp_dbm, snapshot.association, cio, hysteresis_db);
}

std::vector<double> schedule_prbs(std::span<const double> demands, std::span<const double> rates, double budget) {
  const std::size_t m = demands.size();
  if (rates.size() != m) throw DimensionError("schedule_prbs: demands and rates differ in length");
  std::vector<double> alloc(demands.begin(), demands.end());
  const double total = std::accumulate(demands.begin(), demands.end(), 0.0);
  if (total <= budget) return alloc;

  // Rank 1 = highest rate; equal rates keep index order.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rates[a] > rates[b]; });
  std::vector<double> weight(m);
  for (std::size_t pos = 0; pos < m; ++pos) {
    weight[order[pos]] = static_cast<double>(m - pos);
  }

  std::vector<char> saturated(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    if (!(demands[k] > 0.0)) {
      saturated[k] = 1;
      alloc[k] = 0.0;
    }
  }
  double residual = budget;
  std::vector<double> share(m, 0.0);
  for (;;) {
    double w_sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (!saturated[k]) w_sum += weight[k];
    }
    if (w_sum == 0.0) break;
    bool capped = false;
    for (std::size_t k = 0; k < m; ++k) {
      if (saturated[k]) continue;
      share[k] = residual * weight[k] / w_sum;
      if (share[k] >= demands[k]) {
        saturated[k] = 1;
        alloc[k] = demands[k];
        capped = true;
      }
    }
    if (!capped) break;
    residual = budget;
    for (std::size_t k = 0; k < m; ++k) {
      if (saturated[k]) residual -= alloc[k];
    }
  }

  // Whole PRBs for the unsaturated users; leftover units go to the largest
  // fractional parts (rank order on ties) while staying within demand.
  std::vector<std::size_t> open;
  double floors = 0.0;
  for (std::size_t pos = 0; pos < m; ++pos) {
    const std::size_t k = order[pos];
    if (saturated[k]) continue;
    alloc[k] = std::floor(share[k]);
    floors += alloc[k];
    open.push_back(k);
  }
  auto units = static_cast<long>(std::floor(residual + 1e-9) - floors);
  std::stable_sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
    return (share[a] - std::floor(share[a])) > (share[b] - std::floor(share[b]));
  });
  for (std::size_t k : open) {
    if (units <= 0) break;
    if (alloc[k] + 1.0 <= demands[k]) {
      alloc[k] += 1.0;
      --units;
    }
  }
  return alloc;
}

std::vector<double> schedule_network(const AssociationMatrix& association, std::span<const double> demands,
                                     std::span<const double> rates, double budget) {
  const std::size_t K = association.num_users();
  if (demands.size() != K || rates.size() != K) throw DimensionError("schedule_network: per-user vectors must have K entries");
  std::vector<double> alloc(K, 0.0);
  std::vector<std::vector<std::size_t>> members(association.num_cells());
  for (std::size_t k = 0; k < K; ++k) members[static_cast<std::size_t>(association.serving(k))].push_back(k);
  std::vector<double> d, r;
  for (const auto& users : members) {
    d.clear();
    r.clear();
    for (std::size_t k : users) {
      d.push_back(demands[k]);
      r.push_back(rates[k]);
    }
    const auto a = schedule_prbs(d, r, budget);
    for (std::size_t i = 0; i < users.size(); ++i) alloc[users[i]] = a[i];
  }
  return alloc;
}

CellMetrics snapshot_metrics(const AssociationMatrix& association, std::span<const double> rates,
                             std::span<const double> allocations, const RadioConfig& cfg) {
  const std::size_t K = association.num_users();
  if (rates.size() != K || allocations.size() != K) throw DimensionError("snapshot_metrics: per-user vectors must have K entries");
  CellMetrics m;
  m.cell_load_prb.assign(association.num_cells(), 0.0);
  m.cell_throughput_mbps.assign(association.num_cells(), 0.0);
  m.edge_flags.assign(K, false);
  const double edge_mbps = cfg.edge_user_threshold_kbps / 1000.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto n = static_cast<std::size_t>(association.serving(k));
    const double achieved = rates[k] * allocations[k];
    m.cell_load_prb[n] += allocations[k];
    m.cell_throughput_mbps[n] += achieved;
    m.edge_flags[k] = achieved < edge_mbps;
  }
  return m;
}

NetworkSnapshot evaluate_network(RsrpMatrix rsrp, AssociationMatrix association, const RadioConfig& cfg) {
  const std::size_t K = rsrp.num_users;
  if (association.num_users() != K || association.num_cells() != rsrp.num_cells) {
    throw DimensionError("evaluate_network: RSRP and association dimensions disagree");
  }
  std::vector<double> sinr(K), rate(K), demand(K);
  std::vector<double> cell_demand(rsrp.num_cells, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    sinr[k] = sinr_db(rsrp.row(k), static_cast<std::size_t>(association.serving(k)), cfg.noise_dbm);
    rate[k] = rate_from_sinr(sinr[k], cfg.cqi_table);
    demand[k] = user_load_prb(rate[k], cfg);
    cell_demand[static_cast<std::size_t>(association.serving(k))] += demand[k];
  }
  auto alloc = schedule_network(association, demand, rate, static_cast<double>(cfg.cell_prb_budget));
  auto metrics = snapshot_metrics(association, rate, alloc, cfg);
  return NetworkSnapshot{std::move(rsrp),
                         std::move(sinr),
                         std::move(rate),
                         std::move(demand),
                         std::move(alloc),
                         std::move(association),
                         std::move(cell_demand),
                         std::move(metrics.cell_load_prb),
                         std::move(metrics.cell_throughput_mbps),
                         std::move(metrics.edge_flags)};
}

AssociationMatrix strongest_cell_association(const RsrpMatrix& rsrp) {
  std::vector<int> serving(rsrp.num_users, 0);
  for (std::size_t k = 0; k < rsrp.num_users; ++k) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < rsrp.num_cells; ++n) {
      if (rsrp(k, n) > rsrp(k, best)) best = n;
    }
    serving[k] = static_cast<int>(best);
  }
  return AssociationMatrix(rsrp.num_cells, std::move(serving));
}

}  // namespace son
