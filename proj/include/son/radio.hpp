#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace son {

struct CqiLevel {
  double sinr_threshold_db = 0.0;
  double rate_mbps_per_prb = 0.0;
};

// Monotone SINR -> per-PRB rate step table.
class CqiTable {
 public:
  explicit CqiTable(std::vector<CqiLevel> levels);

  // 15 levels, thresholds -6..22 dB in 2 dB steps, rates equal to the 4-bit
  // CQI spectral efficiencies over a nominal 1 MHz resource block.
  static CqiTable standard();

  // CSV with a header line and rows "sinr_threshold_db,rate_mbps_per_prb";
  // blank lines and '#' comments are ignored.
  static CqiTable load(const std::filesystem::path& path);

  const std::vector<CqiLevel>& levels() const { return levels_; }

 private:
  std::vector<CqiLevel> levels_;
};

struct RadioConfig {
  double cbr_mbps = 1.0;
  int max_user_prb = 6;
  int cell_prb_budget = 100;
  double hysteresis_db = 1.0;
  double noise_dbm = -125.0;
  CqiTable cqi_table = CqiTable::standard();
  double edge_user_threshold_kbps = 550.0;

  void validate() const;
};

inline constexpr double kCioMaxDb = 12.0;

// Cell individual offsets O(i, j) in dB. Antisymmetric with zero diagonal,
// every entry within [-12, 12].
class CioMatrix {
 public:
  CioMatrix() = default;  // 0 x 0
  static CioMatrix zeros(std::size_t n);
  // Row-major n x n; rejects asymmetric or out-of-range input.
  CioMatrix(std::size_t n, std::vector<double> values);
  // Fills the strict upper triangle row by row, lower triangle by negation.
  static CioMatrix from_upper(std::size_t n, std::span<const double> upper);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const CioMatrix&, const CioMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// User association I(n, k): every user is served by exactly one cell. Stored
// as the serving-cell index per user, which makes the column-sum invariant
// hold by construction.
class AssociationMatrix {
 public:
  AssociationMatrix(std::size_t num_cells, std::vector<int> serving);
  // Row-major N x K binary matrix; each column must sum to exactly 1.
  static AssociationMatrix from_indicator(std::size_t num_cells, std::size_t num_users,
                                          std::span<const int> indicator);

  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_users() const { return serving_.size(); }
  int serving(std::size_t k) const { return serving_[k]; }
  int indicator(std::size_t n, std::size_t k) const { return serving_[k] == static_cast<int>(n) ? 1 : 0; }
  const std::vector<int>& serving_cells() const { return serving_; }
  std::vector<std::size_t> users_per_cell() const;

  friend bool operator==(const AssociationMatrix&, const AssociationMatrix&) = default;

 private:
  std::size_t num_cells_;
  std::vector<int> serving_;
};

// K x N received powers (dBm), user-major.
struct RsrpMatrix {
  std::size_t num_users = 0;
  std::size_t num_cells = 0;
  std::vector<double> dbm;

  std::span<const double> row(std::size_t k) const { return {dbm.data() + k * num_cells, num_cells}; }
  double operator()(std::size_t k, std::size_t n) const { return dbm[k * num_cells + n]; }
};

struct NetworkSnapshot {
  RsrpMatrix user_rsrp_dbm;
  std::vector<double> sinr_db;             // K
  std::vector<double> rate_mbps_per_prb;   // K, r_k
  std::vector<double> user_load_prb;       // K, l_k (demand)
  std::vector<double> allocation_prb;      // K, post-scheduling
  AssociationMatrix association;
  std::vector<double> cell_demand_prb;     // N, pre-scheduling sum of l_k
  std::vector<double> cell_load_prb;       // N, L_n (post-scheduling)
  std::vector<double> cell_throughput_mbps;  // N, R_n
  std::vector<bool> edge_flags;            // K
};

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

// Serving power over (other cells' power + noise), in dB.
double sinr_db(std::span<const double> rsrp_dbm, std::size_t serving, double noise_dbm);

double rate_from_sinr(double sinr_db, const CqiTable& table);

// l_k = min(C_k / r_k, l_limit); l_limit when r_k = 0.
double user_load_prb(double rate_mbps_per_prb, const RadioConfig& cfg);

// A3 event: leave serving n for n' when p_n' - p_n > O(n', n) + H. Among
// triggering neighbours the largest margin wins, lowest index on ties.
// `handovers_out`, if given, receives one count per source cell.
AssociationMatrix a3_handover(const RsrpMatrix& rsrp, const AssociationMatrix& current, const CioMatrix& cio,
                              double hysteresis_db, std::vector<int>* handovers_out = nullptr);
AssociationMatrix a3_handover(const NetworkSnapshot& snapshot, const CioMatrix& cio, double hysteresis_db);

// Allocation within one cell. Uncongested cells grant every demand. A
// congested cell shares the budget by rate-rank weight (highest rate gets
// weight K_cell, lowest gets 1), capping users at their demand and
// redistributing the excess until no cap binds; the unsaturated shares are
// then rounded to whole PRBs by largest remainder.
std::vector<double> schedule_prbs(std::span<const double> demands, std::span<const double> rates, double budget);

// schedule_prbs applied cell by cell.
std::vector<double> schedule_network(const AssociationMatrix& association, std::span<const double> demands,
                                     std::span<const double> rates, double budget);

struct CellMetrics {
  std::vector<double> cell_load_prb;
  std::vector<double> cell_throughput_mbps;
  std::vector<bool> edge_flags;
};

CellMetrics snapshot_metrics(const AssociationMatrix& association, std::span<const double> rates,
                             std::span<const double> allocations, const RadioConfig& cfg);

// Full per-tick pipeline: SINR -> rate -> demand -> schedule -> metrics.
NetworkSnapshot evaluate_network(RsrpMatrix rsrp, AssociationMatrix association, const RadioConfig& cfg);

// Index of the strongest cell per user (lowest index on ties).
AssociationMatrix strongest_cell_association(const RsrpMatrix& rsrp);

}  // namespace son
