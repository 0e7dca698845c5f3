#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lipattn/attention.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn {

enum class SweepVariant { Unmasked, Masked, MultiHead, Weighted, Biased };
enum class SweepGenerator { Prop32, Prop35, Section52, Quadratic, RandomGeneric, RandomBall };

std::string_view to_string(SweepVariant v) noexcept;
std::string_view to_string(SweepGenerator g) noexcept;
std::optional<SweepVariant> parse_variant(std::string_view name) noexcept;
std::optional<SweepGenerator> parse_generator(std::string_view name) noexcept;

/// A grid of (n, R, seed) points. Parsed from JSON whose keys are exactly the
/// member names; unknown keys are rejected.
struct SweepConfig {
  SweepVariant variant = SweepVariant::Unmasked;
  std::vector<std::size_t> n_grid;
  std::vector<double> R_grid;
  std::size_t d = 0;
  std::size_t k = 0;  // 0 means k = d (single head) or d / H (multi-head)
  std::size_t H = 1;
  std::vector<std::uint64_t> seeds;
  SweepGenerator generator = SweepGenerator::RandomBall;
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  std::string output_path;

  /// Throws std::invalid_argument on empty grids, inconsistent dimensions
  /// or a generator that does not fit the variant.
  void validate() const;
};

SweepConfig parse_sweep_config(std::string_view json_text);
SweepConfig load_sweep_config(const std::string& path);

struct SweepRecord {
  std::string variant;
  std::string generator;
  std::size_t n = 0;
  double R = 0.0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  double measured_lipschitz = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::optional<double> bound_general;
  std::optional<double> bound_rho_r;
  std::optional<double> bound_mean_field;
  std::optional<double> bound_masked;
  std::optional<double> lower_prop32;
  std::optional<double> gamma_diagnostic;
  double wall_time_ms = 0.0;

  friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

struct SweepOptions {
  /// 0 means: LIPATTN_THREADS if set, else the hardware concurrency.
  std::size_t threads = 0;
  /// Fill wall_time_ms; otherwise it is written as 0 so reruns are byte-identical.
  bool record_timing = false;
};

/// Thread count from LIPATTN_THREADS, falling back to the hardware concurrency.
std::size_t default_thread_count();

/// One record per (n, R, seed), sorted by (n, R, seed). Each point derives
/// its data and power-iteration seeds from (seed, n, R, replicate index), so
/// results do not depend on the thread count. Model parameters depend on the
/// seed only. Throws BoundViolationError when a converged measurement exceeds
/// bound_general (1 + 1e-9).
std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepOptions& opts = {});

/// The model and input a sweep evaluates at one grid point. Exactly one of
/// `params` and `multi_head` is set.
struct SweepPoint {
  TokenSequence x;
  std::optional<SimplexWeights> weights;
  std::optional<AttentionParams> params;
  std::optional<MultiHeadParams> multi_head;
  std::size_t adversarial_head = 0;
};

/// Rebuilds grid point (n, R) of replicate `replicate` (an index into
/// cfg.seeds). Grid membership of n and R is not required.
SweepPoint sweep_point(const SweepConfig& cfg, std::size_t n, double radius, std::size_t replicate = 0);

/// The header row: field names of SweepRecord in declaration order.
std::string_view csv_header() noexcept;
/// Header plus one line per record. Doubles use the shortest round-trip
/// form; absent optionals are empty fields.
std::string emit_csv(std::span<const SweepRecord> records);
std::vector<SweepRecord> parse_csv(std::string_view text);
void write_csv(const std::string& path, std::span<const SweepRecord> records);
std::vector<SweepRecord> read_csv(const std::string& path);

/// Numeric value of a SweepRecord field by column name; nullopt for an
/// absent optional. Throws std::invalid_argument for unknown or non-numeric names.
std::optional<double> record_field(const SweepRecord& r, std::string_view name);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope x + intercept. With constant y the fit
/// has slope 0 and r_squared 1.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

/// Least squares on (log x, log y) after replacing the y values sharing an x
/// by their median. Needs at least 3 points and 2 distinct x; rejects
/// nonpositive values.
LinearFit fit_loglog_slope(std::span<const double> x, std::span<const double> y);
LinearFit fit_loglog_slope(std::span<const SweepRecord> records, std::string_view x_field,
                           std::string_view y_field);

}  // namespace lipattn
