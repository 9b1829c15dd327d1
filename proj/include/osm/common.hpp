#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace osm {

// Error categories map to CLI exit codes 2/3/4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. xoshiro256** seeded through splitmix64 so that streams
// derived from (seed, path...) are independent of thread scheduling.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);

// Hash-combines a base seed with a path of indices into a new stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();     // open interval (0,1)
  double normal();      // standard normal, Box-Muller without state
  double exponential(double rate = 1.0);
  std::uint64_t uniform_index(std::uint64_t n);  // [0, n)

 private:
  std::uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// Calendar dates. Stored as real-valued days since 1970-01-01.
// ---------------------------------------------------------------------------

inline constexpr double kDaysPerMonth = 365.25 / 12.0;

std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t z, int& y, int& m, int& d);
double parse_iso_date(const std::string& s);          // throws DataError
std::string format_iso_date(double days_since_epoch); // rounds to nearest day

inline double months_to_days(double months) { return months * kDaysPerMonth; }
inline double days_to_months(double days) { return days / kDaysPerMonth; }

// ---------------------------------------------------------------------------
// Thread helpers. Work items write to disjoint slots; results never depend on
// scheduling. threads <= 1 degenerates to a serial loop.
// ---------------------------------------------------------------------------

int resolve_threads(int requested);  // 0 -> OSM_THREADS env, else 1
void parallel_for(int n, int threads, const std::function<void(int)>& body);

// ---------------------------------------------------------------------------
// Small CSV / formatting helpers. Round-trip-exact doubles via %.17g.
// ---------------------------------------------------------------------------

std::string fmt_double(double x);
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double_field(const std::string& s, const std::string& context);
int parse_indicator_field(const std::string& s, const std::string& context);
std::vector<std::string> read_lines(const std::string& path);  // throws DataError

}  // namespace osm
