#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace physio {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, malformed files, schema violations: exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};
class PreprocessError : public InputError {
 public:
  using InputError::InputError;
};
class ExtractionError : public InputError {
 public:
  using InputError::InputError;
};
class AlignmentError : public InputError {
 public:
  using InputError::InputError;
};
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

// Non-finite loss or gradient during optimisation: exit code 3.
class TrainingFault : public Error {
 public:
  using Error::Error;
};

// Symbolic regression / law extraction failure: exit code 4.
class DistillationError : public Error {
 public:
  using Error::Error;
};

// Raw stream kinds as they appear on disk. ACC is stored as three axes.
enum class Channel { AccX, AccY, AccZ, EDA, EMG, BVP, ECG, TEMP, RESP };

// Model-level physiological indicators b_j.
enum class Indicator { ACC, BVP, ECG, EDA, EMG, RESP, TEMP };

inline constexpr std::array<Indicator, 7> kAllIndicators = {
    Indicator::ACC, Indicator::BVP, Indicator::ECG, Indicator::EDA,
    Indicator::EMG, Indicator::RESP, Indicator::TEMP};

std::string_view to_string(Channel c);
std::string_view to_string(Indicator i);
Channel parse_channel(std::string_view s);
Indicator parse_indicator(std::string_view s);
Indicator indicator_of(Channel c);

enum class Device { Wrist, Chest };

std::string_view to_string(Device d);
Device parse_device(std::string_view s);

// Indicator set recorded by each device, in canonical model order.
std::vector<Indicator> device_indicators(Device d);

// Affective classes: 0 normal, 1 excited, 2 stressed.
inline constexpr int kNumClasses = 3;
// Window label meaning "no target": excluded from loss and metrics.
inline constexpr int kIgnoreLabel = -1;

// Deterministic 64-bit generator with portable real/normal draws.
// std::*_distribution output differs between standard libraries, which would
// break byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::size_t index(std::size_t n);  // [0, n)
  bool bernoulli(double p) { return uniform() < p; }
  Rng split(std::uint64_t stream);

 private:
  std::uint64_t state_;
  std::optional<double> spare_normal_;
};

// FNV-1a, used for catalog hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace physio
