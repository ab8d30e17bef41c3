#include "physio/common.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace physio {

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::AccX: return "ACC_X";
    case Channel::AccY: return "ACC_Y";
    case Channel::AccZ: return "ACC_Z";
    case Channel::EDA: return "EDA";
    case Channel::EMG: return "EMG";
    case Channel::BVP: return "BVP";
    case Channel::ECG: return "ECG";
    case Channel::TEMP: return "TEMP";
    case Channel::RESP: return "RESP";
  }
  return "?";
}

std::string_view to_string(Indicator i) {
  switch (i) {
    case Indicator::ACC: return "ACC";
    case Indicator::BVP: return "BVP";
    case Indicator::ECG: return "ECG";
    case Indicator::EDA: return "EDA";
    case Indicator::EMG: return "EMG";
    case Indicator::RESP: return "RESP";
    case Indicator::TEMP: return "TEMP";
  }
  return "?";
}

Channel parse_channel(std::string_view s) {
  for (auto c : {Channel::AccX, Channel::AccY, Channel::AccZ, Channel::EDA, Channel::EMG,
                 Channel::BVP, Channel::ECG, Channel::TEMP, Channel::RESP}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown channel '" + std::string(s) + "'");
}

Indicator parse_indicator(std::string_view s) {
  for (auto i : kAllIndicators) {
    if (to_string(i) == s) return i;
  }
  throw ConfigError("unknown indicator '" + std::string(s) + "'");
}

Indicator indicator_of(Channel c) {
  switch (c) {
    case Channel::AccX:
    case Channel::AccY:
    case Channel::AccZ: return Indicator::ACC;
    case Channel::EDA: return Indicator::EDA;
    case Channel::EMG: return Indicator::EMG;
    case Channel::BVP: return Indicator::BVP;
    case Channel::ECG: return Indicator::ECG;
    case Channel::TEMP: return Indicator::TEMP;
    case Channel::RESP: return Indicator::RESP;
  }
  return Indicator::ACC;
}

std::string_view to_string(Device d) { return d == Device::Wrist ? "wrist" : "chest"; }

Device parse_device(std::string_view s) {
  if (s == "wrist" || s == "Wrist") return Device::Wrist;
  if (s == "chest" || s == "Chest") return Device::Chest;
  throw ConfigError("unknown device '" + std::string(s) + "' (expected wrist or chest)");
}

std::vector<Indicator> device_indicators(Device d) {
  if (d == Device::Wrist) return {Indicator::ACC, Indicator::BVP, Indicator::EDA, Indicator::TEMP};
  return {Indicator::ACC, Indicator::ECG, Indicator::EDA, Indicator::EMG, Indicator::RESP,
          Indicator::TEMP};
}

// splitmix64
std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (spare_normal_) {
    double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  return r * std::cos(a);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(next_u64() % n);
}

Rng Rng::split(std::uint64_t stream) {
  return Rng(next_u64() ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace physio
