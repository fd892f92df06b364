#pragma once

#include <string>

#include "jmls/psaem.hpp"

namespace jmls {

/// Model files are JSON key-value trees: dims, per-mode matrices as
/// row-major nested arrays, Pi, p_s1, mu1, P1.
void save_model(const JmlsModel& model, const std::string& path);
JmlsModel load_model(const std::string& path);

/// Dataset CSV: header "t,u1..u{n_u},y1..y{n_y}", one row per time step,
/// t starting at 1. Values are written round-trip exact.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Checkpoint of an identification run (theta, smoothed statistics,
/// reference trajectory, iteration counter, optional rng state).
void save_checkpoint(const PsaemState& state, const std::string& rng_state,
                     const std::string& path);
struct Checkpoint {
  PsaemState state;
  std::string rng_state;
};
Checkpoint load_checkpoint(const std::string& path);

/// Shortest round-trip-exact decimal rendering used by every CSV writer.
std::string format_double(double v);

}  // namespace jmls
